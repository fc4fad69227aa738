#!/usr/bin/env python3
"""
Laboratory service for the ULE experiments.

This module runs one pipeline per command (potential, spectrum, dress, ule,
dynloc, sweep, distality, approx) from a resolved RunConfig, writes the
artifacts through the ReportWriter and returns a JSON-ready summary.
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Dict, Optional, Tuple

import numpy as np

from .approx import (
    APPROX_CSV_HEADER,
    approx_table,
    approximation_from_json,
    is_approximation_function,
    refined_h_upper,
)
from .errors import CertificationError, InconclusiveError
from .hull import GroupElement
from .locreport import KERNEL_CSV_HEADER, dynloc_kernel, dynloc_report, fit_decay, kernel_rows, ule_report
from .report_writer import ReportWriter
from .run_config import RunConfig, resolve_threads
from .sampling import (
    POTENTIAL_CSV_HEADER,
    DistalGenerator,
    LimitPeriodicSeries,
    check_poeschel_separation,
    distal_approximation_function,
    poeschel_series,
    potential_rows,
    potential_window,
    verify_distality,
)
from .specops import (
    EIGEN_CSV_HEADER,
    TRACE_CSV_HEADER,
    EigenSystem,
    OperatorForm,
    build_window,
    construct_dressed_potential,
    dressed_deviation,
    eigen_rows,
    eigensystem,
    match_eigenvalues,
    window_from_values,
)

logger = logging.getLogger(__name__)

SWEEP_CSV_HEADER = ('eps', 'N', 't', 'uniform_c', 'uniform_r', 'kernel_C', 'kernel_r', 'max_mismatch', 'iters')
DRESSED_CSV_HEADER = ('n', 'd', 'p', 'scaled')


@dataclass
class LocalizedSystem:
    """Eigensystem of the (dressed) window at one grid point."""

    system: EigenSystem
    targets: np.ndarray
    iterations: int
    mismatch: float


class LabService:
    """
    Service class running the laboratory pipelines.

    Handles the complete pipeline from a configuration to the written
    artifacts and the summary printed by the command line.
    """

    def __init__(self, config: RunConfig):
        """
        Initialize the service.

        Args:
            config: Validated run configuration
        """
        self.config = config
        self.writer = ReportWriter(config.output_dir, config.config_hash())
        self._generator: Optional[DistalGenerator] = None
        self._series: Optional[LimitPeriodicSeries] = None

    @property
    def generator(self) -> DistalGenerator:
        if self._generator is None:
            self._generator = DistalGenerator.from_frequency_set(
                self.config.frequency_chain(), m=self.config.m, depth=self.config.k_layers,
                exact=self.config.exact,
            )
        return self._generator

    @property
    def series(self) -> LimitPeriodicSeries:
        if self._series is None:
            if self.config.generator == 'poeschel':
                self._series = poeschel_series(self.config.poeschel_depth)
            else:
                self._series = self.generator.series(self.config.k_layers)
        return self._series

    def _element(self, t: int) -> GroupElement:
        return GroupElement.from_integer(self.series.chain, t)

    def _offset(self, t: int) -> int:
        # co-moving window: omega = T^t(e) is sampled on the same stretch of d for every t
        return self.config.offset - t

    def potential_values(self, size: int, t: int) -> np.ndarray:
        """V_omega on the window for omega = T^t(e), as floats."""
        window = build_window(self.series, self._element(t), self._offset(t), size, 0.0,
                              OperatorForm.POESCHEL, self.series.depth)
        return window.diagonal

    def localized_system(self, eps: float, size: int, t: int) -> LocalizedSystem:
        """
        Eigensystem of the dressed STANDARD-form window (plain window at eps = 0).
        """
        d = self.potential_values(size, t)
        if eps == 0:
            system = eigensystem(window_from_values(d, 0.0, OperatorForm.POESCHEL, self._offset(t)))
            return LocalizedSystem(system, d, 0, 0.0)
        dressed = construct_dressed_potential(d, eps, self.config.tol, self.config.max_iter,
                                              self.config.margin_for(size))
        system = eigensystem(dressed.window(self._offset(t)))
        return LocalizedSystem(system, d / eps, dressed.iterations, dressed.final_mismatch)

    def potential(self) -> Dict:
        size, t = self.config.N[0], self.config.t[0]
        window = potential_window(self.series, self._element(t), self._offset(t), size, self.series.depth)
        path = self.writer.write_csv('potential.csv', POTENTIAL_CSV_HEADER, potential_rows(window))
        return {'command': 'potential', 'files': [str(path)], 'size': size, 't': t,
                'layers': self.series.depth, 'periods': list(self.series.chain.elements)}

    def spectrum(self) -> Dict:
        eps, size, t = self.config.eps[0], self.config.N[0], self.config.t[0]
        form = OperatorForm.POESCHEL if eps == 0 else OperatorForm.parse(self.config.form)
        d = self.potential_values(size, t)
        window = window_from_values(d, eps, form, self._offset(t))
        system = eigensystem(window)
        rates = [fit_decay(system.eigenvectors[:, k], system.centers[k], self.config.floor).r
                 for k in range(system.size)]
        report = match_eigenvalues(system, window.diagonal, self.config.margin_for(size))

        files = [self.writer.write_csv('eigen.csv', EIGEN_CSV_HEADER, eigen_rows(system, rates))]
        if self.config.full_vectors:
            files.append(self.writer.write_json('vectors.json', {'eigenvectors': system.eigenvectors.T}))
        return {'command': 'spectrum', 'files': [str(p) for p in files], 'eps': eps, 'N': size, 't': t,
                'form': form.value, 'residual_bound': system.residual_bound, 'match': report.to_json()}

    def dress(self) -> Dict:
        eps, size, t = self.config.eps[0], self.config.N[0], self.config.t[0]
        margin = self.config.margin_for(size)
        d = self.potential_values(size, t)
        dressed = construct_dressed_potential(d, eps, self.config.tol, self.config.max_iter, margin)

        # independent re-check of the returned diagonal
        verified = float('nan')
        if eps > 0:
            check = match_eigenvalues(eigensystem(dressed.window()), d / eps, margin)
            verified = check.max_interior_mismatch

        trace_rows = [(s.iteration, s.residual, s.damping) for s in dressed.trace]
        scaled = dressed.p if eps == 0 else eps * dressed.p
        dressed_rows = [(self._offset(t) + j, d[j], dressed.p[j], scaled[j]) for j in range(size)]
        summary = {
            'eps': eps, 'N': size, 't': t, 'iterations': dressed.iterations,
            'final_mismatch': dressed.final_mismatch, 'verified_mismatch': verified,
            'deviation': dressed_deviation(dressed.p, d, eps, margin), 'interior_margin': margin,
        }
        files = [
            self.writer.write_csv('dress_trace.csv', TRACE_CSV_HEADER, trace_rows),
            self.writer.write_csv('dressed.csv', DRESSED_CSV_HEADER, dressed_rows),
            self.writer.write_json('dress.json', summary),
        ]
        return dict(summary, command='dress', files=[str(p) for p in files])

    def ule(self) -> Dict:
        eps, size, t = self.config.eps[0], self.config.N[0], self.config.t[0]
        localized = self.localized_system(eps, size, t)
        report = ule_report(localized.system, self.config.floor)
        path = self.writer.write_json('ule.json', report.to_json())
        return {'command': 'ule', 'files': [str(path)], 'eps': eps, 'N': size, 't': t,
                'uniform_c': report.uniform_c, 'uniform_r': report.uniform_r,
                'capped_count': report.capped_count}

    def dynloc(self) -> Dict:
        eps, size, t = self.config.eps[0], self.config.N[0], self.config.t[0]
        localized = self.localized_system(eps, size, t)
        report = dynloc_report(localized.system, self.config.floor)
        files = [
            self.writer.write_json('dynloc.json', report.to_json()),
            self.writer.write_csv('kernel.csv', KERNEL_CSV_HEADER, kernel_rows(dynloc_kernel(localized.system))),
        ]
        return dict(report.to_json(), command='dynloc', files=[str(p) for p in files], eps=eps, N=size, t=t)

    def _sweep_point(self, point: Tuple[float, int, int]) -> Tuple:
        eps, size, t = point
        logger.info("Sweep point eps=%g N=%d t=%d", eps, size, t)
        try:
            localized = self.localized_system(eps, size, t)
        except InconclusiveError as e:
            logger.warning("Sweep point eps=%g N=%d t=%d inconclusive: %s", eps, size, t, e)
            nan = float('nan')
            return (eps, size, t, nan, nan, nan, nan, nan, -1), {
                'eps': eps, 'N': size, 't': t, 'type': type(e).__name__, 'error': str(e)}
        ule = ule_report(localized.system, self.config.floor)
        dynloc = dynloc_report(localized.system, self.config.floor)
        return (eps, size, t, ule.uniform_c, ule.uniform_r, dynloc.kernel_C, dynloc.kernel_r,
                localized.mismatch, localized.iterations), None

    def sweep(self) -> Dict:
        """
        Run every (eps, N, t) grid point and write one summary sorted by the grid tuple.

        An inconclusive grid point is written with NaN metrics and iters = -1 and
        listed under 'failed'; the sweep raises only when every point failed.
        """
        points = sorted((eps, size, t) for eps in self.config.eps for size in self.config.N for t in self.config.t)
        # build the shared series before the workers start
        _ = self.series
        with ThreadPoolExecutor(max_workers=resolve_threads(self.config)) as executor:
            results = list(executor.map(self._sweep_point, points))
        rows = sorted((row for row, _ in results), key=lambda row: row[:3])
        failed = [failure for _, failure in results if failure is not None]
        path = self.writer.write_csv('sweep.csv', SWEEP_CSV_HEADER, rows)
        if len(failed) == len(rows):
            raise InconclusiveError(f"ERROR: every sweep point was inconclusive; see {path}")
        return {'command': 'sweep', 'files': [str(path)], 'points': len(rows), 'failed': failed,
                'rows': [dict(zip(SWEEP_CSV_HEADER, row)) for row in rows]}

    def distality(self) -> Dict:
        window = (self.config.window[0], self.config.window[1])
        K = self.config.max_separation
        if self.config.generator == 'poeschel':
            report = check_poeschel_separation(window, K)
        else:
            report = verify_distality(self.generator, window, K)
        data = dict(report.to_json(), generator=self.config.generator, window=list(window), K=K)
        path = self.writer.write_json('distality.json', data)
        if not report.passed:
            raise CertificationError(
                f"ERROR: separation violated at (i, k) = {report.violation}; see {path}"
            )
        return dict(data, command='distality', files=[str(path)])

    def approx(self) -> Dict:
        spec = self.config.approx
        if spec.get('kind') == 'distal':
            Q = distal_approximation_function(self.generator)
        else:
            Q = approximation_from_json(spec)
        grid = self.config.t_grid
        rows = approx_table(Q, grid)
        refined = [refined_h_upper(Q, t) for t in grid]
        data = {
            'Q': Q.to_json(),
            'is_approximation_function': is_approximation_function(Q, grid),
            'rows': [{'t': t, 'q': q, 'h_upper': h, 'h_refined': r.value}
                     for (t, q, h), r in zip(rows, refined)],
        }
        files = [
            self.writer.write_csv('approx.csv', APPROX_CSV_HEADER, rows),
            self.writer.write_json('approx.json', data),
        ]
        return dict(data, command='approx', files=[str(p) for p in files])

    def run(self, command: str) -> Dict:
        """Dispatch one pipeline by name."""
        handlers = {
            'potential': self.potential,
            'spectrum': self.spectrum,
            'dress': self.dress,
            'ule': self.ule,
            'dynloc': self.dynloc,
            'sweep': self.sweep,
            'distality': self.distality,
            'approx': self.approx,
        }
        return handlers[command]()
