"""
Localization reports: per-eigenvector decay fits with certified uniform
constants, and the dominating kernel certifying dynamical localization.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Dict, List, Optional, Sequence, Tuple

import numpy as np

from .errors import CertificationError, InvalidInputError
from .lab_constants import DEFAULT_FLOOR, DOMINANCE_TOL, DYNLOC_SAMPLE_TIMES, ENVELOPE_SLACK, RATE_CAP

if TYPE_CHECKING:
    from .specops import EigenSystem

logger = logging.getLogger(__name__)

KERNEL_CSV_HEADER = ('n', 'm', 'value')


def localization_center(u: np.ndarray) -> int:
    """Index of the largest |u(n)|, leftmost on an exact tie."""
    magnitudes = np.abs(np.asarray(u, dtype=float))
    if magnitudes.size == 0 or not np.any(magnitudes > 0):
        raise InvalidInputError("ERROR: localization center of a zero vector is undefined")
    return int(np.argmax(magnitudes))


@dataclass(frozen=True)
class DecayFit:
    """
    Exponential envelope |u(n)| <= c e^(-r |n - center|) of one vector.

    Attributes:
        center: Localization center
        c: Certified constant over the sites above the floor
        r: Fitted rate, RATE_CAP when capped
        capped: True when fewer than 3 off-center points were above the floor
        points: Number of off-center points used by the fit
    """

    center: int
    c: float
    r: float
    capped: bool
    points: int


def _certified_constant(magnitudes: np.ndarray, distances: np.ndarray, rate: float, floor: float) -> float:
    mask = magnitudes > floor
    if not np.any(mask):
        return 0.0
    return float(np.max(magnitudes[mask] * np.exp(rate * distances[mask])))


def fit_decay(u: np.ndarray, center: int, floor: float = DEFAULT_FLOOR) -> DecayFit:
    """
    Least-squares line through (|n - center|, log|u(n)|) over off-center
    entries above the floor; r = -slope and c is the smallest constant making
    the envelope hold at every site above the floor.
    """
    magnitudes = np.abs(np.asarray(u, dtype=float))
    distances = np.abs(np.arange(magnitudes.size) - center).astype(float)
    mask = (magnitudes > floor) & (distances > 0)
    points = int(np.count_nonzero(mask))

    if points < 3 or np.unique(distances[mask]).size < 2:
        rate = RATE_CAP
        capped = True
    else:
        slope, _ = np.polyfit(distances[mask], np.log(magnitudes[mask]), 1)
        rate = float(-slope)
        capped = False
    c = _certified_constant(magnitudes, distances, rate, floor)
    return DecayFit(center=center, c=c, r=rate, capped=capped, points=points)


@dataclass
class ULEReport:
    """Per-vector fits and the certified uniform pair (c, r)."""

    per_vector: List[DecayFit]
    uniform_c: float
    uniform_r: float
    floor: float
    capped_count: int = 0
    window: Dict[str, int] = field(default_factory=dict)
    certified_entries: int = 0

    def to_json(self) -> Dict:
        return {
            'uniform_c': self.uniform_c,
            'uniform_r': self.uniform_r,
            'floor': self.floor,
            'per_vector': [
                {'index': index, 'center': fit.center, 'c': fit.c, 'r': fit.r, 'capped': fit.capped}
                for index, fit in enumerate(self.per_vector)
            ],
            'capped_count': self.capped_count,
            'window': dict(self.window),
            'envelope_scope': {
                'certified_above_floor': self.floor,
                'certified_entries': self.certified_entries,
                'total_entries': len(self.per_vector) * self.window.get('size', len(self.per_vector)),
            },
        }


def _distance_matrix(size: int, centers: Sequence[int]) -> np.ndarray:
    return np.abs(np.arange(size)[:, None] - np.asarray(centers)[None, :]).astype(float)


def verify_envelope(magnitudes: np.ndarray, distances: np.ndarray, c: float, r: float, floor: float,
                    slack: float = ENVELOPE_SLACK) -> Optional[Tuple[int, int]]:
    """First (n, k) above the floor violating |u| <= c e^(-r d) (1 + slack), or None."""
    bound = c * np.exp(-r * distances) * (1 + slack)
    violations = np.argwhere((magnitudes > floor) & (magnitudes > bound))
    if violations.size:
        n, k = violations[0]
        return int(n), int(k)
    return None


def ule_report(E: 'EigenSystem', floor: float = DEFAULT_FLOOR) -> ULEReport:
    """
    Fit every eigenvector and certify one pair (c, r) for all of them.

    r is the smallest fitted rate among uncapped vectors; c is the maximum
    of |u_k(n)| e^(r |n - m_k|) over sites above the floor. The pair is then
    re-checked by an independent scan. Entries at or below the floor are outside the
    certified envelope; the report states how many entries were covered.

    Raises:
        CertificationError: If the independent scan finds a violation
    """
    vectors = E.eigenvectors
    size = vectors.shape[0]
    fits = [fit_decay(vectors[:, k], E.centers[k], floor) for k in range(vectors.shape[1])]
    free_rates = [fit.r for fit in fits if not fit.capped]
    capped_count = len(fits) - len(free_rates)
    if capped_count:
        logger.warning("%d of %d vectors have too few points above floor %g; rate capped at %g",
                       capped_count, len(fits), floor, RATE_CAP)
    uniform_r = min(free_rates) if free_rates else RATE_CAP

    magnitudes = np.abs(vectors)
    distances = _distance_matrix(size, E.centers)
    uniform_c = _certified_constant(magnitudes, distances, uniform_r, floor)

    violation = verify_envelope(magnitudes, distances, uniform_c, uniform_r, floor)
    if violation is not None:
        raise CertificationError(
            f"ERROR: uniform envelope (c={uniform_c}, r={uniform_r}) violated at site {violation[0]} "
            f"of vector {violation[1]}"
        )
    logger.info("ULE report: uniform c = %.6g, r = %.6g", uniform_c, uniform_r)
    return ULEReport(fits, uniform_c, uniform_r, floor, capped_count,
                     {'offset': E.offset, 'size': size},
                     int(np.count_nonzero(magnitudes > floor)))


def dynloc_kernel(E: 'EigenSystem') -> np.ndarray:
    """A(n, m) = sum_k |u_k(n)| |u_k(m)|."""
    magnitudes = np.abs(E.eigenvectors)
    return magnitudes @ magnitudes.T


def evolution_amplitude(E: 'EigenSystem', t: float, n: int, m: int) -> float:
    """|<delta_n, e^(-itH) delta_m>| from the spectral decomposition."""
    phases = np.exp(-1j * t * E.eigenvalues)
    return float(abs(np.sum(phases * E.eigenvectors[n, :] * E.eigenvectors[m, :])))


def evolution_matrix(E: 'EigenSystem', t: float) -> np.ndarray:
    """|e^(-itH)| entrywise."""
    phases = np.exp(-1j * t * E.eigenvalues)
    return np.abs((E.eigenvectors * phases[None, :]) @ E.eigenvectors.T)


@dataclass
class DynLocReport:
    """
    Kernel envelope A(n, m) <= C e^(-r |n - m|) and the sampled dominance check.

    Attributes:
        kernel_C: Certified constant over entries above the floor
        kernel_r: Fitted rate (RATE_CAP when too few entries are above the floor)
        max_violation: Largest excess of a sampled amplitude over A
        times: Sampled times
        diagonal_deviation: max |A(n, n) - 1|
    """

    kernel_C: float
    kernel_r: float
    max_violation: float
    times: Tuple[float, ...]
    diagonal_deviation: float
    floor: float

    def to_json(self) -> Dict:
        return {
            'kernel_C': self.kernel_C,
            'kernel_r': self.kernel_r,
            'max_violation': self.max_violation,
            'times': list(self.times),
            'diagonal_deviation': self.diagonal_deviation,
            'floor': self.floor,
        }


def dynloc_report(E: 'EigenSystem', floor: float = DEFAULT_FLOOR,
                  times: Sequence[float] = DYNLOC_SAMPLE_TIMES,
                  sites: Optional[Tuple[int, int]] = None) -> DynLocReport:
    """
    Fit and certify the dominating kernel, then spot-check dominance at sampled times.

    Args:
        E: Eigensystem of the window
        floor: Entries of A at or below this value are not fitted
        times: Times for the dominance spot check
        sites: Half-open range of sites for the spot check (default: first 64)

    Raises:
        CertificationError: If the envelope or the dominance check fails
    """
    kernel = dynloc_kernel(E)
    size = kernel.shape[0]
    distances = np.abs(np.arange(size)[:, None] - np.arange(size)[None, :]).astype(float)
    mask = kernel > floor

    off_diagonal = mask & (distances > 0)
    if np.count_nonzero(off_diagonal) < 3 or np.unique(distances[off_diagonal]).size < 2:
        rate = RATE_CAP
    else:
        slope, _ = np.polyfit(distances[off_diagonal], np.log(kernel[off_diagonal]), 1)
        rate = float(-slope)
    C = _certified_constant(kernel, distances, rate, floor)
    if verify_envelope(kernel, distances, C, rate, floor) is not None:
        raise CertificationError(f"ERROR: kernel envelope (C={C}, r={rate}) failed its certification scan")

    lo, hi = sites if sites is not None else (0, min(size, 64))
    block = kernel[lo:hi, lo:hi]
    worst = -math.inf
    for t in times:
        amplitudes = evolution_matrix(E, t)[lo:hi, lo:hi]
        worst = max(worst, float(np.max(amplitudes - block)))
    max_violation = max(0.0, worst)
    if max_violation > DOMINANCE_TOL:
        raise CertificationError(
            f"ERROR: evolution amplitude exceeds the dominating kernel by {max_violation:.3g}"
        )
    diagonal_deviation = float(np.max(np.abs(np.diag(kernel) - 1)))
    logger.info("Kernel envelope C = %.6g, r = %.6g; dominance violation %.3g", C, rate, max_violation)
    return DynLocReport(C, rate, max_violation, tuple(float(t) for t in times), diagonal_deviation, floor)


def kernel_rows(kernel: np.ndarray) -> List[Tuple[int, int, float]]:
    """CSV rows (n, m, A(n, m)) in row-major order."""
    size = kernel.shape[0]
    return [(n, m, float(kernel[n, m])) for n in range(size) for m in range(size)]
