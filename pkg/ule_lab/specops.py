"""
Finite windows of the Schrödinger operator and the dressed potential.

A window is the symmetric tridiagonal truncation (zero boundary) of
H = hopping * Laplacian-offdiagonal + diagonal on N consecutive sites.
The dressed potential is found by a damped fixed-point iteration that
pushes the eigenvalue matched to each site onto its target d_i / eps.
"""

import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from numpy.linalg import LinAlgError
from scipy.linalg import eigh_tridiagonal

from .diagalg import DiagMatrix
from .errors import (
    CenterCollisionError,
    ConvergenceError,
    EigenSolverError,
    InvalidInputError,
)
from .hull import GroupElement
from .lab_constants import (
    DEFAULT_DAMPING,
    DEFAULT_MAX_ITER,
    DEFAULT_TOL,
    MIN_DAMPING,
    ORTHONORMALITY_TOL,
    RESIDUAL_TOL,
    default_interior_margin,
)
from .locreport import localization_center
from .sampling import LimitPeriodicSeries, evaluate_at, orbit_max_gap

logger = logging.getLogger(__name__)

EIGEN_CSV_HEADER = ('index', 'eigenvalue', 'center', 'fitted_rate')
TRACE_CSV_HEADER = ('iteration', 'residual', 'damping')


class OperatorForm(Enum):
    """Normalization of the operator window."""

    POESCHEL = 'poeschel'    # off-diagonal eps, diagonal d
    STANDARD = 'standard'    # off-diagonal 1, diagonal d / eps

    @classmethod
    def parse(cls, text: str) -> 'OperatorForm':
        try:
            return cls(text.strip().lower())
        except ValueError:
            raise InvalidInputError(f"ERROR: unknown operator form '{text}' (expected poeschel or standard)")


@dataclass(frozen=True, eq=False)
class OperatorWindow:
    """
    Symmetric tridiagonal window on sites offset .. offset + N - 1.

    Attributes:
        offset: Lattice site of row 0
        diagonal: Matrix diagonal (already divided by eps in STANDARD form)
        hopping: Coupling eps
        form: Normalization
    """

    offset: int
    diagonal: np.ndarray
    hopping: float
    form: OperatorForm

    @property
    def size(self) -> int:
        return int(self.diagonal.shape[0])

    @property
    def off_diagonal(self) -> float:
        return self.hopping if self.form is OperatorForm.POESCHEL else 1.0

    def matrix(self) -> DiagMatrix:
        return DiagMatrix.tridiagonal(self.diagonal, self.off_diagonal)

    def to_dense(self) -> np.ndarray:
        return self.matrix().to_dense()


def window_from_values(values: Sequence[float], eps: float, form: OperatorForm = OperatorForm.POESCHEL,
                       offset: int = 0) -> OperatorWindow:
    """
    Window with diagonal `values` (potential units) and coupling eps.

    In STANDARD form the diagonal is divided by eps.
    """
    values = np.asarray(values, dtype=float)
    if values.ndim != 1 or values.shape[0] < 2:
        raise InvalidInputError(f"ERROR: operator window needs N >= 2 sites, got {values.shape}")
    if eps < 0:
        raise InvalidInputError(f"ERROR: coupling eps must be non-negative, got {eps}")
    if form is OperatorForm.STANDARD:
        if eps == 0:
            raise InvalidInputError("ERROR: STANDARD form divides by eps and requires eps > 0")
        values = values / eps
    return OperatorWindow(offset=offset, diagonal=values, hopping=float(eps), form=form)


def build_window(series: LimitPeriodicSeries, g: GroupElement, a: int, N: int, eps: float,
                 form: OperatorForm, k_layers: int) -> OperatorWindow:
    """
    Window of H_omega on sites a .. a + N - 1 with V_omega(n) = evaluate_at(series, g, n).

    Args:
        series: Layered potential
        g: Hull element omega
        a: First lattice site
        N: Window size, at least 2
        eps: Coupling
        form: POESCHEL or STANDARD normalization
        k_layers: Layers summed per site
    """
    if N < 2:
        raise InvalidInputError(f"ERROR: window size must be at least 2, got {N}")
    values = [float(evaluate_at(series, g, a + j, k_layers)) for j in range(N)]
    return window_from_values(values, eps, form, offset=a)


@dataclass(frozen=True, eq=False)
class EigenSystem:
    """
    Full eigendecomposition of a window.

    Attributes:
        eigenvalues: Ascending
        eigenvectors: Orthonormal columns, largest-magnitude entry positive
        residual_bound: max ||Hv - lambda v||_inf over the pairs
        centers: Localization center (window index) per column
        offset: Lattice site of row 0
    """

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    residual_bound: float
    centers: Tuple[int, ...]
    offset: int = 0

    @property
    def size(self) -> int:
        return int(self.eigenvalues.shape[0])


def _apply_tridiagonal(diagonal: np.ndarray, off: float, vectors: np.ndarray) -> np.ndarray:
    product = diagonal[:, None] * vectors
    product[:-1] += off * vectors[1:]
    product[1:] += off * vectors[:-1]
    return product


def eigensystem(W: OperatorWindow) -> EigenSystem:
    """
    Diagonalize a window with deterministic ordering and signs.

    Raises:
        EigenSolverError: On solver failure or violated orthonormality/residual bounds
    """
    diagonal = W.diagonal
    off = W.off_diagonal
    size = W.size

    if off == 0:
        order = np.argsort(diagonal, kind='stable')
        values = diagonal[order].astype(float)
        vectors = np.eye(size)[:, order]
    else:
        try:
            values, vectors = eigh_tridiagonal(diagonal, np.full(size - 1, off))
        except LinAlgError as error:
            raise EigenSolverError(f"ERROR: tridiagonal eigensolver failed: {error}")

    # largest-magnitude entry positive; argmax picks the leftmost on ties
    peaks = np.argmax(np.abs(vectors), axis=0)
    signs = np.sign(vectors[peaks, np.arange(size)])
    signs[signs == 0] = 1
    vectors = vectors * signs[None, :]

    gram = vectors.T @ vectors
    orthogonality = np.max(np.abs(gram - np.eye(size)))
    if orthogonality > ORTHONORMALITY_TOL:
        index = int(np.unravel_index(np.argmax(np.abs(gram - np.eye(size))), gram.shape)[1])
        raise EigenSolverError(
            f"ERROR: eigenvectors not orthonormal (deviation {orthogonality:.3g})", index=index
        )

    residuals = np.max(np.abs(_apply_tridiagonal(diagonal, off, vectors) - vectors * values[None, :]), axis=0)
    scale = float(np.max(np.abs(diagonal))) + 2 * abs(off)
    worst = int(np.argmax(residuals))
    if residuals[worst] > RESIDUAL_TOL * (scale if scale > 0 else 1.0):
        raise EigenSolverError(
            f"ERROR: eigenpair {worst} has residual {residuals[worst]:.3g} above {RESIDUAL_TOL} * {scale:.3g}",
            index=worst,
        )

    centers = tuple(localization_center(vectors[:, k]) for k in range(size))
    return EigenSystem(values, vectors, float(np.max(residuals)), centers, W.offset)


def center_ordered(E: EigenSystem) -> Tuple[DiagMatrix, DiagMatrix]:
    """
    (V, D) with columns sorted by (center, eigenvalue index), so that HV = VD
    and V is close to the identity for localized systems.
    """
    order = sorted(range(E.size), key=lambda k: (E.centers[k], k))
    V = DiagMatrix.from_dense(E.eigenvectors[:, order])
    D = DiagMatrix.from_diagonal(E.eigenvalues[order])
    return V, D


@dataclass
class MatchReport:
    """
    Eigenvalues matched to sites through localization centers.

    Attributes:
        site_eigenvalue: Matched eigenvalue per site (NaN when no vector is centered there)
        mismatch: |matched eigenvalue - target| per site (NaN when unmatched)
        max_interior_mismatch: Maximum over matched interior sites
        collisions: Sites that are the center of more than one vector
        unmatched: Sites no vector is centered at
        interior_margin: Sites closer than this to an edge are not counted
    """

    site_eigenvalue: np.ndarray
    mismatch: np.ndarray
    max_interior_mismatch: float
    collisions: Tuple[int, ...]
    unmatched: Tuple[int, ...]
    interior_margin: int

    def interior_problems(self) -> Tuple[int, ...]:
        size = self.mismatch.shape[0]
        inside = range(self.interior_margin, size - self.interior_margin)
        return tuple(s for s in sorted(set(self.collisions) | set(self.unmatched)) if s in inside)

    def to_json(self) -> Dict:
        return {
            'max_interior_mismatch': self.max_interior_mismatch,
            'collisions': list(self.collisions),
            'unmatched': list(self.unmatched),
            'interior_margin': self.interior_margin,
        }


def match_eigenvalues(E: EigenSystem, targets: Sequence[float], interior_margin: int) -> MatchReport:
    """
    Pair each eigenvector with the target at its center.

    When several vectors share a center, the one with the largest weight
    there is used and the site is reported as a collision.
    """
    targets = np.asarray(targets, dtype=float)
    size = E.size
    if targets.shape != (size,):
        raise InvalidInputError(f"ERROR: {targets.shape[0]} targets for a window of {size} sites")
    if interior_margin < 0 or 2 * interior_margin >= size:
        raise InvalidInputError(f"ERROR: interior margin {interior_margin} invalid for N = {size}")

    site_eigenvalue = np.full(size, np.nan)
    best_weight = np.zeros(size)
    counts = np.zeros(size, dtype=int)
    for k, center in enumerate(E.centers):
        counts[center] += 1
        weight = abs(E.eigenvectors[center, k])
        if weight > best_weight[center]:
            best_weight[center] = weight
            site_eigenvalue[center] = E.eigenvalues[k]

    mismatch = np.abs(site_eigenvalue - targets)
    interior = mismatch[interior_margin:size - interior_margin]
    matched = interior[~np.isnan(interior)]
    max_interior = float(np.max(matched)) if matched.size else float('nan')
    collisions = tuple(int(s) for s in np.flatnonzero(counts > 1))
    unmatched = tuple(int(s) for s in np.flatnonzero(counts == 0))
    if collisions:
        logger.debug("Center collisions at sites %s", collisions)
    return MatchReport(site_eigenvalue, mismatch, max_interior, collisions, unmatched, interior_margin)


@dataclass(frozen=True)
class DressedStep:
    iteration: int
    residual: float
    damping: float


@dataclass
class DressedPotential:
    """
    Result of the dressed-potential iteration.

    Attributes:
        p: STANDARD-form diagonal (d~ / eps); equals d itself when eps = 0
        eps: Coupling
        iterations: Corrective steps performed
        final_mismatch: Interior mismatch of the returned diagonal
        trace: One entry per diagonalization
    """

    p: np.ndarray
    eps: float
    iterations: int
    final_mismatch: float
    trace: List[DressedStep] = field(default_factory=list)

    def window(self, offset: int = 0) -> OperatorWindow:
        if self.eps == 0:
            return window_from_values(self.p, 0.0, OperatorForm.POESCHEL, offset)
        return OperatorWindow(offset=offset, diagonal=self.p, hopping=self.eps, form=OperatorForm.STANDARD)


def construct_dressed_potential(d_targets: Sequence[float], eps: float, tol: float = DEFAULT_TOL,
                                max_iter: int = DEFAULT_MAX_ITER, interior_margin: Optional[int] = None,
                                initial: Optional[Sequence[float]] = None,
                                damping: float = DEFAULT_DAMPING) -> DressedPotential:
    """
    Find p whose STANDARD-form window has interior eigenvalues d_i / eps.

    Starting from p = d / eps (or `initial`), each step diagonalizes,
    matches eigenvalues to sites by localization center and moves every
    matched site by damping * (d_i / eps - lambda_i). The damping is halved
    whenever the residual grows; any growth counts as an oscillation and the
    sign pattern of the residual is not inspected.

    Args:
        d_targets: Target potential d over the window
        eps: Coupling (0 returns d unchanged)
        tol: Interior mismatch at which the iteration stops
        max_iter: Maximum number of corrective steps
        interior_margin: Sites excluded at each edge (default N / 8)
        initial: Starting diagonal in STANDARD units
        damping: Initial damping factor

    Returns:
        DressedPotential with its iteration trace

    Raises:
        CenterCollisionError: If two vectors share an interior center
        ConvergenceError: If tol is not met within max_iter steps
    """
    d = np.asarray(d_targets, dtype=float)
    size = d.shape[0]
    if eps < 0:
        raise InvalidInputError(f"ERROR: coupling eps must be non-negative, got {eps}")
    if eps == 0:
        return DressedPotential(d.copy(), 0.0, 0, 0.0)
    if interior_margin is None:
        interior_margin = default_interior_margin(size)

    target = d / eps
    p = np.array(initial, dtype=float) if initial is not None else target.copy()
    trace: List[DressedStep] = []
    previous = np.inf
    residual_norm = np.inf

    for step in range(max_iter + 1):
        system = eigensystem(OperatorWindow(0, p, eps, OperatorForm.STANDARD))
        report = match_eigenvalues(system, target, interior_margin)
        problems = report.interior_problems()
        if problems:
            raise CenterCollisionError(
                f"ERROR: localization lost at eps = {eps}: interior sites {list(problems)} "
                "are shared or unmatched", sites=problems,
            )
        residual_norm = report.max_interior_mismatch
        trace.append(DressedStep(step, residual_norm, damping))
        logger.info("Iteration %d: residual %.3e, damping %.4g", step, residual_norm, damping)

        if residual_norm <= tol:
            return DressedPotential(p, eps, step, residual_norm, trace)
        if step == max_iter:
            break
        if residual_norm > previous:
            damping /= 2
            if damping < MIN_DAMPING:
                break
        previous = residual_norm

        correction = target - report.site_eigenvalue
        correction[np.isnan(correction)] = 0.0
        p = p + damping * correction

    raise ConvergenceError(
        f"ERROR: dressed potential did not converge at eps = {eps}: residual {residual_norm:.3e} "
        f"after {len(trace) - 1} steps (tol {tol:g})",
        iterations=len(trace) - 1, residual=float(residual_norm),
    )


def dressed_deviation(p: Sequence[float], d_targets: Sequence[float], eps: float,
                      interior_margin: Optional[int] = None) -> float:
    """
    ||eps p - d||_inf over the interior (POESCHEL normalization).

    For eps = 0 the dressed diagonal is already in potential units and ||p - d|| is returned.
    """
    p = np.asarray(p, dtype=float)
    d = np.asarray(d_targets, dtype=float)
    if p.shape != d.shape:
        raise InvalidInputError(f"ERROR: dressed diagonal has shape {p.shape}, targets {d.shape}")
    if interior_margin is None:
        interior_margin = default_interior_margin(p.shape[0])
    scaled = p if eps == 0 else eps * p
    difference = np.abs(scaled - d)[interior_margin:p.shape[0] - interior_margin]
    return float(np.max(difference)) if difference.size else 0.0


def spectral_filling_gap(E: EigenSystem, d_targets: Sequence[float], eps: float, interior_margin: int) -> float:
    """
    Largest gap left in [0, 1] by the eps-rescaled matched interior eigenvalues
    of a STANDARD-form window with targets d_i / eps.
    """
    if eps <= 0:
        raise InvalidInputError("ERROR: spectral filling needs eps > 0")
    report = match_eigenvalues(E, np.asarray(d_targets, dtype=float) / eps, interior_margin)
    interior = report.site_eigenvalue[interior_margin:E.size - interior_margin]
    return orbit_max_gap(eps * interior[~np.isnan(interior)])


def eigen_rows(E: EigenSystem, rates: Optional[Sequence[float]] = None) -> List[Tuple]:
    """CSV rows index, eigenvalue, center, fitted_rate; centers are lattice sites (offset + j)."""
    rows = []
    for k in range(E.size):
        rate = rates[k] if rates is not None else ''
        rows.append((k, float(E.eigenvalues[k]), E.offset + int(E.centers[k]), rate))
    return rows
