"""
Matrices stored as families of diagonals.

A DiagMatrix of size N keeps diagonal k (an array of length N - |k|, the
np.diagonal convention) for each stored offset k. Products are assembled
diagonal by diagonal through shifted pointwise products.
"""

import logging
import math
from typing import Dict, Iterable, List, Mapping, Optional, Tuple

import numpy as np

from .errors import FitRefusedError, InvalidInputError
from .lab_constants import DEFAULT_FLOOR

logger = logging.getLogger(__name__)

PROFILE_CSV_HEADER = ('k', 'supnorm')


def _shifted(values: np.ndarray, shift: int) -> np.ndarray:
    """out[i] = values[i + shift] where the index is in range, 0 elsewhere."""
    size = values.shape[0]
    out = np.zeros_like(values)
    if shift >= 0:
        if shift < size:
            out[:size - shift] = values[shift:]
    elif -shift < size:
        out[-shift:] = values[:size + shift]
    return out


class DiagMatrix:
    """
    Square matrix of size N as a map offset -> diagonal.

    Args:
        size: N
        diagonals: offset k -> array of length N - |k|; absent offsets are zero
    """

    def __init__(self, size: int, diagonals: Optional[Mapping[int, Iterable[float]]] = None):
        if size < 1:
            raise InvalidInputError(f"ERROR: matrix size must be positive, got {size}")
        self.size = size
        self.diagonals: Dict[int, np.ndarray] = {}
        errors = []
        for offset, values in (diagonals or {}).items():
            array = np.asarray(values, dtype=float)
            if abs(offset) >= size:
                errors.append(f"  - offset {offset} outside (-{size}, {size})")
            elif array.shape != (size - abs(offset),):
                errors.append(f"  - diagonal {offset} has shape {array.shape}, expected ({size - abs(offset)},)")
            else:
                self.diagonals[int(offset)] = array
        if errors:
            raise InvalidInputError("ERROR: invalid diagonal storage:\n" + '\n'.join(errors))

    @classmethod
    def from_dense(cls, matrix: np.ndarray) -> 'DiagMatrix':
        """Diagonal storage of a dense square matrix; all-zero diagonals are dropped."""
        matrix = np.asarray(matrix, dtype=float)
        if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
            raise InvalidInputError(f"ERROR: expected a square matrix, got shape {matrix.shape}")
        size = matrix.shape[0]
        diagonals = {}
        for offset in range(-(size - 1), size):
            values = np.diagonal(matrix, offset).copy()
            if np.any(values != 0):
                diagonals[offset] = values
        return cls(size, diagonals)

    @classmethod
    def identity(cls, size: int) -> 'DiagMatrix':
        return cls(size, {0: np.ones(size)})

    @classmethod
    def from_diagonal(cls, values: Iterable[float]) -> 'DiagMatrix':
        values = np.asarray(values, dtype=float)
        return cls(values.shape[0], {0: values})

    @classmethod
    def tridiagonal(cls, diagonal: Iterable[float], hopping: float) -> 'DiagMatrix':
        diagonal = np.asarray(diagonal, dtype=float)
        size = diagonal.shape[0]
        diagonals = {0: diagonal}
        if size > 1 and hopping != 0:
            diagonals[1] = np.full(size - 1, float(hopping))
            diagonals[-1] = np.full(size - 1, float(hopping))
        return cls(size, diagonals)

    @classmethod
    def from_row_forms(cls, size: int, rows: Mapping[int, np.ndarray]) -> 'DiagMatrix':
        """Inverse of `row_form`: rows[k][i] is the entry (i, i + k)."""
        diagonals = {}
        for offset, row in rows.items():
            if abs(offset) >= size:
                continue
            diagonals[offset] = row[:size - offset] if offset >= 0 else row[-offset:]
        return cls(size, diagonals)

    def to_dense(self) -> np.ndarray:
        matrix = np.zeros((self.size, self.size))
        for offset, values in self.diagonals.items():
            rows = np.arange(values.shape[0]) + max(0, -offset)
            matrix[rows, rows + offset] = values
        return matrix

    def diagonal(self, offset: int) -> np.ndarray:
        if offset in self.diagonals:
            return self.diagonals[offset]
        return np.zeros(max(0, self.size - abs(offset)))

    def row_form(self, offset: int) -> np.ndarray:
        """Length-N array whose entry i is (i, i + offset), zero where the column is out of range."""
        row = np.zeros(self.size)
        values = self.diagonal(offset)
        if offset >= 0:
            row[:values.shape[0]] = values
        else:
            row[-offset:] = values
        return row

    def nonzero_offsets(self) -> List[int]:
        return sorted(k for k, values in self.diagonals.items() if np.any(values != 0))

    def max_abs(self) -> float:
        return max((float(np.max(np.abs(v))) for v in self.diagonals.values() if v.size), default=0.0)

    def __sub__(self, other: 'DiagMatrix') -> 'DiagMatrix':
        _check_sizes(self, other)
        diagonals = {k: v.copy() for k, v in self.diagonals.items()}
        for offset, values in other.diagonals.items():
            diagonals[offset] = diagonals.get(offset, np.zeros_like(values)) - values
        return DiagMatrix(self.size, diagonals)

    def __repr__(self) -> str:
        return f"DiagMatrix(size={self.size}, offsets={sorted(self.diagonals)})"


def _check_sizes(A: DiagMatrix, B: DiagMatrix):
    if A.size != B.size:
        raise InvalidInputError(f"ERROR: dimension mismatch: {A.size} vs {B.size}")


def norm_s(A: DiagMatrix, s: float) -> float:
    """max_k sup|A_k| e^(|k| s)."""
    if s < 0:
        raise InvalidInputError(f"ERROR: norm weight s must be non-negative, got {s}")
    return max(
        (float(np.max(np.abs(values))) * math.exp(abs(k) * s) for k, values in A.diagonals.items() if values.size),
        default=0.0,
    )


def diag_product(A: DiagMatrix, B: DiagMatrix) -> DiagMatrix:
    """
    Product AB by diagonals: Z_k(i) = sum_l A_l(i) B_{k-l}(i + l) in row form.

    Raises:
        InvalidInputError: On a dimension mismatch
    """
    _check_sizes(A, B)
    size = A.size
    rows: Dict[int, np.ndarray] = {}
    b_rows = {m: B.row_form(m) for m in B.diagonals}
    for l in A.diagonals:
        a_row = A.row_form(l)
        for m, b_row in b_rows.items():
            k = l + m
            if abs(k) >= size:
                continue
            contribution = a_row * _shifted(b_row, l)
            if k in rows:
                rows[k] += contribution
            else:
                rows[k] = contribution
    return DiagMatrix.from_row_forms(size, rows)


def conjugation_residual(H: DiagMatrix, V: DiagMatrix, D: DiagMatrix) -> float:
    """max |HV - VD|."""
    return (diag_product(H, V) - diag_product(V, D)).max_abs()


def diagonal_decay_profile(V: DiagMatrix) -> List[Tuple[int, float]]:
    """(k, sup|V_k|) for every stored offset, ascending in k."""
    return [(k, float(np.max(np.abs(V.diagonals[k])))) for k in sorted(V.diagonals) if V.diagonals[k].size]


def fit_diagonal_decay(profile: List[Tuple[int, float]], floor: float = DEFAULT_FLOOR) -> Tuple[float, float]:
    """
    Least-squares fit of log sup|V_k| against |k| over entries above the floor.

    Returns:
        (C_fit, r_fit) with sup|V_k| ~ C_fit e^(-r_fit |k|)

    Raises:
        FitRefusedError: With fewer than 3 points above the floor
    """
    points = [(abs(k), value) for k, value in profile if value > floor]
    if len({distance for distance, _ in points}) < 2 or len(points) < 3:
        raise FitRefusedError(
            f"ERROR: decay fit needs at least 3 points above the floor {floor}, got {len(points)}"
        )
    distances = np.array([p[0] for p in points], dtype=float)
    logs = np.log(np.array([p[1] for p in points]))
    slope, intercept = np.polyfit(distances, logs, 1)
    return float(math.exp(intercept)), float(-slope)


def _shift_along_diagonal(A: DiagMatrix, t: int) -> DiagMatrix:
    """Matrix with entries (i, i + k) taken from (i + t, i + t + k), zero-filled."""
    return DiagMatrix.from_row_forms(A.size, {k: _shifted(A.row_form(k), t) for k in A.diagonals})


def shift_covariance_residual(H_shifted: DiagMatrix, V: DiagMatrix, D: DiagMatrix, t: int,
                              margin: int = 0) -> float:
    """
    Residual of H_shifted V~ = V~ D~ with V~_k(i) = V_k(i + t), D~_0(i) = D_0(i + t).

    H_shifted is the operator of the translated element, i.e. the window
    whose diagonal is that of H moved by t. The residual is taken over rows
    [margin, N - margin) only, where the translated identity is exact.

    Raises:
        InvalidInputError: If |t| is not below the margin (t != 0)
    """
    _check_sizes(H_shifted, V)
    _check_sizes(V, D)
    if t != 0 and abs(t) >= margin:
        raise InvalidInputError(f"ERROR: shift t = {t} must be smaller than the interior margin {margin}")
    if 2 * margin >= V.size:
        raise InvalidInputError(f"ERROR: margin {margin} leaves no interior rows in a window of size {V.size}")

    V_shifted = _shift_along_diagonal(V, t)
    D_shifted = _shift_along_diagonal(D, t)
    difference = diag_product(H_shifted, V_shifted) - diag_product(V_shifted, D_shifted)
    residual = 0.0
    for offset in difference.diagonals:
        row = difference.row_form(offset)[margin:V.size - margin]
        if row.size:
            residual = max(residual, float(np.max(np.abs(row))))
    return residual
