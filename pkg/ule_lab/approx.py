"""
Approximation functions Q and certified upper bounds on q(t) and h(t).

q(t) = t^-4 sup_x Q(x) e^(-t x) is computed in closed form per kind; h(t),
an infimum of weighted products over decreasing schedules, is bounded from
above by evaluating one schedule with an analytic bound on the truncated tail.
"""

import logging
import math
from dataclasses import dataclass
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from .errors import InvalidInputError, ScheduleError
from .lab_constants import DEFAULT_WEIGHT_CUT

logger = logging.getLogger(__name__)

APPROX_CSV_HEADER = ('t', 'q', 'h_upper')


def _safe_exp(log_value: float) -> float:
    if log_value == math.inf:
        return math.inf
    try:
        return math.exp(log_value)
    except OverflowError:
        return math.inf


class ApproximationFunction:
    """
    Nondecreasing Q: [0, inf) -> [1, inf) of one of the supported kinds.

    Every kind provides log q(t) and constants (A, r) with
    q(t) <= A t^(-4-r) for 0 < t <= 1, used to bound truncated products.
    """

    kind = 'abstract'

    def value(self, x: float) -> float:
        raise NotImplementedError

    def log_sup(self, t: float) -> float:
        """log sup_x Q(x) e^(-t x)."""
        raise NotImplementedError

    def tail_constants(self) -> Tuple[float, float]:
        raise NotImplementedError

    def to_json(self) -> Dict:
        raise NotImplementedError


class ConstantQ(ApproximationFunction):
    """Q(x) = C."""

    kind = 'constant'

    def __init__(self, C: float):
        if not C >= 1:
            raise InvalidInputError(f"ERROR: constant approximation function needs C >= 1, got {C}")
        self.C = float(C)

    def value(self, x: float) -> float:
        return self.C

    def log_sup(self, t: float) -> float:
        return math.log(self.C)

    def tail_constants(self) -> Tuple[float, float]:
        return self.C, 0.0

    def to_json(self) -> Dict:
        return {'kind': self.kind, 'C': self.C}


class PowerLawQ(ApproximationFunction):
    """
    Q(x) = beta * max(x, x0)^r: constant beta x0^r below x0, power law beyond.

    x0 = 0 gives the pure power law beta x^r.
    """

    kind = 'power'

    def __init__(self, beta: float, r: float, x0: float = 0.0):
        errors = []
        if not beta > 0:
            errors.append(f"  - beta must be positive, got {beta}")
        if not r >= 0:
            errors.append(f"  - exponent r must be non-negative, got {r}")
        if not x0 >= 0:
            errors.append(f"  - threshold x0 must be non-negative, got {x0}")
        if errors:
            raise InvalidInputError("ERROR: invalid power-law approximation function:\n" + '\n'.join(errors))
        self.beta = float(beta)
        self.r = float(r)
        self.x0 = float(x0)

    @property
    def floor_value(self) -> float:
        return self.beta * self.x0 ** self.r

    def value(self, x: float) -> float:
        return self.beta * max(x, self.x0) ** self.r

    def log_sup(self, t: float) -> float:
        x_star = max(self.x0, self.r / t)
        candidates = []
        if self.floor_value > 0:
            candidates.append(math.log(self.floor_value))
        if x_star > 0:
            candidates.append(math.log(self.beta) + self.r * math.log(x_star) - t * x_star)
        else:
            candidates.append(math.log(self.beta))
        return max(candidates)

    def tail_constants(self) -> Tuple[float, float]:
        peak = self.beta * self.r ** self.r * math.exp(-self.r)
        return max(self.floor_value, peak), self.r

    def to_json(self) -> Dict:
        return {'kind': self.kind, 'beta': self.beta, 'r': self.r, 'x0': self.x0}


class TabulatedQ(ApproximationFunction):
    """
    Q given on a declared finite grid; the supremum is the grid maximum.

    Beyond the grid Q stays at its last value. A table whose log-slope does
    not decay over the second half of the grid grows at least exponentially;
    for t up to its final log-slope q(t) is reported as infinite.
    """

    kind = 'tabulated'

    def __init__(self, grid: Sequence[float], values: Sequence[float]):
        self.grid = np.asarray(grid, dtype=float)
        self.values = np.asarray(values, dtype=float)
        if self.grid.ndim != 1 or self.grid.shape != self.values.shape or self.grid.size < 2:
            raise InvalidInputError("ERROR: tabulated Q needs matching grid and values with at least two points")
        if np.any(self.grid < 0) or np.any(np.diff(self.grid) <= 0):
            raise InvalidInputError("ERROR: tabulated Q grid must be non-negative and strictly increasing")
        if np.any(self.values < 1) or np.any(np.diff(self.values) < 0):
            raise InvalidInputError("ERROR: tabulated Q values must be >= 1 and nondecreasing")
        self.growth_rate = self._exponential_growth_rate()

    def _exponential_growth_rate(self) -> Optional[float]:
        # fewer than three segments cannot show a trend
        if self.grid.size < 4:
            return None
        with np.errstate(over='ignore', invalid='ignore'):
            slopes = np.diff(np.log(self.values)) / np.diff(self.grid)
        tail = slopes[slopes.size // 2:]
        if not np.isfinite(tail[-1]):
            return math.inf
        if tail[-1] > 0 and tail[-1] >= tail[0] * (1 - 1e-9):
            return float(tail[-1])
        return None

    def value(self, x: float) -> float:
        return float(np.interp(x, self.grid, self.values))

    def log_sup(self, t: float) -> float:
        if self.growth_rate is not None and t <= self.growth_rate:
            return math.inf
        with np.errstate(over='ignore'):
            exponents = np.log(self.values) - t * self.grid
        best = float(np.max(exponents))
        return best if math.isfinite(best) else math.inf

    def tail_constants(self) -> Tuple[float, float]:
        return float(np.max(self.values)), 0.0

    def to_json(self) -> Dict:
        return {'kind': self.kind, 'grid': self.grid.tolist(), 'values': self.values.tolist()}


def approximation_from_json(data: Mapping) -> ApproximationFunction:
    """Build an approximation function from its JSON description."""
    kind = data.get('kind')
    try:
        if kind == 'constant':
            return ConstantQ(data['C'])
        if kind == 'power':
            return PowerLawQ(data['beta'], data['r'], data.get('x0', 0.0))
        if kind == 'tabulated':
            return TabulatedQ(data['grid'], data['values'])
    except KeyError as missing:
        raise InvalidInputError(f"ERROR: approximation function of kind '{kind}' is missing {missing}")
    raise InvalidInputError(
        f"ERROR: unknown approximation function kind '{kind}'\n"
        "Supported kinds: constant, power, tabulated"
    )


@dataclass(frozen=True)
class KappaSchedule:
    """
    Geometric schedule t_i = t * c * rho^i with weights 2^(-i-1).

    Admissible when 0 < c, 0 < rho < 1 and c / (1 - rho) <= 1, so that the
    sequence is nonincreasing with sum at most t. The default c = rho = 1/2
    is t_i = t 2^(-i-1).
    """

    c: float = 0.5
    rho: float = 0.5

    def __post_init__(self):
        if not 0 < self.rho < 1:
            raise ScheduleError(f"ERROR: schedule ratio rho must lie in (0, 1), got {self.rho}")
        if not 0 < self.c:
            raise ScheduleError(f"ERROR: schedule scale c must be positive, got {self.c}")
        if self.c / (1 - self.rho) > 1 + 1e-15:
            raise ScheduleError(
                f"ERROR: schedule (c={self.c}, rho={self.rho}) sums to {self.c / (1 - self.rho):.6g} t > t"
            )

    def time(self, t: float, i: int) -> float:
        return t * self.c * self.rho ** i

    def times(self, t: float, count: int) -> List[float]:
        return [self.time(t, i) for i in range(count)]


def q_of(Q: ApproximationFunction, t: float) -> float:
    """q(t) = t^-4 sup_x Q(x) e^(-t x)."""
    if not t > 0:
        raise InvalidInputError(f"ERROR: q(t) needs t > 0, got {t}")
    return _safe_exp(Q.log_sup(t) - 4 * math.log(t))


def _log_q(Q: ApproximationFunction, t: float) -> float:
    return Q.log_sup(t) - 4 * math.log(t)


def h_upper(Q: ApproximationFunction, t: float, schedule: Optional[KappaSchedule] = None,
            weight_cut: float = DEFAULT_WEIGHT_CUT) -> float:
    """
    Upper bound on h(t) from one schedule: prod_i q(t_i)^(2^(-i-1)).

    Factors are multiplied explicitly up to the first index I whose
    remaining exponent mass 2^(-I-1) is below `weight_cut` and beyond which
    every t_i <= 1; the rest of the product is bounded with
    q(s) <= A s^(-4-r) and summed in closed form.

    Args:
        Q: Approximation function
        t: Positive time
        schedule: Admissible schedule (default t_i = t 2^(-i-1))
        weight_cut: Remaining exponent mass at which the explicit product stops

    Returns:
        The bound, math.inf when some factor is infinite
    """
    if not t > 0:
        raise InvalidInputError(f"ERROR: h(t) needs t > 0, got {t}")
    if not 0 < weight_cut < 1:
        raise InvalidInputError(f"ERROR: weight_cut must lie in (0, 1), got {weight_cut}")
    schedule = schedule or KappaSchedule()

    log_h = 0.0
    i = 0
    while True:
        log_q = _log_q(Q, schedule.time(t, i))
        if log_q == math.inf:
            return math.inf
        log_h += 2.0 ** (-i - 1) * log_q
        if 2.0 ** (-i - 1) < weight_cut and schedule.time(t, i + 1) <= 1:
            break
        i += 1

    A, r = Q.tail_constants()
    mass = 2.0 ** (-i - 1)
    index_mass = (i + 2) / 2.0 ** (i + 1)
    log_h += mass * math.log(A) - (4 + r) * (mass * math.log(t * schedule.c) + index_mass * math.log(schedule.rho))
    logger.debug("h_upper(%s, t=%g): %d explicit factors", Q.kind, t, i + 1)
    return _safe_exp(log_h)


@dataclass(frozen=True)
class RefinedBound:
    """Best h(t) bound found over the schedule family."""

    value: float
    schedule: KappaSchedule
    default_value: float
    evaluations: int


def refined_h_upper(Q: ApproximationFunction, t: float, weight_cut: float = DEFAULT_WEIGHT_CUT,
                    max_rounds: int = 60, min_step: float = 1e-4) -> RefinedBound:
    """
    Coordinate descent over (c, rho) of the geometric schedule family.

    Every evaluated schedule gives a valid upper bound, so the minimum is
    returned; it never exceeds the default-schedule bound.
    """
    best_schedule = KappaSchedule()
    default_value = h_upper(Q, t, best_schedule, weight_cut)
    best_value = default_value
    evaluations = 1
    step = 0.125

    for _ in range(max_rounds):
        if step < min_step or not math.isfinite(best_value):
            break
        improved = False
        for d_c, d_rho in ((step, 0), (-step, 0), (0, step), (0, -step), (-step, step), (step, -step)):
            rho = best_schedule.rho + d_rho
            c = min(best_schedule.c + d_c, 1 - rho)
            if not (0 < rho < 1 and c > 0):
                continue
            candidate = KappaSchedule(c, rho)
            value = h_upper(Q, t, candidate, weight_cut)
            evaluations += 1
            if value < best_value:
                best_schedule, best_value, improved = candidate, value, True
        if not improved:
            step /= 2

    logger.debug("refined_h_upper: %g -> %g after %d evaluations", default_value, best_value, evaluations)
    return RefinedBound(best_value, best_schedule, default_value, evaluations)


def is_approximation_function(Q: ApproximationFunction, t_grid: Sequence[float]) -> bool:
    """True iff q and h_upper are finite at every grid point."""
    if len(t_grid) == 0:
        raise InvalidInputError("ERROR: approximation check needs a nonempty t grid")
    return all(math.isfinite(q_of(Q, t)) and math.isfinite(h_upper(Q, t)) for t in t_grid)


def approx_table(Q: ApproximationFunction, t_grid: Sequence[float],
                 weight_cut: float = DEFAULT_WEIGHT_CUT) -> List[Tuple[float, float, float]]:
    """(t, q(t), h_upper(t)) rows for CSV export."""
    return [(float(t), q_of(Q, t), h_upper(Q, t, weight_cut=weight_cut)) for t in t_grid]
