"""
Limit-periodic sequences as sums of periodic layers.

Contains the distal generator (exact rational partial sums over a sparse
divisibility chain), the dyadic example with the 1/(16|k|) separation, and
evaluation of the sampled potential at arbitrary hull elements.
"""

import logging
import threading
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Dict, Iterator, List, Optional, Sequence, Tuple, Union

from .approx import PowerLawQ
from .errors import (
    ChainMismatchError,
    GeneratorConstructionError,
    InconclusiveAtDepthError,
    InvalidInputError,
)
from .hull import FrequencyChain, GroupElement, condition_A
from .lab_constants import DEFAULT_K_LAYERS, DEFAULT_M, POESCHEL_SEPARATION

logger = logging.getLogger(__name__)

Number = Union[Fraction, float]

POTENTIAL_CSV_HEADER = ('n', 'value_num', 'value_den', 'value_float')


def a_v(i: int, n_v: int) -> int:
    """Residue of i modulo n_v, normalized to [0, n_v)."""
    if n_v < 1:
        raise InvalidInputError(f"ERROR: modulus must be positive, got {n_v}")
    return i % n_v


class PeriodicLayer:
    """
    An n-periodic function on the integers.

    Subclasses implement `value`; the averaging and norm helpers fall back to
    scanning one period.
    """

    def __init__(self, period: int):
        if period < 1:
            raise InvalidInputError(f"ERROR: layer period must be positive, got {period}")
        self.period = period

    def value(self, i: int) -> Number:
        raise NotImplementedError

    def table(self) -> List[Number]:
        return [self.value(i) for i in range(self.period)]

    def class_mean(self, residue: int, modulus: int) -> Number:
        """Mean of the layer over the residue class `residue` mod `modulus`."""
        if self.period % modulus:
            raise InvalidInputError(
                f"ERROR: modulus {modulus} does not divide the layer period {self.period}"
            )
        count = self.period // modulus
        return sum(self.value(residue + modulus * j) for j in range(count)) / count

    def sup_norm(self) -> float:
        return float(max(abs(v) for v in self.table()))


class TabulatedLayer(PeriodicLayer):
    """Layer given by an explicit table of one period."""

    def __init__(self, values: Sequence[Number]):
        super().__init__(len(values))
        self.values = list(values)

    def value(self, i: int) -> Number:
        return self.values[i % self.period]

    def table(self) -> List[Number]:
        return list(self.values)


class ResidueLayer(PeriodicLayer):
    """Layer i -> a_v(i) * weight of the distal generator."""

    def __init__(self, period: int, weight: Number):
        super().__init__(period)
        self.weight = weight

    def value(self, i: int) -> Number:
        return (i % self.period) * self.weight

    def class_mean(self, residue: int, modulus: int) -> Number:
        # arithmetic progression residue, residue + modulus, ..., below period
        if self.period % modulus:
            raise InvalidInputError(
                f"ERROR: modulus {modulus} does not divide the layer period {self.period}"
            )
        residue %= modulus
        if isinstance(self.weight, Fraction):
            return (residue + Fraction(self.period - modulus, 2)) * self.weight
        return (residue + (self.period - modulus) / 2) * self.weight

    def sup_norm(self) -> float:
        return float((self.period - 1) * self.weight)


class IndicatorLayer(PeriodicLayer):
    """Layer alpha_v(i) * 2^-v of the dyadic example."""

    def __init__(self, v: int):
        super().__init__(2 ** v)
        self.v = v

    def value(self, i: int) -> Fraction:
        return Fraction(poeschel_alpha(self.v, i), self.period)

    def sup_norm(self) -> float:
        return 1.0 / self.period


@dataclass
class LimitPeriodicSeries:
    """
    Ordered periodic layers whose periods form a divisibility chain.

    Attributes:
        layers: p_1, p_2, ... with p_j of period n_j
        tail_bound_fn: k -> bound on the sup-norm of the layers beyond k
        envelope: v -> summable bound on the sup-norm of layer v (1-based)
    """

    layers: List[PeriodicLayer]
    tail_bound_fn: Optional[Callable[[int], Number]] = None
    envelope: Optional[Callable[[int], Number]] = None
    chain: FrequencyChain = field(init=False)

    def __post_init__(self):
        if not self.layers:
            raise InvalidInputError("ERROR: a limit-periodic series needs at least one layer")
        self.chain = FrequencyChain(tuple(layer.period for layer in self.layers))
        if self.envelope is not None:
            violations = [
                f"  - layer {v}: sup-norm {layer.sup_norm()} above envelope {float(self.envelope(v))}"
                for v, layer in enumerate(self.layers, start=1)
                if layer.sup_norm() > float(self.envelope(v))
            ]
            if violations:
                raise InvalidInputError("ERROR: layers exceed the declared envelope:\n" + '\n'.join(violations))

    @property
    def depth(self) -> int:
        return len(self.layers)

    def partial_sum(self, i: int, k_layers: int) -> Number:
        """d^(k)_i, the sum of the first k layers at index i."""
        if not 0 <= k_layers <= self.depth:
            raise InvalidInputError(f"ERROR: k_layers = {k_layers} outside [0, {self.depth}]")
        return sum((layer.value(i) for layer in self.layers[:k_layers]), Fraction(0))

    def tail_bound(self, k: int) -> Number:
        if self.tail_bound_fn is None:
            raise InvalidInputError("ERROR: this series declares no tail bound")
        return self.tail_bound_fn(k)


class DistalGenerator:
    """
    Distal sequence d_i = sum_v a_v(i) / (n_{v-1}^2 n_v) with n_0 = 1.

    The periods satisfy n_v^3 <= n_{v+1} <= n_v^(3m). In strict mode the
    source chain must satisfy this itself; otherwise periods are extracted
    greedily (smallest source element in [n^3, n^(3m)]). Periods beyond the
    stored prefix come from the source's growth pattern on demand.

    Args:
        source: Chain the periods are taken from
        m: Growth exponent, at least 2
        exact: Rational (True) or floating (False) evaluation
        strict: Require the source to be the period chain itself
    """

    def __init__(self, source: FrequencyChain, m: int = DEFAULT_M, exact: bool = True, strict: bool = True):
        if isinstance(m, bool) or not isinstance(m, int) or m < 2:
            raise GeneratorConstructionError(f"ERROR: growth exponent m must be an integer >= 2, got {m!r}")
        self.source = source
        self.m = m
        self.exact = exact
        self.strict = strict
        self._periods: List[int] = []
        self._source_iter: Iterator[int] = source.iter_elements()
        self._lock = threading.Lock()

        if not exact:
            logger.warning("Floating-point distal generator: the distality guarantee no longer holds")

        first = self._next_from_source(lambda n: strict or n > 1)
        if first is None or first <= 1:
            raise GeneratorConstructionError(
                f"ERROR: distal generator needs n_1 > 1; source starts with {source.elements[0]}"
            )
        self._periods.append(first)
        # validate (or extract) the whole stored prefix up front
        self._extend_to(source.depth if strict else 1)

    @classmethod
    def from_frequency_set(cls, chain: FrequencyChain, m: Optional[int] = None, depth: int = DEFAULT_K_LAYERS,
                           exact: bool = True) -> 'DistalGenerator':
        """
        Extract a distal generator from any chain satisfying condition A.

        Args:
            chain: Frequency chain of a limit-periodic potential
            m: Growth exponent (defaults to the chain's condition-A m_min)
            depth: Number of periods to extract eagerly
            exact: Rational or floating evaluation
        """
        if m is None:
            m = condition_A(chain).m_min
        generator = cls(chain, m=m, exact=exact, strict=False)
        generator._extend_to(depth)
        logger.info("Extracted periods %s from chain %s with m = %d",
                    generator.periods(depth), list(chain.elements), m)
        return generator

    def _next_from_source(self, accept: Callable[[int], bool]) -> Optional[int]:
        for n in self._source_iter:
            if accept(n):
                return n
        return None

    def _extend_to(self, k: int):
        with self._lock:
            while len(self._periods) < k:
                previous = self._periods[-1]
                lower, upper = previous ** 3, previous ** (3 * self.m)
                if self.strict:
                    candidate = self._next_from_source(lambda n: True)
                else:
                    candidate = self._next_from_source(lambda n: n >= lower)
                if candidate is None:
                    raise InconclusiveAtDepthError(
                        f"ERROR: source chain exhausted after {len(self._periods)} periods "
                        f"(requested {k}); declare a growth pattern to go deeper",
                        depth=len(self._periods),
                    )
                if not lower <= candidate <= upper:
                    raise GeneratorConstructionError(
                        f"ERROR: period {candidate} after {previous} violates "
                        f"n^3 <= n_next <= n^{3 * self.m}"
                    )
                self._periods.append(candidate)

    @property
    def guarantee_degraded(self) -> bool:
        return not self.exact

    def periods(self, k: int) -> Tuple[int, ...]:
        """n_1, ..., n_k."""
        self._extend_to(k)
        return tuple(self._periods[:k])

    def period(self, v: int) -> int:
        """n_v with n_0 = 1."""
        if v == 0:
            return 1
        return self.periods(v)[-1]

    @property
    def chain(self) -> FrequencyChain:
        """Period chain at the depth currently materialized."""
        return FrequencyChain(tuple(self._periods))

    def weight(self, v: int) -> Number:
        denominator = self.period(v - 1) ** 2 * self.period(v)
        return Fraction(1, denominator) if self.exact else 1.0 / denominator

    def layer(self, v: int) -> ResidueLayer:
        return ResidueLayer(self.period(v), self.weight(v))

    def series(self, k_layers: int) -> LimitPeriodicSeries:
        """The first k layers as a LimitPeriodicSeries with tail bound and envelope."""
        return LimitPeriodicSeries(
            [self.layer(v) for v in range(1, k_layers + 1)],
            tail_bound_fn=lambda k: tail_bound(self, k),
            envelope=lambda v: Fraction(1, self.period(v - 1) ** 2),
        )


def distal_value(gen: DistalGenerator, i: int, k_layers: int) -> Number:
    """
    Partial sum d^(k)_i = sum_{v=1..k} a_v(i) / (n_{v-1}^2 n_v).

    Returns:
        Reduced Fraction in exact mode, float otherwise
    """
    if k_layers < 0:
        raise InvalidInputError(f"ERROR: k_layers must be non-negative, got {k_layers}")
    total = Fraction(0) if gen.exact else 0.0
    for v in range(1, k_layers + 1):
        total += a_v(i, gen.period(v)) * gen.weight(v)
    return total


def tail_bound(gen: DistalGenerator, k: int) -> Number:
    """Closed-form bound n_k^-2 / (1 - n_k^-4) on |d_i - d^(k)_i|."""
    if k < 1:
        raise InvalidInputError(f"ERROR: tail bound needs k >= 1, got {k}")
    n_k = gen.period(k)
    bound = Fraction(n_k ** 2, n_k ** 4 - 1)
    return bound if gen.exact else float(bound)


def distality_floor(gen: DistalGenerator, k_dist: int) -> Fraction:
    """Q(k)^-1: 2 / (3 n_1^(3m+1)) for k < n_1, else 2 / (3 k^(3m+1))."""
    if k_dist < 1:
        raise InvalidInputError(f"ERROR: separation must be positive, got {k_dist}")
    base = max(k_dist, gen.period(1))
    return Fraction(2, 3 * base ** (3 * gen.m + 1))


def distal_approximation_function(gen: DistalGenerator) -> PowerLawQ:
    """Approximation function Q(x) = 3/2 max(n_1, x)^(3m+1) of the distal sequence."""
    return PowerLawQ(beta=1.5, r=3 * gen.m + 1, x0=gen.period(1))


@dataclass
class SeparationReport:
    """
    Result of an exact separation scan.

    Attributes:
        passed: True when every worst margin is non-negative
        depth: Number of layers used
        slack: Twice the truncation tail subtracted from every distance
        margins: |k| -> worst margin min_i |x_i - x_{i+k}| - slack - floor(|k|)
        violation: First (i, k) with a negative margin
    """

    passed: bool
    depth: int
    slack: Fraction
    margins: Dict[int, Fraction]
    violation: Optional[Tuple[int, int]] = None

    def to_json(self) -> Dict:
        return {
            'passed': self.passed,
            'depth': self.depth,
            'slack': float(self.slack),
            'margins': {str(k): float(margin) for k, margin in sorted(self.margins.items())},
            'violation': list(self.violation) if self.violation else None,
        }


def scan_separation(numerators: Sequence[int], denominator: int, start: int, window: Tuple[int, int],
                    max_separation: int, floor: Callable[[int], Fraction], slack: Fraction) -> SeparationReport:
    """
    Check min_i |x_i - x_{i+k}| - slack >= floor(|k|) for 0 < |k| <= K.

    Values are x_i = numerators[i - start] / denominator and must cover
    [window[0] - K, window[1] + K).

    Args:
        numerators: Integer numerators over a common denominator
        denominator: Common positive denominator
        start: Index of numerators[0]
        window: Half-open range of base indices i
        max_separation: K
        floor: |k| -> required separation
        slack: Amount subtracted from every observed distance
    """
    lo, hi = window
    if max_separation < 1:
        raise InvalidInputError("ERROR: separation scan needs K >= 1 (k = 0 is excluded)")
    if lo - max_separation < start or hi + max_separation > start + len(numerators):
        raise InvalidInputError("ERROR: numerators do not cover the window extended by K")

    margins: Dict[int, Fraction] = {}
    violation = None
    for k in range(1, max_separation + 1):
        required = floor(k)
        worst = None
        worst_at = None
        for sign in (1, -1):
            step = sign * k
            for i in range(lo, hi):
                gap = abs(numerators[i - start] - numerators[i + step - start])
                if worst is None or gap < worst:
                    worst, worst_at = gap, (i, step)
        margin = Fraction(worst, denominator) - slack - required
        margins[k] = margin
        if margin < 0 and violation is None:
            violation = worst_at
    return SeparationReport(violation is None, 0, slack, margins, violation)


def verify_distality(gen: DistalGenerator, window: Tuple[int, int], K: int) -> SeparationReport:
    """
    Exact distality check of d over a window for all separations 0 < |k| <= K.

    The depth L is the smallest with 2 tail_bound(L) < distality_floor(K) / 10;
    every distance of the truncated sequence must exceed the floor by 2 tail_bound(L).

    Raises:
        InvalidInputError: In floating mode
    """
    if not gen.exact:
        raise InvalidInputError("ERROR: distality verification requires an exact generator")
    target = distality_floor(gen, K) / 10
    depth = 1
    while 2 * tail_bound(gen, depth) >= target:
        depth += 1
    periods = gen.periods(depth)
    denominator = (periods[-2] if depth >= 2 else 1) ** 2 * periods[-1]
    factors = [denominator // (gen.period(v - 1) ** 2 * gen.period(v)) for v in range(1, depth + 1)]

    lo, hi = window
    start = lo - K
    numerators = [
        sum((i % n) * f for n, f in zip(periods, factors))
        for i in range(start, hi + K)
    ]
    logger.debug("Distality scan over [%d, %d) with K = %d at depth %d", lo, hi, K, depth)
    report = scan_separation(numerators, denominator, start, window, K,
                             lambda k: distality_floor(gen, k), 2 * tail_bound(gen, depth))
    report.depth = depth
    if not report.passed:
        logger.error("Distality violated at (i, k) = %s", report.violation)
    return report


def poeschel_alpha(v: int, i: int) -> int:
    """Indicator of A_v: lower half of the residues mod 2^v for even v, upper half for odd v."""
    if v < 1:
        raise InvalidInputError(f"ERROR: layer index must be >= 1, got {v}")
    residue = i % (2 ** v)
    lower = residue < 2 ** (v - 1)
    return int(lower) if v % 2 == 0 else int(not lower)


def poeschel_value(i: int, depth: int) -> Fraction:
    """sum_{v=1..depth} alpha_v(i) 2^-v, exact."""
    if depth < 1:
        raise InvalidInputError(f"ERROR: depth must be >= 1, got {depth}")
    return sum((Fraction(poeschel_alpha(v, i), 2 ** v) for v in range(1, depth + 1)), Fraction(0))


def poeschel_tail(depth: int) -> Fraction:
    return Fraction(1, 2 ** depth)


def poeschel_series(depth: int) -> LimitPeriodicSeries:
    """The dyadic example as indicator layers on the chain 2, 4, 8, ..."""
    return LimitPeriodicSeries(
        [IndicatorLayer(v) for v in range(1, depth + 1)],
        tail_bound_fn=poeschel_tail,
        envelope=lambda v: Fraction(1, 2 ** v),
    )


def poeschel_separation_floor(k: int) -> Fraction:
    return Fraction(1, POESCHEL_SEPARATION * abs(k))


def check_poeschel_separation(window: Tuple[int, int], K: int, depth: Optional[int] = None) -> SeparationReport:
    """
    Exact check of |d_i - d_{i+k}| >= 1/(16|k|) for the dyadic example.

    The depth defaults to the smallest with 2 * 2^-depth < floor(K) / 10.
    """
    if depth is None:
        target = poeschel_separation_floor(K) / 10
        depth = 1
        while 2 * poeschel_tail(depth) >= target:
            depth += 1
    lo, hi = window
    start = lo - K
    denominator = 2 ** depth
    numerators = [
        sum(poeschel_alpha(v, i) * 2 ** (depth - v) for v in range(1, depth + 1))
        for i in range(start, hi + K)
    ]
    report = scan_separation(numerators, denominator, start, window, K,
                             poeschel_separation_floor, 2 * poeschel_tail(depth))
    report.depth = depth
    return report


def orbit_max_gap(values: Sequence[Number], lower: float = 0.0, upper: float = 1.0) -> float:
    """Largest gap left in [lower, upper] by the sampled values (density statistic)."""
    points = sorted(float(v) for v in values if lower <= float(v) <= upper)
    points = [lower] + points + [upper]
    return max(b - a for a, b in zip(points, points[1:]))


def evaluate_at(series: LimitPeriodicSeries, g: GroupElement, n: int, k_layers: int) -> Number:
    """
    V_omega(n) truncated to k layers: sum_j p_j((n + r_j) mod n_j).

    Raises:
        ChainMismatchError: If g's chain disagrees with the series' periods
    """
    if not 0 <= k_layers <= series.depth:
        raise InvalidInputError(f"ERROR: k_layers = {k_layers} outside [0, {series.depth}]")
    periods = series.chain.elements[:k_layers]
    if g.chain.elements[:k_layers] != periods:
        raise ChainMismatchError(
            f"ERROR: group element chain {list(g.chain.elements[:k_layers])} "
            f"does not match series periods {list(periods)}"
        )
    return sum(
        (layer.value((n + r) % layer.period) for layer, r in zip(series.layers[:k_layers], g.residues)),
        Fraction(0),
    )


def potential_window(series: LimitPeriodicSeries, g: GroupElement, offset: int, size: int,
                     k_layers: int) -> List[Tuple[int, Number]]:
    """(n, V_omega(n)) for n in [offset, offset + size)."""
    return [(n, evaluate_at(series, g, n, k_layers)) for n in range(offset, offset + size)]


def potential_rows(window: Sequence[Tuple[int, Number]]) -> List[Tuple]:
    """CSV rows n, numerator, denominator, float for a potential window."""
    rows = []
    for n, value in window:
        if isinstance(value, Fraction):
            rows.append((n, value.numerator, value.denominator, float(value)))
        else:
            rows.append((n, '', '', float(value)))
    return rows


def haar_average(series: LimitPeriodicSeries, k: int) -> TabulatedLayer:
    """
    Finite-level Haar projection onto n_k-periodic functions.

    Layers j <= k are kept; deeper layers are replaced by their class means mod n_k.
    """
    if not 1 <= k <= series.depth:
        raise InvalidInputError(f"ERROR: level k = {k} outside [1, {series.depth}]")
    n_k = series.layers[k - 1].period
    values = []
    for i in range(n_k):
        total = sum((layer.value(i) for layer in series.layers[:k]), Fraction(0))
        total += sum((layer.class_mean(i, n_k) for layer in series.layers[k:]), Fraction(0))
        values.append(total)
    return TabulatedLayer(values)


def sup_distance(series: LimitPeriodicSeries, k: int, window: Tuple[int, int]) -> Number:
    """max over the window of |d^(L)_i - d^(k)_i| with L the full series depth."""
    return max(abs(series.partial_sum(i, series.depth) - series.partial_sum(i, k)) for i in range(*window))
