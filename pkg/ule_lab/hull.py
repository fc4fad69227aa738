"""
Frequency chains, supernatural numbers and the odometer model of the hull.

A procyclic hull is represented by a divisibility chain n_1 | n_2 | ... of
periods (a stored finite prefix plus an optional declared growth pattern) and
its elements by compatible residues r_k mod n_k. The translation T is +1.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Dict, Iterator, List, Mapping, Optional, Sequence, Tuple, Union

from sympy import factorint, isprime

from .errors import (
    InconclusiveAtDepthError,
    InvalidChainError,
    InvalidInputError,
)
from .lab_constants import MAX_ELEMENT_BITS

logger = logging.getLogger(__name__)

INFINITE = math.inf

Exponent = Union[int, float]


@dataclass(frozen=True)
class GrowthPattern:
    """
    Declared rule producing the elements of a chain beyond its stored prefix.

    Kinds:
        geometric: n_{k+1} = n_k * ratio
        power:     n_{k+1} = n_k ** exponent
        cycle:     n_{k+1} = n_k * p, p running round-robin over `primes`
    """

    kind: str
    ratio: int = 0
    exponent: int = 0
    primes: Tuple[int, ...] = ()

    @classmethod
    def parse(cls, text: str, elements: Sequence[int]) -> 'GrowthPattern':
        """
        Parse a pattern name against the stored elements it must describe.

        Args:
            text: 'powers', 'geometric', 'geometric:R', 'square', 'cube',
                  'power:M' or 'cycle:p,q,...'
            elements: Stored chain prefix

        Returns:
            The parsed pattern

        Raises:
            InvalidChainError: If the name is unknown or the stored prefix
                does not follow the pattern
        """
        name = text.strip().lower()
        head, _, arg = name.partition(':')

        if head in ('powers', 'geometric'):
            if arg:
                ratio = _parse_positive_int(arg, text)
            elif len(elements) >= 2:
                ratio = elements[1] // elements[0]
            else:
                ratio = elements[0]
            pattern = cls(kind='geometric', ratio=ratio)
        elif head in ('square', 'cube', 'power'):
            exponent = {'square': 2, 'cube': 3}.get(head)
            if exponent is None:
                exponent = _parse_positive_int(arg, text)
            pattern = cls(kind='power', exponent=exponent)
        elif head == 'cycle':
            primes = tuple(_parse_positive_int(p, text) for p in arg.split(',') if p.strip())
            if not primes or any(not isprime(p) for p in primes):
                raise InvalidChainError(f"ERROR: pattern '{text}' must list primes after 'cycle:'")
            pattern = cls(kind='cycle', primes=primes)
        else:
            raise InvalidChainError(
                f"ERROR: unknown growth pattern '{text}'\n"
                "Known patterns: powers, geometric[:R], square, cube, power:M, cycle:p,q,..."
            )

        pattern._check_prefix(elements, text)
        return pattern

    def _check_prefix(self, elements: Sequence[int], text: str):
        if self.kind == 'geometric' and self.ratio < 2:
            raise InvalidChainError(f"ERROR: pattern '{text}' needs a ratio of at least 2")
        if self.kind == 'power' and (self.exponent < 2 or elements[0] < 2):
            raise InvalidChainError(f"ERROR: pattern '{text}' needs exponent >= 2 and n_1 >= 2")
        if self.kind == 'cycle':
            # the stored prefix is free; the cycle only governs the continuation
            return
        for previous, current in zip(elements, elements[1:]):
            if current != self.next_element(previous, previous):
                raise InvalidChainError(
                    f"ERROR: stored step {previous} -> {current} does not follow pattern '{text}'"
                )

    def next_element(self, previous: int, before_previous: int) -> int:
        """
        Element following `previous`.

        Args:
            previous: Last known element
            before_previous: Element before it (decides the next prime of a cycle)
        """
        if self.kind == 'geometric':
            return previous * self.ratio
        if self.kind == 'power':
            return previous ** self.exponent
        last_step = previous // before_previous if before_previous else 0
        if last_step in self.primes:
            position = (self.primes.index(last_step) + 1) % len(self.primes)
        else:
            position = 0
        return previous * self.primes[position]

    def infinite_primes(self, elements: Sequence[int]) -> Tuple[int, ...]:
        """Primes whose exponent grows without bound along the pattern."""
        if self.kind == 'geometric':
            return tuple(sorted(factorint(self.ratio)))
        if self.kind == 'power':
            return tuple(sorted(factorint(elements[0])))
        return tuple(sorted(self.primes))


def _parse_positive_int(text: str, context: str) -> int:
    try:
        value = int(text.strip())
    except ValueError:
        raise InvalidChainError(f"ERROR: '{text}' in pattern '{context}' is not an integer")
    if value < 1:
        raise InvalidChainError(f"ERROR: '{text}' in pattern '{context}' must be positive")
    return value


@dataclass(frozen=True)
class FrequencyChain:
    """
    Divisibility chain n_1 | n_2 | ... stored as a finite prefix.

    Attributes:
        elements: Strictly increasing positive integers, each dividing the next
        pattern: Optional declared growth pattern for elements beyond the prefix
    """

    elements: Tuple[int, ...]
    pattern: Optional[str] = None
    growth: Optional[GrowthPattern] = field(default=None, init=False, repr=False, compare=False)

    def __post_init__(self):
        elements = tuple(self.elements)
        object.__setattr__(self, 'elements', elements)
        errors = []
        if not elements:
            errors.append("  - chain is empty")
        for value in elements:
            if isinstance(value, bool) or not isinstance(value, int) or value < 1:
                errors.append(f"  - element {value!r} is not a positive integer")
        if not errors:
            for previous, current in zip(elements, elements[1:]):
                if current <= previous:
                    errors.append(f"  - {previous} -> {current} is not strictly increasing")
                elif current % previous:
                    errors.append(f"  - {previous} does not divide {current}")
        if errors:
            raise InvalidChainError("ERROR: invalid frequency chain:\n" + '\n'.join(errors))
        if self.pattern is not None:
            object.__setattr__(self, 'growth', GrowthPattern.parse(self.pattern, elements))

    @property
    def depth(self) -> int:
        return len(self.elements)

    @property
    def is_declared_infinite(self) -> bool:
        return self.growth is not None

    def iter_elements(self) -> Iterator[int]:
        """Yield the stored elements, then the pattern continuation (if declared)."""
        yield from self.elements
        if self.growth is None:
            return
        before, previous = (self.elements[-2] if self.depth >= 2 else 1), self.elements[-1]
        while True:
            current = self.growth.next_element(previous, before)
            yield current
            before, previous = previous, current

    def extended(self, depth: int) -> 'FrequencyChain':
        """
        Chain with at least `depth` stored elements.

        Raises:
            InconclusiveAtDepthError: If more elements are needed than stored
                and no growth pattern is declared
            InvalidInputError: If a generated element exceeds MAX_ELEMENT_BITS
        """
        if depth <= self.depth:
            return self
        if self.growth is None:
            raise InconclusiveAtDepthError(
                f"ERROR: chain {list(self.elements)} has no declared growth pattern; "
                f"cannot extend from depth {self.depth} to {depth}",
                depth=self.depth,
            )
        extra = []
        for index, value in enumerate(self.iter_elements()):
            if index >= depth:
                break
            if index >= self.depth:
                if value.bit_length() > MAX_ELEMENT_BITS:
                    raise InvalidInputError(
                        f"ERROR: element {index + 1} of chain {list(self.elements)} (pattern '{self.pattern}') "
                        f"exceeds {MAX_ELEMENT_BITS} bits; request a smaller depth"
                    )
                extra.append(value)
        return FrequencyChain(self.elements + tuple(extra), self.pattern)

    def prefix(self, depth: int) -> 'FrequencyChain':
        """First `depth` elements, extending through the pattern if needed."""
        chain = self.extended(depth)
        if depth >= chain.depth:
            return chain
        return FrequencyChain(chain.elements[:depth], self.pattern)

    def to_json(self) -> Dict:
        return {'chain': list(self.elements), 'pattern': self.pattern}

    @classmethod
    def from_json(cls, data: Mapping) -> 'FrequencyChain':
        return cls(tuple(int(n) for n in data['chain']), data.get('pattern'))


@dataclass(frozen=True)
class SupernaturalNumber:
    """Formal product of primes with exponents in N or INFINITE."""

    exponents: Tuple[Tuple[int, Exponent], ...]

    def __post_init__(self):
        items = tuple(sorted((int(p), e) for p, e in dict(self.exponents).items()))
        object.__setattr__(self, 'exponents', items)
        for prime, exponent in items:
            if not isprime(prime):
                raise InvalidInputError(f"ERROR: supernatural key {prime} is not prime")
            if exponent != INFINITE and (not isinstance(exponent, int) or exponent < 1):
                raise InvalidInputError(
                    f"ERROR: exponent of {prime} must be a positive integer or INFINITE, got {exponent!r}"
                )

    @classmethod
    def from_mapping(cls, exponents: Mapping[int, Exponent]) -> 'SupernaturalNumber':
        return cls(tuple(exponents.items()))

    def as_dict(self) -> Dict[int, Exponent]:
        return dict(self.exponents)

    def exponent(self, prime: int) -> Exponent:
        return self.as_dict().get(prime, 0)

    def admits(self, n: int) -> bool:
        """True iff every prime power dividing n is allowed by the exponents."""
        return all(e <= self.exponent(p) for p, e in factorint(n).items())

    @property
    def is_finite(self) -> bool:
        return all(e != INFINITE for _, e in self.exponents)

    def to_json(self) -> Dict[str, Union[int, str]]:
        return {str(p): ('inf' if e == INFINITE else e) for p, e in self.exponents}

    def __str__(self) -> str:
        if not self.exponents:
            return '1'
        return ' * '.join(f"{p}^{'inf' if e == INFINITE else e}" for p, e in self.exponents)


@dataclass(frozen=True)
class GroupElement:
    """
    Element of the odometer: residues r_k mod n_k with r_{k+1} = r_k (mod n_k).
    """

    chain: FrequencyChain
    residues: Tuple[int, ...]

    def __post_init__(self):
        residues = tuple(self.residues)
        object.__setattr__(self, 'residues', residues)
        if len(residues) != self.chain.depth:
            raise InvalidChainError(
                f"ERROR: {len(residues)} residues given for a chain of depth {self.chain.depth}"
            )
        errors = []
        for residue, modulus in zip(residues, self.chain.elements):
            if not 0 <= residue < modulus:
                errors.append(f"  - residue {residue} outside [0, {modulus})")
        for k in range(len(residues) - 1):
            if residues[k + 1] % self.chain.elements[k] != residues[k]:
                errors.append(
                    f"  - r_{k + 2} = {residues[k + 1]} is not congruent to "
                    f"r_{k + 1} = {residues[k]} mod {self.chain.elements[k]}"
                )
        if errors:
            raise InvalidChainError("ERROR: incompatible group element:\n" + '\n'.join(errors))

    @classmethod
    def identity(cls, chain: FrequencyChain) -> 'GroupElement':
        return cls(chain, (0,) * chain.depth)

    @classmethod
    def from_integer(cls, chain: FrequencyChain, t: int) -> 'GroupElement':
        """T^t(e) at the stored depth."""
        return cls(chain, tuple(t % n for n in chain.elements))

    def truncated(self, depth: int) -> 'GroupElement':
        return GroupElement(FrequencyChain(self.chain.elements[:depth], None), self.residues[:depth])

    def to_json(self) -> Dict:
        data = self.chain.to_json()
        data['residues'] = list(self.residues)
        return data

    @classmethod
    def from_json(cls, data: Mapping) -> 'GroupElement':
        return cls(FrequencyChain.from_json(data), tuple(int(r) for r in data['residues']))


@dataclass(frozen=True)
class IsomorphismVerdict:
    """
    Outcome of the hull classification test.

    Attributes:
        isomorphic: The verdict
        depth: Depth at which the certificate was produced
        decided_by: 'supernatural' or 'divisibility'
        witnesses: (side, n, m) with n | m, side 'a' for S -> S2 and 'b' for S2 -> S
        failure: (side, n) for the first element with no possible witness
    """

    isomorphic: bool
    depth: int
    decided_by: str
    witnesses: Tuple[Tuple[str, int, int], ...] = ()
    failure: Optional[Tuple[str, int]] = None

    def __bool__(self) -> bool:
        return self.isomorphic

    def to_json(self) -> Dict:
        return {
            'isomorphic': self.isomorphic,
            'depth': self.depth,
            'decided_by': self.decided_by,
            'witnesses': [list(w) for w in self.witnesses],
            'failure': list(self.failure) if self.failure else None,
        }


@dataclass(frozen=True)
class ConditionAVerdict:
    """Condition A verdict on a stored prefix."""

    holds: bool
    m_min: Optional[int]
    depth: int

    def to_json(self) -> Dict:
        return {'holds': self.holds, 'm_min': self.m_min, 'depth': self.depth}


def maximalize(chain: FrequencyChain, depth: int) -> FrequencyChain:
    """
    Refine a chain into the canonical chain with prime consecutive ratios.

    Each ratio is split into its prime factors in ascending order; the tail is
    extended to `depth` elements by cycling through the primes of infinite
    exponent in ascending order.

    Args:
        chain: Input chain
        depth: Requested minimum depth of the output

    Returns:
        A prime-step chain containing every input element
    """
    if depth < 1:
        raise InvalidInputError("ERROR: maximalize needs depth >= 1")
    if depth < chain.depth:
        raise InvalidInputError(
            f"ERROR: maximalize depth {depth} is below the input depth {chain.depth}"
        )

    refined: List[int] = []
    previous = 1
    for n in chain.elements:
        if n == previous:
            refined.append(n)
            continue
        for prime, exponent in sorted(factorint(n // previous).items()):
            for _ in range(exponent):
                previous *= prime
                refined.append(previous)

    pattern = None
    if chain.is_declared_infinite:
        cycle = chain.growth.infinite_primes(chain.elements)
        pattern = 'cycle:' + ','.join(str(p) for p in cycle)
    result = FrequencyChain(tuple(refined), pattern)
    if result.depth < depth:
        if pattern is None:
            logger.debug("Chain %s is finite; maximal chain stops at depth %d", refined, result.depth)
            return result
        result = result.extended(depth)
    return result


def supernatural_of(chain: FrequencyChain) -> SupernaturalNumber:
    """
    Supernatural number of a chain: sup of p-adic valuations over its elements.

    Primes that grow without bound under the declared pattern get INFINITE.
    """
    exponents: Dict[int, Exponent] = {int(p): int(e) for p, e in factorint(chain.elements[-1]).items()}
    if chain.is_declared_infinite:
        for prime in chain.growth.infinite_primes(chain.elements):
            exponents[prime] = INFINITE
    return SupernaturalNumber.from_mapping(exponents)


def _find_witness(n: int, other: FrequencyChain, other_number: SupernaturalNumber,
                  depth: int) -> Optional[int]:
    """First element of `other` divisible by n, or None if none can exist."""
    if other.is_declared_infinite:
        if not other_number.admits(n):
            return None
        for m in other.iter_elements():
            if m % n == 0:
                return m
    for m in other.elements[:depth]:
        if m % n == 0:
            return m
    return None


def _first_failure(side: str, chain: FrequencyChain, number: SupernaturalNumber,
                   other_number: SupernaturalNumber) -> Optional[Tuple[str, int]]:
    """First element of a declared chain not admitted by the other supernatural number."""
    for prime, exponent in number.exponents:
        if exponent > other_number.exponent(prime):
            for n in chain.iter_elements():
                if not other_number.admits(n):
                    return side, n
    return None


def hulls_isomorphic(S: FrequencyChain, S2: FrequencyChain, depth: int) -> IsomorphismVerdict:
    """
    Decide whether two chains define isomorphic hulls.

    Declared chains are compared through their supernatural numbers. A chain
    without a declared pattern is a complete finite chain; two such chains are
    compared by mutual divisibility, which is conclusive once `depth` covers
    both of them.

    Args:
        S: First chain
        S2: Second chain
        depth: Number of leading elements covered by the certificate

    Returns:
        IsomorphismVerdict with witnesses or the first failing element

    Raises:
        InconclusiveAtDepthError: If undeclared truncations at `depth` neither
            confirm nor refute
    """
    if depth < 1:
        raise InvalidInputError("ERROR: hulls_isomorphic needs depth >= 1")

    number_a, number_b = supernatural_of(S), supernatural_of(S2)

    if S.is_declared_infinite or S2.is_declared_infinite:
        isomorphic = S.is_declared_infinite and S2.is_declared_infinite and number_a == number_b
        witnesses = []
        failure = None
        for side, chain, other, other_number in (('a', S, S2, number_b), ('b', S2, S, number_a)):
            for n in chain.prefix(min(depth, chain.depth) if not chain.is_declared_infinite else depth).elements:
                m = _find_witness(n, other, other_number, other.depth)
                if m is None:
                    failure = failure or (side, n)
                    break
                witnesses.append((side, n, m))
        if not isomorphic and failure is None:
            failure = (_first_failure('a', S, number_a, number_b)
                       or _first_failure('b', S2, number_b, number_a))
            if failure is None:
                failure = ('a', S.elements[-1]) if not S.is_declared_infinite else ('b', S2.elements[-1])
        logger.debug("Supernatural comparison %s vs %s -> %s", number_a, number_b, isomorphic)
        return IsomorphismVerdict(isomorphic, depth, 'supernatural', tuple(witnesses), failure)

    witnesses = []
    covers_both = depth >= S.depth and depth >= S2.depth
    for side, chain, other in (('a', S, S2), ('b', S2, S)):
        for n in chain.elements[:depth]:
            m = next((m for m in other.elements[:depth] if m % n == 0), None)
            if m is None:
                if depth >= other.depth:
                    return IsomorphismVerdict(False, depth, 'divisibility', tuple(witnesses), (side, n))
                raise InconclusiveAtDepthError(
                    f"ERROR: no witness for {n} among the first {depth} elements of the other chain; "
                    "later elements are unchecked",
                    depth=depth,
                )
            witnesses.append((side, n, m))
    if not covers_both:
        raise InconclusiveAtDepthError(
            f"ERROR: truncations at depth {depth} agree but the chains have unchecked elements",
            depth=depth,
        )
    return IsomorphismVerdict(True, depth, 'divisibility', tuple(witnesses))


def _minimal_exponent(base: int, target: int) -> int:
    """Smallest m >= 1 with base ** m >= target."""
    m = max(1, math.ceil(math.log(target) / math.log(base)) - 1)
    while base ** m < target:
        m += 1
    while m > 1 and base ** (m - 1) >= target:
        m -= 1
    return m


def condition_A(chain: FrequencyChain, m_bound: Optional[int] = None) -> ConditionAVerdict:
    """
    Condition A on the stored prefix: smallest m >= 2 with n_{k+1} <= n_k^m.

    Args:
        chain: Chain with at least two elements and n_1 >= 2
        m_bound: If given, the condition holds only when m_min <= m_bound

    Returns:
        ConditionAVerdict reporting the depth of the verdict
    """
    if chain.depth < 2:
        raise InvalidInputError("ERROR: condition A needs a chain with at least two elements")
    if chain.elements[0] == 1:
        raise InvalidChainError("ERROR: condition A is undefined for n_1 = 1 (log n_1 = 0)")

    m_min = 2
    for previous, current in zip(chain.elements, chain.elements[1:]):
        m_min = max(m_min, _minimal_exponent(previous, current))
    holds = m_bound is None or m_min <= m_bound
    return ConditionAVerdict(holds=holds, m_min=m_min, depth=chain.depth)


def odometer_add(g: GroupElement, k: int) -> GroupElement:
    """T^k applied to g: every residue moves by k modulo its period."""
    return GroupElement(g.chain, tuple((r + k) % n for r, n in zip(g.residues, g.chain.elements)))
