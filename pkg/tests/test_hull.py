#!/usr/bin/env python3
"""
Tests for frequency chains, supernatural numbers and the odometer.
"""

import unittest

from ule_lab.errors import InconclusiveAtDepthError, InvalidChainError, InvalidInputError
from ule_lab.hull import (
    INFINITE,
    FrequencyChain,
    GroupElement,
    SupernaturalNumber,
    condition_A,
    hulls_isomorphic,
    maximalize,
    odometer_add,
    supernatural_of,
)
from sympy import isprime


class TestFrequencyChain(unittest.TestCase):
    """Test cases for chain validation and pattern extension."""

    def test_rejects_non_dividing_elements(self):
        """Test that 4 -> 6 is rejected because 4 does not divide 6."""
        with self.assertRaises(InvalidChainError) as context:
            FrequencyChain((2, 4, 6))
        self.assertIn('4 does not divide 6', str(context.exception))

    def test_rejects_non_increasing_elements(self):
        """Test that repeated elements are rejected."""
        with self.assertRaises(InvalidChainError):
            FrequencyChain((2, 2, 4))

    def test_invalid_chain_is_a_value_error(self):
        """Test that chain errors keep the ValueError contract."""
        with self.assertRaises(ValueError):
            FrequencyChain(())

    def test_cube_pattern_extension(self):
        """Test that the cube pattern continues 2, 8, 512 with 512^3."""
        chain = FrequencyChain((2, 8, 512), 'cube').extended(4)
        self.assertEqual(chain.elements, (2, 8, 512, 512 ** 3))

    def test_powers_pattern_infers_ratio(self):
        """Test that 'powers' reads the ratio from the stored prefix."""
        chain = FrequencyChain((4, 16), 'powers').extended(4)
        self.assertEqual(chain.elements, (4, 16, 64, 256))

    def test_pattern_must_match_prefix(self):
        """Test that a prefix not following its declared pattern is rejected."""
        with self.assertRaises(InvalidChainError):
            FrequencyChain((2, 8, 64), 'cube')

    def test_extending_undeclared_chain_is_inconclusive(self):
        """Test that an undeclared chain cannot be extended past its prefix."""
        with self.assertRaises(InconclusiveAtDepthError) as context:
            FrequencyChain((2, 4)).extended(3)
        self.assertEqual(context.exception.depth, 2)

    def test_json_round_trip_keeps_pattern(self):
        """Test the fixed JSON field names for chains."""
        chain = FrequencyChain((2, 8, 512), 'cube')
        data = chain.to_json()
        self.assertEqual(data, {'chain': [2, 8, 512], 'pattern': 'cube'})
        self.assertEqual(FrequencyChain.from_json(data), chain)


class TestMaximalize(unittest.TestCase):
    """Test cases for the canonical prime-step chain."""

    def test_splits_ratio_in_ascending_primes(self):
        """Test that {6, 36} becomes {2, 6, 12, 36}."""
        self.assertEqual(maximalize(FrequencyChain((6, 36)), 2).elements, (2, 6, 12, 36))

    def test_prime_step_chain_unchanged(self):
        """Test that {2, 4, 8} is already maximal."""
        self.assertEqual(maximalize(FrequencyChain((2, 4, 8)), 3).elements, (2, 4, 8))

    def test_single_prime_power(self):
        """Test that {8} is refined to {2, 4, 8}."""
        self.assertEqual(maximalize(FrequencyChain((8,)), 1).elements, (2, 4, 8))

    def test_rejects_zero_depth(self):
        """Test that depth 0 is rejected."""
        with self.assertRaises(InvalidInputError):
            maximalize(FrequencyChain((2, 4)), 0)

    def test_declared_chain_extended_round_robin(self):
        """Test the ascending round-robin tail over infinite primes."""
        result = maximalize(FrequencyChain((6, 36), 'powers'), 6)
        self.assertEqual(result.elements, (2, 6, 12, 36, 72, 216))
        self.assertEqual(result.pattern, 'cycle:2,3')

    def test_output_properties(self):
        """Test prime ratios, input containment and preserved supernatural number."""
        for chain in (FrequencyChain((2, 8, 512), 'cube'),
                      FrequencyChain((6, 12, 24), 'powers'),
                      FrequencyChain((10, 100, 1000))):
            result = maximalize(chain, 12)
            for previous, current in zip(result.elements, result.elements[1:]):
                self.assertTrue(isprime(current // previous))
            self.assertTrue(set(chain.elements) <= set(result.elements))
            self.assertEqual(supernatural_of(result), supernatural_of(chain))


class TestSupernaturalNumber(unittest.TestCase):
    """Test cases for supernatural numbers."""

    def test_declared_powers_of_two(self):
        """Test that a declared 2-power chain has exponent INFINITE at 2."""
        number = supernatural_of(FrequencyChain((2, 4, 8), 'powers'))
        self.assertEqual(number.as_dict(), {2: INFINITE})

    def test_finite_valuations(self):
        """Test valuations of undeclared chains."""
        self.assertEqual(supernatural_of(FrequencyChain((6, 36))).as_dict(), {2: 2, 3: 2})
        self.assertEqual(supernatural_of(FrequencyChain((2, 8, 512))).as_dict(), {2: 9})

    def test_finite_cofactor_kept(self):
        """Test that {3 * 2^k} keeps a finite exponent at 3."""
        number = supernatural_of(FrequencyChain((6, 12, 24), 'powers'))
        self.assertEqual(number.as_dict(), {2: INFINITE, 3: 1})

    def test_rejects_non_prime_key(self):
        """Test that composite keys are rejected."""
        with self.assertRaises(InvalidInputError):
            SupernaturalNumber.from_mapping({4: 1})

    def test_rejects_zero_exponent(self):
        """Test that exponent 0 is rejected."""
        with self.assertRaises(InvalidInputError):
            SupernaturalNumber.from_mapping({2: 0})


class TestHullsIsomorphic(unittest.TestCase):
    """Test cases for the hull classification test."""

    def setUp(self):
        self.powers_of_two = FrequencyChain((2, 4, 8), 'powers')
        self.powers_of_four = FrequencyChain((4, 16, 64), 'powers')
        self.powers_of_three = FrequencyChain((3, 9, 27), 'powers')
        self.three_times_two = FrequencyChain((6, 12, 24), 'powers')

    def test_two_and_four_adic(self):
        """Test that 2^k and 4^k give isomorphic hulls with witnesses."""
        verdict = hulls_isomorphic(self.powers_of_two, self.powers_of_four, 3)
        self.assertTrue(verdict.isomorphic)
        self.assertEqual(verdict.decided_by, 'supernatural')
        for _, n, m in verdict.witnesses:
            self.assertEqual(m % n, 0)

    def test_two_and_three_adic(self):
        """Test that 2^k and 3^k are not isomorphic."""
        verdict = hulls_isomorphic(self.powers_of_two, self.powers_of_three, 3)
        self.assertFalse(verdict.isomorphic)
        self.assertEqual(verdict.failure, ('a', 2))

    def test_extra_factor_three(self):
        """Test that 3 * 2^k fails on the element 6."""
        verdict = hulls_isomorphic(self.powers_of_two, self.three_times_two, 3)
        self.assertFalse(verdict.isomorphic)
        self.assertEqual(verdict.failure, ('b', 6))

    def test_reflexive_and_symmetric(self):
        """Test reflexivity and symmetry of confirmed verdicts."""
        chains = [self.powers_of_two, self.powers_of_four, self.powers_of_three, self.three_times_two]
        for a in chains:
            self.assertTrue(hulls_isomorphic(a, a, 3).isomorphic)
            for b in chains:
                self.assertEqual(hulls_isomorphic(a, b, 3).isomorphic,
                                 hulls_isomorphic(b, a, 3).isomorphic)

    def test_finite_chains_by_divisibility(self):
        """Test complete finite chains compared by mutual divisibility."""
        verdict = hulls_isomorphic(FrequencyChain((2, 12)), FrequencyChain((3, 12)), 2)
        self.assertTrue(verdict.isomorphic)
        self.assertEqual(verdict.decided_by, 'divisibility')
        verdict = hulls_isomorphic(FrequencyChain((2, 4)), FrequencyChain((2, 8)), 2)
        self.assertFalse(verdict.isomorphic)
        self.assertEqual(verdict.failure, ('b', 8))

    def test_truncated_finite_chains_are_inconclusive(self):
        """Test that undeclared truncations with unchecked tails raise."""
        with self.assertRaises(InconclusiveAtDepthError):
            hulls_isomorphic(FrequencyChain((2, 4, 8)), FrequencyChain((2, 4, 16)), 2)

    def test_deep_power_chain_rejected(self):
        """Test that a depth whose elements exceed the size cap is invalid input."""
        cube = FrequencyChain((2, 8, 512), 'cube')
        with self.assertRaises(InvalidInputError) as context:
            hulls_isomorphic(cube, cube, 40)
        self.assertIn('bits', str(context.exception))

    def test_power_chain_below_cap(self):
        """Test that the cubing chain is still decided below the cap."""
        cube = FrequencyChain((2, 8, 512), 'cube')
        verdict = hulls_isomorphic(cube, self.powers_of_two, 9)
        self.assertTrue(verdict.isomorphic)
        self.assertEqual(len(verdict.witnesses), 18)


class TestConditionA(unittest.TestCase):
    """Test cases for condition A."""

    def test_doubling_chain(self):
        """Test that {2, 4, 8, 16} has m_min = 2."""
        verdict = condition_A(FrequencyChain((2, 4, 8, 16)))
        self.assertTrue(verdict.holds)
        self.assertEqual(verdict.m_min, 2)
        self.assertEqual(verdict.depth, 4)

    def test_cubing_chain(self):
        """Test that {2, 8, 512} has m_min = 3."""
        self.assertEqual(condition_A(FrequencyChain((2, 8, 512))).m_min, 3)

    def test_large_jump(self):
        """Test that {2, 2^100} has m_min = 100."""
        self.assertEqual(condition_A(FrequencyChain((2, 2 ** 100))).m_min, 100)

    def test_minimality_by_direct_scan(self):
        """Test both inequalities defining m_min."""
        chain = FrequencyChain((3, 27, 3 ** 7, 3 ** 20))
        m_min = condition_A(chain).m_min
        pairs = list(zip(chain.elements, chain.elements[1:]))
        self.assertTrue(all(b <= a ** m_min for a, b in pairs))
        self.assertTrue(any(b > a ** (m_min - 1) for a, b in pairs))

    def test_rejects_unit_first_element(self):
        """Test that n_1 = 1 is rejected."""
        with self.assertRaises(InvalidChainError):
            condition_A(FrequencyChain((1, 2, 4)))

    def test_bound_decides_holds(self):
        """Test that an explicit bound below m_min fails the condition."""
        self.assertFalse(condition_A(FrequencyChain((2, 8, 512)), m_bound=2).holds)


class TestOdometer(unittest.TestCase):
    """Test cases for group elements and the translation."""

    def setUp(self):
        self.chain = FrequencyChain((2, 8, 512))

    def test_identity_plus_one(self):
        """Test that e + 1 = (1, 1, 1)."""
        self.assertEqual(odometer_add(GroupElement.identity(self.chain), 1).residues, (1, 1, 1))

    def test_carry_wraps(self):
        """Test that (1, 7, 511) + 1 wraps to the identity."""
        g = GroupElement(self.chain, (1, 7, 511))
        self.assertEqual(odometer_add(g, 1), GroupElement.identity(self.chain))

    def test_zero_shift(self):
        """Test that adding 0 returns the same element."""
        g = GroupElement(self.chain, (1, 5, 133))
        self.assertEqual(odometer_add(g, 0), g)

    def test_group_action(self):
        """Test T^a(e) + k = T^(a+k)(e) for every k in [-1024, 1024]."""
        starts = {a: GroupElement.from_integer(self.chain, a) for a in range(-16, 16)}
        targets = {n: GroupElement.from_integer(self.chain, n) for n in range(-1040, 1040)}
        for k in range(-1024, 1025):
            for a, g in starts.items():
                self.assertEqual(odometer_add(g, k), targets[a + k])

    def test_shifts_compose(self):
        """Test that shifts compose additively, including negative ones."""
        g = GroupElement(self.chain, (1, 5, 133))
        for a, b in ((3, 4), (-7, 2), (600, -1000)):
            self.assertEqual(odometer_add(odometer_add(g, a), b), odometer_add(g, a + b))

    def test_from_integer_matches_shift(self):
        """Test that T^t(e) built directly equals repeated addition."""
        self.assertEqual(GroupElement.from_integer(self.chain, -3),
                         odometer_add(GroupElement.identity(self.chain), -3))

    def test_rejects_incompatible_residues(self):
        """Test that r_2 must reduce to r_1 modulo n_1."""
        with self.assertRaises(InvalidChainError):
            GroupElement(self.chain, (1, 4, 4))

    def test_json_fields(self):
        """Test the fixed JSON layout of group elements."""
        g = GroupElement(FrequencyChain((2, 8, 512), 'cube'), (1, 5, 133))
        self.assertEqual(g.to_json(), {'chain': [2, 8, 512], 'pattern': 'cube', 'residues': [1, 5, 133]})
        self.assertEqual(GroupElement.from_json(g.to_json()), g)


if __name__ == '__main__':
    unittest.main()
