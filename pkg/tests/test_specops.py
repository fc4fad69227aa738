#!/usr/bin/env python3
"""
Tests for operator windows, the eigensystem and the dressed potential.
"""

import math
import unittest

import numpy as np

from ule_lab.errors import CenterCollisionError, ConvergenceError, InvalidInputError
from ule_lab.hull import FrequencyChain, GroupElement
from ule_lab.sampling import DistalGenerator, poeschel_series
from ule_lab.specops import (
    OperatorForm,
    build_window,
    construct_dressed_potential,
    dressed_deviation,
    eigen_rows,
    eigensystem,
    match_eigenvalues,
    spectral_filling_gap,
    window_from_values,
)


def distal_series():
    return DistalGenerator(FrequencyChain((2, 8, 512), 'cube'), m=2).series(4)


def distal_values(size, offset=0):
    series = distal_series()
    window = build_window(series, GroupElement.identity(series.chain), offset, size, 0.0,
                          OperatorForm.POESCHEL, 4)
    return window.diagonal


class TestOperatorForm(unittest.TestCase):
    """Test cases for form parsing."""

    def test_parse(self):
        """Test case-insensitive parsing."""
        self.assertIs(OperatorForm.parse('Standard'), OperatorForm.STANDARD)
        self.assertIs(OperatorForm.parse(' poeschel '), OperatorForm.POESCHEL)

    def test_parse_unknown(self):
        """Test that an unknown form is rejected."""
        with self.assertRaises(InvalidInputError):
            OperatorForm.parse('symmetric')


class TestWindow(unittest.TestCase):
    """Test cases for window construction."""

    def test_standard_divides_by_eps(self):
        """Test that STANDARD has diagonal d / eps and unit hopping."""
        window = window_from_values([0.0, 0.5, 0.25], 0.5, OperatorForm.STANDARD)
        self.assertEqual(window.diagonal.tolist(), [0.0, 1.0, 0.5])
        self.assertEqual(window.off_diagonal, 1.0)

    def test_standard_rejects_zero_eps(self):
        """Test that STANDARD with eps = 0 is rejected."""
        with self.assertRaises(InvalidInputError):
            window_from_values([0.0, 1.0], 0.0, OperatorForm.STANDARD)

    def test_rejects_small_or_negative(self):
        """Test N < 2 and eps < 0."""
        with self.assertRaises(InvalidInputError):
            window_from_values([0.5], 0.1)
        with self.assertRaises(InvalidInputError):
            window_from_values([0.5, 0.1], -0.1)
        series = distal_series()
        with self.assertRaises(InvalidInputError):
            build_window(series, GroupElement.identity(series.chain), 0, 1, 0.1, OperatorForm.POESCHEL, 4)

    def test_translation_covariance(self):
        """Test that the window of T^t(e) at offset a equals the window of e at offset a + t."""
        series = distal_series()
        e = GroupElement.identity(series.chain)
        for t in (1, 7, 300):
            moved = build_window(series, GroupElement.from_integer(series.chain, t), 5, 32, 0.1,
                                 OperatorForm.POESCHEL, 4)
            plain = build_window(series, e, 5 + t, 32, 0.1, OperatorForm.POESCHEL, 4)
            self.assertTrue(np.array_equal(moved.diagonal, plain.diagonal))

    def test_dense_matrix(self):
        """Test the dense form of a POESCHEL window."""
        dense = window_from_values([0.0, 1.0, 0.5], 0.1).to_dense()
        expected = np.array([[0.0, 0.1, 0.0], [0.1, 1.0, 0.1], [0.0, 0.1, 0.5]])
        self.assertTrue(np.array_equal(dense, expected))


class TestEigensystem(unittest.TestCase):
    """Test cases for the deterministic eigendecomposition."""

    def test_two_site_closed_form(self):
        """Test eigenvalues (1 -/+ sqrt(1.04)) / 2 of [[0, 0.1], [0.1, 1]]."""
        E = eigensystem(window_from_values([0.0, 1.0], 0.1))
        root = math.sqrt(1.04)
        self.assertAlmostEqual(E.eigenvalues[0], (1 - root) / 2, places=12)
        self.assertAlmostEqual(E.eigenvalues[1], (1 + root) / 2, places=12)
        self.assertEqual(E.centers, (0, 1))

    def test_zero_coupling(self):
        """Test that eps = 0 gives the sorted diagonal and coordinate vectors."""
        d = [0.7, 0.1, 0.4]
        E = eigensystem(window_from_values(d, 0.0))
        self.assertEqual(E.eigenvalues.tolist(), sorted(d))
        self.assertEqual(E.centers, (1, 2, 0))
        self.assertTrue(np.array_equal(np.abs(E.eigenvectors), np.eye(3)[:, [1, 2, 0]]))
        self.assertEqual(E.residual_bound, 0.0)

    def test_invariants(self):
        """Test trace and Frobenius conservation on the distal window."""
        eps = 0.05
        d = distal_values(64)
        E = eigensystem(window_from_values(d, eps))
        self.assertAlmostEqual(float(np.sum(E.eigenvalues)), float(np.sum(d)), places=10)
        frobenius = float(np.sum(d ** 2)) + 2 * 63 * eps ** 2
        self.assertAlmostEqual(float(np.sum(E.eigenvalues ** 2)), frobenius, places=10)

    def test_sign_convention(self):
        """Test that the largest-magnitude entry of every vector is positive."""
        E = eigensystem(window_from_values(distal_values(32), 0.1))
        for k in range(E.size):
            column = E.eigenvectors[:, k]
            self.assertGreater(column[np.argmax(np.abs(column))], 0)

    def test_offset_carried(self):
        """Test that the window offset is kept on the eigensystem."""
        E = eigensystem(window_from_values([0.0, 1.0], 0.1, offset=12))
        self.assertEqual(E.offset, 12)
        rows = eigen_rows(E)
        self.assertEqual([row[0] for row in rows], [0, 1])
        # centers are reported as lattice sites
        self.assertEqual([row[2] for row in rows], [12, 13])


class TestMatchEigenvalues(unittest.TestCase):
    """Test cases for matching eigenvalues to sites."""

    def test_zero_coupling_exact(self):
        """Test that eps = 0 matches every site with zero mismatch."""
        d = distal_values(32)
        report = match_eigenvalues(eigensystem(window_from_values(d, 0.0)), d, 4)
        self.assertEqual(report.max_interior_mismatch, 0.0)
        self.assertEqual(report.collisions, ())
        self.assertEqual(report.unmatched, ())

    def test_rejects_bad_margin(self):
        """Test that 2 * margin >= N is rejected."""
        d = distal_values(8)
        E = eigensystem(window_from_values(d, 0.0))
        with self.assertRaises(InvalidInputError):
            match_eigenvalues(E, d, 4)

    def test_rejects_wrong_target_count(self):
        """Test that the targets must cover the window."""
        E = eigensystem(window_from_values([0.0, 1.0, 2.0], 0.0))
        with self.assertRaises(InvalidInputError):
            match_eigenvalues(E, [0.0, 1.0], 0)


class TestDressedPotential(unittest.TestCase):
    """Test cases for the dressed-potential iteration on the distal window."""

    @classmethod
    def setUpClass(cls):
        cls.size = 128
        cls.margin = 16
        cls.tol = 1e-8
        cls.d = distal_values(cls.size)
        cls.dressed = {
            eps: construct_dressed_potential(cls.d, eps, cls.tol, 100, cls.margin)
            for eps in (0.05, 0.025)
        }

    def test_converges(self):
        """Test convergence within 100 steps and a trace entry per diagonalization."""
        for eps, dressed in self.dressed.items():
            self.assertLessEqual(dressed.final_mismatch, self.tol)
            self.assertLessEqual(dressed.iterations, 100)
            self.assertEqual(len(dressed.trace), dressed.iterations + 1)
            self.assertEqual(dressed.trace[-1].residual, dressed.final_mismatch)

    def test_independent_match(self):
        """Test that a fresh diagonalization reproduces d / eps on the interior."""
        for eps, dressed in self.dressed.items():
            report = match_eigenvalues(eigensystem(dressed.window()), self.d / eps, self.margin)
            self.assertLessEqual(report.max_interior_mismatch, self.tol)
            self.assertEqual(report.interior_problems(), ())

    def test_deviation_quadratic(self):
        """Test that halving eps divides ||eps p - d|| by roughly four."""
        deviations = [dressed_deviation(self.dressed[eps].p, self.d, eps, self.margin) for eps in (0.05, 0.025)]
        self.assertGreater(deviations[1], 0)
        ratio = deviations[0] / deviations[1]
        self.assertGreaterEqual(ratio, 2.5)
        self.assertLessEqual(ratio, 6.0)

    def test_restart_from_solution(self):
        """Test that starting from the returned diagonal needs no corrective step."""
        dressed = self.dressed[0.05]
        again = construct_dressed_potential(self.d, 0.05, self.tol, 100, self.margin, initial=dressed.p)
        self.assertEqual(again.iterations, 0)
        self.assertTrue(np.array_equal(again.p, dressed.p))

    def test_zero_coupling(self):
        """Test that eps = 0 returns d with no iterations."""
        dressed = construct_dressed_potential(self.d, 0.0)
        self.assertTrue(np.array_equal(dressed.p, self.d))
        self.assertEqual(dressed.iterations, 0)
        self.assertEqual(dressed_deviation(dressed.p, self.d, 0.0, self.margin), 0.0)

    def test_deviation_of_undressed(self):
        """Test that p = d / eps has zero deviation and the interior is within the whole window."""
        eps = 0.05
        self.assertEqual(dressed_deviation(self.d / eps, self.d, eps, self.margin), 0.0)
        p = self.dressed[eps].p
        self.assertLessEqual(dressed_deviation(p, self.d, eps, self.margin), dressed_deviation(p, self.d, eps, 0))

    def test_iteration_limit(self):
        """Test that an unreachable tolerance raises ConvergenceError."""
        with self.assertRaises(ConvergenceError) as context:
            construct_dressed_potential(self.d, 0.05, 1e-14, 0, self.margin)
        self.assertEqual(context.exception.iterations, 0)
        self.assertGreater(context.exception.residual, 1e-14)

    def test_center_collision(self):
        """Test that delocalized vectors sharing a center are refused."""
        # flat potential at eps = 1: the sine modes k = 1, 3, 5, 7 all peak at the middle site
        with self.assertRaises(CenterCollisionError) as context:
            construct_dressed_potential(np.zeros(7), 1.0, 1e-8, 10, 1)
        self.assertIn(3, context.exception.sites)

    def test_rejects_negative_eps(self):
        """Test that eps < 0 is rejected."""
        with self.assertRaises(InvalidInputError):
            construct_dressed_potential(self.d, -0.1)


class TestSpectralFilling(unittest.TestCase):
    """Test cases for the spectral filling statistic of the dyadic example."""

    def test_gap_shrinks_with_window(self):
        """Test that the largest gap of the rescaled interior spectrum shrinks as N grows."""
        eps = 0.001
        series = poeschel_series(16)
        e = GroupElement.identity(series.chain)
        gaps = []
        for size in (128, 256, 512):
            window = build_window(series, e, 0, size, eps, OperatorForm.STANDARD, 16)
            d = eps * window.diagonal
            gaps.append(spectral_filling_gap(eigensystem(window), d, eps, size // 8))
        self.assertLess(gaps[2], gaps[1])
        self.assertLess(gaps[1], gaps[0])
        self.assertLess(gaps[2], 0.01)

    def test_rejects_zero_eps(self):
        """Test that the statistic needs eps > 0."""
        E = eigensystem(window_from_values([0.0, 1.0], 0.0))
        with self.assertRaises(InvalidInputError):
            spectral_filling_gap(E, [0.0, 1.0], 0.0, 0)


if __name__ == '__main__':
    unittest.main()
