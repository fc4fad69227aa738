#!/usr/bin/env python3
"""
Tests for the laboratory service pipelines.
"""

import csv
import json
import math
import shutil
import tempfile
import unittest
from fractions import Fraction
from pathlib import Path
from unittest import mock

from ule_lab.errors import CenterCollisionError, CertificationError, InconclusiveError
from ule_lab.lab_constants import RATE_CAP
from ule_lab.lab_service import SWEEP_CSV_HEADER, LabService
from ule_lab.run_config import resolve_config
from ule_lab.sampling import distal_value


class TestLabService(unittest.TestCase):
    """Test cases for LabService."""

    def setUp(self):
        """Set up a temporary output directory."""
        self.temp_dir = tempfile.mkdtemp()

    def tearDown(self):
        """Clean up the temporary directory."""
        shutil.rmtree(self.temp_dir)

    def service(self, name='out', **values):
        values.setdefault('N', [64])
        values.setdefault('eps', [0.05])
        values['output_dir'] = str(Path(self.temp_dir) / name)
        return LabService(resolve_config(values))

    def read_rows(self, path):
        with open(path) as f:
            lines = [line for line in f if not line.startswith('#')]
        return list(csv.reader(lines))

    def test_potential(self):
        """Test the exact potential table."""
        service = self.service()
        result = service.run('potential')
        value = distal_value(service.generator, 1, 4)
        rows = self.read_rows(result['files'][0])
        self.assertEqual(rows[0], ['n', 'value_num', 'value_den', 'value_float'])
        self.assertEqual(len(rows), 65)
        self.assertEqual(rows[1][:3], ['0', '0', '1'])
        self.assertEqual(rows[2][:3], ['1', str(value.numerator), str(value.denominator)])
        self.assertEqual(value - Fraction(17409, 32768), Fraction(1, 2 ** 45))
        self.assertEqual(result['periods'], [2, 8, 512, 2 ** 27])

    def test_spectrum_zero_coupling(self):
        """Test that eps = 0 matches every interior site exactly."""
        result = self.service(eps=[0.0]).run('spectrum')
        self.assertEqual(result['form'], 'poeschel')
        self.assertEqual(result['match']['max_interior_mismatch'], 0.0)
        self.assertEqual(result['match']['collisions'], [])
        self.assertEqual(len(self.read_rows(result['files'][0])), 65)

    def test_spectrum_full_vectors(self):
        """Test the optional eigenvector dump."""
        result = self.service(N=[16], full_vectors=True).run('spectrum')
        self.assertEqual(len(result['files']), 2)
        data = json.loads(Path(result['files'][1]).read_text())
        self.assertEqual(len(data['eigenvectors']), 16)

    def test_dress(self):
        """Test the dressed potential with its independent re-check."""
        service = self.service()
        result = service.run('dress')
        self.assertLessEqual(result['iterations'], 100)
        self.assertLessEqual(result['final_mismatch'], service.config.tol)
        self.assertLessEqual(result['verified_mismatch'], service.config.tol)
        self.assertGreater(result['deviation'], 0)
        self.assertEqual(len(result['files']), 3)

    def test_repeat_runs_identical(self):
        """Test that repeated runs of one configuration write identical bytes."""
        first = self.service('first').run('dress')
        second = self.service('second').run('dress')
        for a, b in zip(first['files'], second['files']):
            self.assertEqual(Path(a).read_bytes(), Path(b).read_bytes())

    def test_ule_and_dynloc(self):
        """Test the single-point localization reports."""
        service = self.service()
        ule = service.run('ule')
        self.assertGreater(ule['uniform_r'], 0)
        self.assertLess(ule['uniform_r'], RATE_CAP)
        dynloc = service.run('dynloc')
        self.assertLessEqual(dynloc['max_violation'], 1e-12)
        self.assertEqual(len(self.read_rows(dynloc['files'][1])), 64 * 64 + 1)

    def test_sweep(self):
        """Test grid order, phase uniformity and the eps trend."""
        result = self.service(eps=[0.05, 0.025], t=[1, 0], threads=2).run('sweep')
        self.assertEqual(result['failed'], [])
        grid = [(row['eps'], row['N'], row['t']) for row in result['rows']]
        self.assertEqual(grid, [(0.025, 64, 0), (0.025, 64, 1), (0.05, 64, 0), (0.05, 64, 1)])
        rows = result['rows']
        self.assertEqual(rows[0]['uniform_r'], rows[1]['uniform_r'])
        self.assertEqual(rows[2]['uniform_r'], rows[3]['uniform_r'])
        self.assertGreater(rows[0]['uniform_r'], rows[2]['uniform_r'])
        self.assertEqual(self.read_rows(result['files'][0])[0], list(SWEEP_CSV_HEADER))

    def test_sweep_records_failures(self):
        """Test that an inconclusive grid point is recorded and the rest still run."""
        result = self.service(eps=[0.0, 0.05], max_iter=0, tol=1e-14).run('sweep')
        self.assertEqual(len(result['failed']), 1)
        self.assertEqual(result['failed'][0]['type'], 'ConvergenceError')
        failed_row = result['rows'][1]
        self.assertEqual(failed_row['iters'], -1)
        self.assertTrue(math.isnan(failed_row['uniform_r']))
        self.assertEqual(result['rows'][0]['uniform_r'], RATE_CAP)

    def test_sweep_all_failed(self):
        """Test that a sweep without a single conclusive point raises."""
        with self.assertRaises(InconclusiveError):
            self.service(eps=[0.05], max_iter=0, tol=1e-14).run('sweep')

    def test_strong_coupling_loses_localization(self):
        """Test that eps = 0.1 and 0.2 on the default chain end in a center collision at N = 128."""
        for eps in (0.1, 0.2):
            service = self.service(f'strong{eps}', N=[128], eps=[eps])
            with self.assertRaises(CenterCollisionError) as context:
                service.run('dress')
            self.assertTrue(context.exception.sites)
            self.assertEqual(context.exception.exit_code, 3)

    def test_sweep_default_grid(self):
        """Test the default eps grid: 0.05 converges, 0.1 and 0.2 are recorded as failed."""
        result = self.service(N=[128], eps=[0.05, 0.1, 0.2]).run('sweep')
        by_eps = {row['eps']: row for row in result['rows']}
        self.assertGreaterEqual(by_eps[0.05]['iters'], 0)
        self.assertLessEqual(by_eps[0.05]['max_mismatch'], 1e-8)
        for eps in (0.1, 0.2):
            self.assertEqual(by_eps[eps]['iters'], -1)
            self.assertTrue(math.isnan(by_eps[eps]['uniform_r']))
        self.assertEqual(sorted((f['eps'], f['type']) for f in result['failed']),
                         [(0.1, 'CenterCollisionError'), (0.2, 'CenterCollisionError')])

    def test_distality(self):
        """Test the exact separation scan of the distal generator."""
        result = self.service(window=[0, 64], max_separation=8).run('distality')
        self.assertTrue(result['passed'])
        self.assertEqual(result['K'], 8)
        self.assertTrue(Path(result['files'][0]).exists())

    def test_distality_dyadic(self):
        """Test the separation scan of the dyadic example."""
        result = self.service(generator='poeschel', window=[0, 256], max_separation=16).run('distality')
        self.assertTrue(result['passed'])

    def test_distality_failure_raises(self):
        """Test that a failed scan is written and then reported as an internal error."""
        service = self.service(window=[0, 64], max_separation=8)
        with mock.patch('ule_lab.lab_service.verify_distality') as verify:
            verify.return_value.passed = False
            verify.return_value.violation = (3, 2)
            verify.return_value.to_json.return_value = {'passed': False}
            with self.assertRaises(CertificationError):
                service.run('distality')
        self.assertTrue((Path(service.config.output_dir) / 'distality.json').exists())

    def test_approx(self):
        """Test the approximation-function table of the distal generator."""
        result = self.service().run('approx')
        self.assertTrue(result['is_approximation_function'])
        self.assertEqual(len(result['rows']), 3)
        for row in result['rows']:
            self.assertLessEqual(row['h_refined'], row['h_upper'] * (1 + 1e-12))


if __name__ == '__main__':
    unittest.main()
