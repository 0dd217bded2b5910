import unittest
import sys
import os
from dataclasses import replace
from unittest.mock import patch

# Add parent directory to path
sys.path.insert(0, os.path.join(os.path.dirname(__file__), '..'))
os.environ.setdefault('EXTPROF_ENV', 'testing')

from extprof.models.params import Params
from extprof.services.ode_core import StepControl
from extprof.services.psi_plane import integrate_psi
from extprof.utils import validation
from extprof.utils.validation import CheckResult, ValidationReport, run_validation


class TestValidationReport(unittest.TestCase):

    def test_table(self):
        """Test the pass/fail table and summary properties"""
        report = ValidationReport([
            CheckResult('ode_residual', 1.5, 0.5, True, 1e-9, 1e-6),
            CheckResult('envelope', 1.5, 0.5, False, 0.1, 1e-6, 'excess'),
        ])
        self.assertFalse(report.passed)
        self.assertEqual([c.name for c in report.failures], ['envelope'])
        table = report.table()
        self.assertIn('PASS', table)
        self.assertIn('FAIL', table)
        self.assertEqual(len(report.frame()), 2)
        self.assertEqual(ValidationReport().table(), 'no checks run')


class TestProfileAndPsiChecks(unittest.TestCase):

    def setUp(self):
        """Set up test fixtures"""
        self.params = Params(1.5)
        self.suite = validation._Suite(StepControl.default(max_steps=20000))

    def check(self, name):
        return [c for c in self.suite.report.checks if c.name == name][0]

    def test_missing_psi_peak_fails(self):
        """Test a psi run without a located maximum fails single_psi_peak"""
        def without_peak(*args, **kwargs):
            return replace(integrate_psi(*args, **kwargs), y_a=None)

        with patch.object(validation, 'integrate_psi', side_effect=without_peak):
            validation._profile_and_psi_checks(self.suite, self.params, 2.0)
        self.assertFalse(self.check('single_psi_peak').passed)
        self.assertTrue(self.check('profile_bounds').passed)

    def test_bound_violation_fails(self):
        """Test violated node bounds fail profile_bounds with their description"""
        with patch.object(validation, 'node_invariant_failures', return_value=['f increases at r=1']):
            validation._profile_and_psi_checks(self.suite, self.params, 2.0)
        bounds = self.check('profile_bounds')
        self.assertFalse(bounds.passed)
        self.assertEqual(bounds.detail, 'f increases at r=1')
        self.assertTrue(self.check('single_psi_peak').passed)


class TestQuickValidation(unittest.TestCase):

    def test_quick_suite(self):
        """Test the structural checks pass for one exponent"""
        ctrl = StepControl.default(max_steps=20000)
        report = run_validation(ps=(1.5,), a_values=(0.5, 2.0), pairs=2, quick=True, ctrl=ctrl)
        names = {c.name for c in report.checks}
        for name in ('single_psi_peak', 'profile_bounds', 'ode_residual', 'integrated_identity',
                     'transform_identity', 'tail_lower_bound', 'label_matches_profile',
                     'explicit_decaying_interval', 'barrier', 'explicit_crossing_bound',
                     'monotone_in_a', 'gap_bound'):
            self.assertIn(name, names)
        self.assertNotIn('threshold', names)
        self.assertTrue(report.passed, report.table())


if __name__ == '__main__':
    unittest.main()
