#!/usr/bin/env python3
"""
Integration test to verify all components work together
"""
import sys
import os
import io
import json
import unittest
from contextlib import redirect_stdout

# Add current directory to path
sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))
os.environ.setdefault('EXTPROF_ENV', 'testing')

from extprof.cli import main
from extprof.config import get_config
from extprof.models.params import Params
from extprof.services.asymptotics import fit_tail, integrate_for_fit
from extprof.services.classifier import (
    CRITICAL, CROSSING, DECAYING, ClassLabel, classify, find_threshold, initial_bracket,
)
from extprof.services.ode_core import StepControl
from extprof.services.profile_ivp import integrate_profile
from extprof.services.psi_plane import integrate_psi, radius_from_psi
from extprof.services.sweep import labels_monotone, sweep


class TestIntegration(unittest.TestCase):

    @classmethod
    def setUpClass(cls):
        """Locate the threshold once for the whole workflow"""
        cls.params = Params(1.5)
        cls.bracket = initial_bracket(cls.params)
        cls.tol_a = 1e-10 * max(1.0, cls.bracket[1])
        cls.result = find_threshold(cls.params, tol_a=cls.tol_a, bracket=cls.bracket)

    def test_threshold_certified(self):
        """Test the bracket is tight and both ends re-verify"""
        result = self.result
        self.assertLessEqual(result.width, 1e-9 * result.a_hi)
        self.assertEqual(result.verification, {'a_lo': DECAYING, 'a_hi': CROSSING})
        self.assertEqual(classify(self.params, 0.5 * result.a_lo).regime, DECAYING)
        self.assertEqual(classify(self.params, 2.0 * result.a_hi).regime, CROSSING)

    def test_threshold_stable(self):
        """Test labels 10 tol_a either side of a* hold at both tight tolerances"""
        margin = get_config().MARGIN_FLOOR
        below = self.result.a_star - 10.0 * self.tol_a
        above = self.result.a_star + 10.0 * self.tol_a
        for rel_tol in (1e-12, 1e-13):
            ctrl = StepControl.default(rel_tol=rel_tol)
            self.assertEqual(classify(self.params, below, margin=margin, ctrl=ctrl).regime, DECAYING, rel_tol)
            self.assertEqual(classify(self.params, above, margin=margin, ctrl=ctrl).regime, CROSSING, rel_tol)

    def test_critical_plateau(self):
        """Test the exponential tail constant at the threshold"""
        label = ClassLabel(CRITICAL, 'undecided', 1e-8, self.params.kappa)
        profile = integrate_profile(self.params, self.result.a_lo)
        fit = fit_tail(profile, label)
        self.assertEqual(fit.rate, 2.0)
        self.assertLess(fit.plateau_variation, 0.1)
        self.assertLess(fit.ell_gap, 0.05)
        self.assertAlmostEqual(fit.I_from_identity / fit.I, 1.0, delta=1e-3)

    def test_decaying_constant_independent_of_a(self):
        """Test two decaying parameters share the algebraic constant"""
        estimates = []
        for a in (self.result.a_lo / 8.0, self.result.a_lo / 4.0):
            label = classify(self.params, a)
            fit = fit_tail(integrate_for_fit(self.params, a, label), label)
            self.assertLess(fit.relative_gap, 0.02)
            estimates.append(fit.constant_estimate)
        self.assertAlmostEqual(estimates[0] / estimates[1], 1.0, delta=0.02)

    def test_crossing_radius_both_ways(self):
        """Test the first zero from the profile and from the transform agree"""
        a = 2.0 * self.result.a_hi
        profile = integrate_profile(self.params, a)
        R, _ = radius_from_psi(integrate_psi(self.params, a))
        self.assertAlmostEqual(R / profile.crossing.R, 1.0, delta=1e-3)

    def test_sweep_around_threshold(self):
        """Test labels along a grid straddling a*"""
        a_star = self.result.a_star
        grid = [a_star / 4.0, a_star / 2.0, 2.0 * a_star, 4.0 * a_star]
        records = sweep(self.params, grid, fit=False)
        self.assertEqual([r['regime'] for r in records], [DECAYING, DECAYING, CROSSING, CROSSING])
        self.assertTrue(labels_monotone(records))

    def test_cli_threshold(self):
        """Test the threshold command agrees with the library"""
        out = io.StringIO()
        with redirect_stdout(out):
            code = main(['threshold', '--p', '1.5', '--tol-a', '1e-4', '--format', 'json'])
        self.assertEqual(code, 0)
        values = json.loads(out.getvalue())['payload']['values']
        self.assertLessEqual(values['a_lo'], self.result.a_hi)
        self.assertGreaterEqual(values['a_hi'], self.result.a_lo)


if __name__ == '__main__':
    unittest.main()
