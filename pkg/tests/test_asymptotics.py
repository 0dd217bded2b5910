import unittest
import sys
import os

import numpy as np

# Add parent directory to path
sys.path.insert(0, os.path.join(os.path.dirname(__file__), '..'))
os.environ.setdefault('EXTPROF_ENV', 'testing')

from extprof.errors import ClassificationError, ParameterError, RangeError
from extprof.models.params import Params
from extprof.services.asymptotics import fit_tail, integrate_for_fit, reconstruct_selfsimilar
from extprof.services.classifier import CROSSING, DECAYING, classify
from extprof.services.profile_ivp import integrate_profile
from extprof.services.psi_plane import integrate_psi, tail_estimate


class TestTailFits(unittest.TestCase):

    def setUp(self):
        """Set up test fixtures"""
        self.params = Params(1.5)

    def test_crossing_fit(self):
        """Test the crossing radius and slope against the transform limit"""
        a = 11.0
        label = classify(self.params, a)
        profile = integrate_for_fit(self.params, a, label)
        fit = fit_tail(profile, label, tail_estimate(integrate_psi(self.params, a)))
        self.assertEqual(fit.regime, CROSSING)
        self.assertGreater(fit.R, 0.0)
        self.assertLess(fit.slope, 0.0)
        self.assertLess(fit.slope_gap, 1e-4)
        self.assertNotIn('ell_star', fit.to_dict())

    def test_decaying_fit(self):
        """Test r^((p-1)/(2-p)) f tends to the algebraic constant"""
        a = 0.05
        label = classify(self.params, a)
        self.assertEqual(label.regime, DECAYING)
        fit = fit_tail(integrate_for_fit(self.params, a, label), label)
        self.assertEqual(fit.exponent, 1.0)
        self.assertEqual(fit.limit_constant, 1.0)
        self.assertLess(fit.relative_gap, 0.02)
        self.assertLess(fit.drift, 1e-3)

    def test_decaying_constant_across_p(self):
        """Test the algebraic constant away from p = 3/2"""
        for p in (1.2, 1.8):
            params = Params(p)
            a = 0.5 * params.c_lower
            label = classify(params, a)
            self.assertEqual(label.regime, DECAYING, p)
            fit = fit_tail(integrate_for_fit(params, a, label), label)
            self.assertAlmostEqual(fit.exponent, (p - 1.0) / (2.0 - p))
            self.assertLess(fit.relative_gap, 0.02, fit.to_dict())
            self.assertLess(fit.drift, 1e-3, fit.to_dict())

    def test_wrong_label(self):
        """Test a Crossing label on a profile without zero is refused"""
        profile = integrate_profile(self.params, 0.1, r_max=20.0)
        label = classify(self.params, 11.0)
        with self.assertRaises(ClassificationError) as ctx:
            fit_tail(profile, label)
        self.assertEqual(ctx.exception.kind, 'wrong_label')


class TestSelfSimilar(unittest.TestCase):

    def setUp(self):
        """Set up test fixtures"""
        self.params = Params(1.5)

    def test_centre_value(self):
        """Test u(0, 0) = ((2-p) T)^(1/(2-p)) a"""
        profile = integrate_profile(self.params, 1.0, r_max=10.0)
        x = np.linspace(-5.0, 5.0, 101)
        slice_ = reconstruct_selfsimilar(profile, 1.0, 0.0, x)
        self.assertAlmostEqual(slice_.u_values[50], 0.25, places=12)
        np.testing.assert_allclose(slice_.u_values, slice_.u_values[::-1], rtol=0, atol=1e-12)
        self.assertTrue(np.all(np.diff(slice_.u_values[50:]) <= 0.0))
        self.assertEqual(len(slice_.to_rows()), 101)

    def test_time_scaling(self):
        """Test u(t, x) / u(0, x) = ((T - t) / T)^(1/(2-p)) at fixed x"""
        profile = integrate_profile(self.params, 1.0, r_max=10.0)
        x = [0.0, 1.5, 4.0]
        start = reconstruct_selfsimilar(profile, 2.0, 0.0, x).u_values
        for t in (0.5, 1.0, 1.9):
            later = reconstruct_selfsimilar(profile, 2.0, t, x).u_values
            np.testing.assert_allclose(later / start, ((2.0 - t) / 2.0) ** 2.0, rtol=1e-13)

    def test_extinction(self):
        """Test the solution vanishes at t = T"""
        profile = integrate_profile(self.params, 1.0, r_max=10.0)
        slice_ = reconstruct_selfsimilar(profile, 1.0, 1.0, [0.0, 1.0])
        self.assertTrue(np.all(slice_.u_values == 0.0))

    def test_compact_support(self):
        """Test u is zero beyond the first zero of a crossing profile"""
        profile = integrate_profile(self.params, 11.0)
        R = profile.crossing.R
        slice_ = reconstruct_selfsimilar(profile, 1.0, 0.5, [0.5 * R, R, 2.0 * R])
        self.assertGreater(slice_.u_values[0], 0.0)
        self.assertEqual(slice_.u_values[2], 0.0)

    def test_invalid_slice(self):
        """Test time and grid limits"""
        profile = integrate_profile(self.params, 0.5, r_max=10.0)
        with self.assertRaises(ParameterError):
            reconstruct_selfsimilar(profile, 1.0, 2.0, [0.0])
        with self.assertRaises(ParameterError):
            reconstruct_selfsimilar(profile, 0.0, 0.0, [0.0])
        with self.assertRaises(RangeError) as ctx:
            reconstruct_selfsimilar(profile, 1.0, 0.0, [20.0])
        self.assertEqual(ctx.exception.kind, 'grid_exceeds_span')


if __name__ == '__main__':
    unittest.main()
