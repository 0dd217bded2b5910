import unittest
import sys
import os

from dataclasses import replace

import numpy as np

# Add parent directory to path
sys.path.insert(0, os.path.join(os.path.dirname(__file__), '..'))
os.environ.setdefault('EXTPROF_ENV', 'testing')

from extprof.errors import ParameterError
from extprof.models.params import Params
from extprof.services.profile_ivp import (
    check_residuals, default_start_radius, integrate_profile, profile_rhs, profile_series_start,
)


class TestSeriesStart(unittest.TestCase):

    def setUp(self):
        """Set up test fixtures"""
        self.params = Params(1.5)

    def test_leading_correction(self):
        """Test f(r0) departs from a by (p-1)/p a^q r0^(q+1) at leading order"""
        f0, g0 = profile_series_start(self.params, 1.0, 1e-4)
        self.assertAlmostEqual(1.0 - f0, 3.333e-13, delta=1e-15)
        self.assertAlmostEqual(g0, 1e-4, delta=1e-8)

    def test_start_radius(self):
        """Test the start radius shrinks for large and small a alike"""
        self.assertEqual(default_start_radius(2.0), 1e-6)
        self.assertAlmostEqual(default_start_radius(0.01), 1e-4)

    def test_rhs(self):
        """Test the first-order system"""
        rhs = profile_rhs(self.params)
        df, dg = rhs(1.0, (0.8, 0.5))
        self.assertAlmostEqual(df, -0.25)
        self.assertAlmostEqual(dg, 0.3)

    def test_invalid_a(self):
        """Test non-positive shooting parameters are rejected"""
        for a in (0.0, -1.0, float('inf')):
            with self.assertRaises(ParameterError) as ctx:
                profile_series_start(self.params, a)
            self.assertEqual(ctx.exception.kind, 'invalid_a')


class TestIntegrateProfile(unittest.TestCase):

    def setUp(self):
        """Set up test fixtures"""
        self.params = Params(1.5)

    def test_decaying_profile(self):
        """Test a small a stays positive, bounded and non-increasing"""
        traj = integrate_profile(self.params, 0.1, r_max=50.0)
        self.assertIsNone(traj.crossing)
        self.assertEqual(traj.path.terminal_reason, 'reached_end')
        self.assertEqual(traj.r_end, 50.0)
        self.assertTrue(np.all(traj.f > 0.0))
        self.assertTrue(np.all(traj.f <= 0.1))
        self.assertTrue(np.all(traj.g > 0.0))
        self.assertTrue(np.all(traj.fprime < 0.0))

    def test_crossing_profile(self):
        """Test a large a reaches zero with negative slope"""
        traj = integrate_profile(self.params, 11.0)
        self.assertIsNotNone(traj.crossing)
        self.assertGreater(traj.crossing.R, 0.0)
        self.assertLess(traj.crossing.slope, 0.0)
        self.assertAlmostEqual(traj.f[-1], 0.0, delta=1e-9)
        self.assertAlmostEqual(traj.r_end, traj.crossing.R)

    def test_level_stop(self):
        """Test the run stops where f falls to f_stop"""
        traj = integrate_profile(self.params, 1.0, f_stop=0.5)
        self.assertTrue(traj.stopped_at_level)
        self.assertIsNone(traj.crossing)
        self.assertAlmostEqual(traj.f[-1], 0.5, delta=1e-9)
        with self.assertRaises(ParameterError):
            integrate_profile(self.params, 1.0, f_stop=2.0)

    def test_dense_state(self):
        """Test dense evaluation between nodes"""
        traj = integrate_profile(self.params, 0.5, r_max=10.0)
        f_mid = traj.f_at(5.0)
        self.assertLess(f_mid, traj.f_at(4.0))
        self.assertGreater(f_mid, traj.f_at(6.0))

    def test_residuals(self):
        """Test the equation residual and integrated identity along a run"""
        for a in (0.5, 11.0):
            traj = integrate_profile(self.params, a, r_max=20.0)
            report = check_residuals(traj)
            self.assertTrue(report.passed(1e-6), report.to_dict())
            self.assertEqual(report.nodes_checked, traj.path.n_nodes)

    def test_corrupted_node_detected(self):
        """Test a perturbed node state shows up in both residuals"""
        traj = integrate_profile(self.params, 0.5, r_max=20.0)
        k = traj.path.n_nodes // 2
        f_k, g_k = traj.path.y[k]
        corrupted = replace(traj, path=traj.path.with_node_state(k, [f_k * 1.01, g_k]))
        report = check_residuals(corrupted)
        self.assertFalse(report.passed(1e-6), report.to_dict())
        self.assertGreater(report.max_ode_residual, 1e-4)

    def test_rows(self):
        """Test the tabular view"""
        traj = integrate_profile(self.params, 0.5, r_max=5.0)
        rows = traj.to_rows()
        self.assertEqual(len(rows), traj.path.n_nodes)
        self.assertEqual(set(rows[0]), {'r', 'f', 'fprime', 'g'})

    def test_invalid_range(self):
        """Test non-positive r_max is rejected"""
        with self.assertRaises(ParameterError):
            integrate_profile(self.params, 1.0, r_max=0.0)


if __name__ == '__main__':
    unittest.main()
