import unittest
import sys
import os
import math

# Add parent directory to path
sys.path.insert(0, os.path.join(os.path.dirname(__file__), '..'))
os.environ.setdefault('EXTPROF_ENV', 'testing')

from extprof.errors import ParameterError
from extprof.models.params import Params


class TestParams(unittest.TestCase):

    def setUp(self):
        """Set up test fixtures"""
        self.params = Params(1.5)

    def test_derived_constants(self):
        """Test closed-form constants at p = 1.5"""
        self.assertAlmostEqual(self.params.q, 2.0)
        self.assertAlmostEqual(self.params.kappa, 2.0 ** 1.5, places=12)
        self.assertAlmostEqual(self.params.exp_fast, 2.0)
        self.assertAlmostEqual(self.params.exp_slow, 1.0)
        self.assertAlmostEqual(self.params.c_lower, 0.148148, places=6)
        self.assertAlmostEqual(self.params.beta(1.0), 3.0, places=12)

    def test_algebraic_constant(self):
        """Test the decaying-tail constant at two exponents"""
        self.assertAlmostEqual(self.params.slow_const, 1.0, places=12)
        self.assertAlmostEqual(Params(4.0 / 3.0).slow_const, math.sqrt(0.5), places=5)

    def test_crossing_seed(self):
        """Test the explicit crossing bound"""
        self.assertAlmostEqual(self.params.crossing_seed(), 10.777, delta=0.01)
        for p in (1.2, 1.5, 1.8):
            params = Params(p)
            self.assertGreater(params.crossing_seed(), params.c_lower)

    def test_tail_scale(self):
        """Test the lower envelope amplitude"""
        self.assertAlmostEqual(self.params.tail_scale(4.0), 8.0, places=12)

    def test_barrier_amplitude(self):
        """Test the supersolution amplitude solves its defining equation"""
        p = 1.5
        a = 0.5 * self.params.c_lower
        amp = self.params.barrier_amplitude(a)
        self.assertIsNotNone(amp)
        self.assertGreater(amp, 0.0)
        self.assertLessEqual(amp, ((p - 1.0) / p) ** p)
        self.assertAlmostEqual(amp ** ((p - 1.0) / p) - amp, a ** (2.0 - p), places=12)

        # no amplitude reaches a^(2-p) = 1
        self.assertIsNone(self.params.barrier_amplitude(1.0))

    def test_invalid_exponent(self):
        """Test exponents outside the guarded band are rejected"""
        for p in (1.0, 2.0, 0.5, 2.5, 1.0005, float('nan')):
            with self.assertRaises(ParameterError) as ctx:
                Params(p)
            self.assertEqual(ctx.exception.kind, 'invalid_p')

    def test_custom_guard(self):
        """Test a narrower guard admits exponents near the ends"""
        self.assertAlmostEqual(Params(1.0005, guard=1e-4).p, 1.0005)
        with self.assertRaises(ParameterError):
            Params(1.5, guard=0.7)

    def test_to_dict(self):
        """Test the parameter echo"""
        echo = self.params.to_dict()
        self.assertEqual(echo['p'], 1.5)
        for key in ('kappa', 'exp_fast', 'exp_slow', 'slow_const', 'c_lower'):
            self.assertIn(key, echo)

    def test_frozen(self):
        """Test parameters are immutable"""
        with self.assertRaises(Exception):
            self.params.p = 1.7


if __name__ == '__main__':
    unittest.main()
