import unittest
import sys
import os
from unittest.mock import patch

# Add parent directory to path
sys.path.insert(0, os.path.join(os.path.dirname(__file__), '..'))
os.environ.setdefault('EXTPROF_ENV', 'testing')

from extprof.config import get_config
from extprof.errors import ClassificationError, ParameterError
from extprof.models.params import Params
from extprof.services import classifier
from extprof.services.classifier import (
    CRITICAL, CROSSING, DECAYING, ClassLabel, ThresholdResult, classify, find_threshold, initial_bracket,
)
from extprof.services.ode_core import StepControl


class TestClassify(unittest.TestCase):

    def setUp(self):
        """Set up test fixtures"""
        self.params = Params(1.5)

    def test_decaying(self):
        """Test a small a decays with its phi maximum below kappa"""
        label = classify(self.params, 0.1)
        self.assertEqual(label.regime, DECAYING)
        self.assertEqual(label.evidence, 'phi_peak_below_kappa')
        self.assertLess(label.phi, self.params.kappa * (1.0 - label.margin))
        self.assertTrue(0.0 < label.y < 1.0)

    def test_crossing(self):
        """Test a large a crosses zero"""
        label = classify(self.params, 11.0)
        self.assertEqual(label.regime, CROSSING)
        self.assertIn(label.evidence, ('phi_exceeds_kappa', 'first_zero'))
        if label.evidence == 'phi_exceeds_kappa':
            self.assertGreater(label.phi, self.params.kappa * (1.0 + label.margin))

    def test_planes_agree(self):
        """Test both planes give the same regime"""
        for a in (0.1, 11.0):
            on_profile = classify(self.params, a)
            on_psi = classify(self.params, a, plane='psi')
            self.assertEqual(on_profile.regime, on_psi.regime)
            self.assertEqual(on_psi.plane, 'psi')

    def test_explicit_intervals(self):
        """Test the closed-form membership bounds across exponents"""
        for p in (1.2, 1.8):
            params = Params(p)
            self.assertEqual(classify(params, 0.5 * params.c_lower).regime, DECAYING)
            self.assertEqual(classify(params, 1.05 * params.crossing_seed()).regime, CROSSING)

    def test_invalid_arguments(self):
        """Test margin, plane and a are validated"""
        with self.assertRaises(ParameterError):
            classify(self.params, 1.0, margin=0.6)
        with self.assertRaises(ParameterError):
            classify(self.params, 1.0, margin=0.0)
        with self.assertRaises(ParameterError):
            classify(self.params, 1.0, plane='x')
        with self.assertRaises(ParameterError) as ctx:
            classify(self.params, -1.0)
        self.assertEqual(ctx.exception.kind, 'invalid_a')


class TestClassLabel(unittest.TestCase):

    def test_decaying_needs_evidence(self):
        """Test a Decaying label needs a phi maximum below the band"""
        kappa = Params(1.5).kappa
        with self.assertRaises(ParameterError):
            ClassLabel(DECAYING, 'phi_peak_below_kappa', 1e-4, kappa, phi=kappa)
        with self.assertRaises(ParameterError):
            ClassLabel(DECAYING, 'undecided', 1e-4, kappa, phi=0.5 * kappa)

    def test_crossing_needs_evidence(self):
        """Test a Crossing label on phi needs phi above the band"""
        kappa = Params(1.5).kappa
        with self.assertRaises(ParameterError):
            ClassLabel(CROSSING, 'phi_exceeds_kappa', 1e-4, kappa, phi=kappa)
        label = ClassLabel(CROSSING, 'first_zero', 1e-4, kappa, y=1.0)
        self.assertEqual(label.to_dict()['regime'], CROSSING)

    def test_unknown_regime(self):
        """Test unknown regimes are rejected"""
        with self.assertRaises(ParameterError):
            ClassLabel('Sideways', 'undecided', 1e-4, 1.0)
        self.assertEqual(ClassLabel(CRITICAL, 'undecided', 1e-4, 1.0).regime, CRITICAL)


class TestThreshold(unittest.TestCase):

    def setUp(self):
        """Set up test fixtures"""
        self.params = Params(1.5)

    def test_initial_bracket(self):
        """Test the bracket starts at c_lower and ends at a crossing parameter"""
        a_lo, a_hi = initial_bracket(self.params)
        self.assertEqual(a_lo, self.params.c_lower)
        self.assertLessEqual(a_hi, 2.0 * self.params.crossing_seed())
        self.assertEqual(classify(self.params, a_hi).regime, CROSSING)

    def test_coarse_threshold(self):
        """Test bisection to a loose tolerance"""
        result = find_threshold(self.params, tol_a=1e-3)
        self.assertLessEqual(result.width, 1e-3)
        self.assertEqual(result.verification, {'a_lo': DECAYING, 'a_hi': CROSSING})
        self.assertTrue(self.params.c_lower <= result.a_lo < result.a_star < result.a_hi)
        self.assertLess(result.a_lo, self.params.crossing_seed())
        decaying = [a for a, label in result.log if label.regime == DECAYING]
        crossing = [a for a, label in result.log if label.regime == CROSSING]
        self.assertLess(max(decaying), min(crossing))
        self.assertEqual(result.to_dict()['iterations'], result.iterations)

    def test_bisection_tolerance(self):
        """Test bisection runs at THRESHOLD_REL_TOL and verifies tenfold tighter"""
        cfg = get_config()
        with patch.object(classifier, 'classify', wraps=classifier.classify) as spy:
            find_threshold(self.params, tol_a=1e-2, ctrl=StepControl.default(rel_tol=1e-8))
        rel_tols = [call.kwargs['ctrl'].rel_tol for call in spy.call_args_list]
        self.assertGreater(len(rel_tols), 4)
        self.assertTrue(all(tol <= cfg.THRESHOLD_REL_TOL for tol in rel_tols), rel_tols)
        for tol in rel_tols[-2:]:
            self.assertAlmostEqual(tol, cfg.THRESHOLD_REL_TOL / 10.0, delta=1e-20)

    def test_bad_bracket(self):
        """Test a bracket whose lower end crosses is refused"""
        with self.assertRaises(ClassificationError) as ctx:
            find_threshold(self.params, bracket=(11.0, 12.0))
        self.assertEqual(ctx.exception.kind, 'bracket_failure')
        with self.assertRaises(ParameterError):
            find_threshold(self.params, bracket=(2.0, 1.0))

    def test_degenerate_result(self):
        """Test a result needs a_lo < a_hi"""
        with self.assertRaises(ClassificationError):
            ThresholdResult(1.0, 1.0, 0)


if __name__ == '__main__':
    unittest.main()
