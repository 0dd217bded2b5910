import unittest
import sys
import os

# Add parent directory to path
sys.path.insert(0, os.path.join(os.path.dirname(__file__), '..'))
os.environ.setdefault('EXTPROF_ENV', 'testing')

from extprof.errors import ParameterError
from extprof.models.params import Params
from extprof.services.sweep import labels_monotone, sweep, sweep_frame


class TestSweep(unittest.TestCase):

    def setUp(self):
        """Set up test fixtures"""
        self.params = Params(1.5)

    def test_grid_order(self):
        """Test records come back in grid order with monotone labels"""
        grid = [0.05, 0.1, 11.0, 20.0]
        records = sweep(self.params, grid, fit=False, workers=2)
        self.assertEqual([r['a'] for r in records], grid)
        self.assertEqual([r['regime'] for r in records], ['Decaying', 'Decaying', 'Crossing', 'Crossing'])
        self.assertTrue(labels_monotone(records))

    def test_crossing_fit_columns(self):
        """Test fitted points carry their tail constants"""
        records = sweep(self.params, [11.0], fit=True)
        self.assertGreater(records[0]['R'], 0.0)
        self.assertLess(records[0]['slope'], 0.0)
        frame = sweep_frame(records)
        self.assertEqual(list(frame.columns[:5]), ['a', 'regime', 'evidence', 'phi', 'y'])

    def test_invalid_grid(self):
        """Test non-positive grid values are rejected"""
        with self.assertRaises(ParameterError):
            sweep(self.params, [0.1, -1.0], fit=False)
        self.assertEqual(sweep(self.params, [], fit=False), [])

    def test_labels_monotone(self):
        """Test the ordering check on hand-made sequences"""
        ok = [{'regime': 'Decaying'}, {'regime': 'Critical'}, {'regime': 'Crossing'}]
        self.assertTrue(labels_monotone(ok))
        self.assertFalse(labels_monotone(list(reversed(ok))))
        wide = [{'regime': 'Critical'}] * 3
        self.assertFalse(labels_monotone(wide))
        self.assertTrue(labels_monotone(wide, max_band=3))
        # failed points are ignored
        self.assertTrue(labels_monotone([{'regime': None}, {'regime': 'Crossing'}]))


if __name__ == '__main__':
    unittest.main()
