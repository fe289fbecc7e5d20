import unittest

import numpy as np

from src.datagen import make_blobs
from src.partition import split_tasks, train_val_split
from src.utils.error_utils import ConfigurationError


class TestSplitTasks(unittest.TestCase):
    def test_disjoint_pairs(self):
        """Test ten classes split into five disjoint pairs."""
        seq = split_tasks(10, 5, seed=1993)
        self.assertEqual(seq.num_tasks, 5)
        self.assertTrue(all(len(t) == 2 for t in seq.tasks))
        flat = [c for t in seq.tasks for c in t]
        self.assertEqual(sorted(flat), list(range(10)))
        self.assertEqual(tuple(flat), seq.class_order)

    def test_determinism(self):
        """Test seeded class orders."""
        self.assertEqual(split_tasks(10, 5, 1).class_order, split_tasks(10, 5, 1).class_order)
        self.assertNotEqual(split_tasks(100, 10, 1).class_order, split_tasks(100, 10, 2).class_order)

    def test_single_task(self):
        """Test the joint-training degenerate case."""
        seq = split_tasks(6, 1, seed=0)
        self.assertEqual(sorted(seq.tasks[0]), list(range(6)))

    def test_seen_classes(self):
        """Test the cumulative class set."""
        seq = split_tasks(6, 3, seed=0)
        self.assertEqual(seq.seen_classes(0), sorted(seq.tasks[0]))
        self.assertEqual(seq.seen_classes(2), list(range(6)))

    def test_invalid(self):
        """Test non-dividing task counts."""
        with self.assertRaises(ConfigurationError):
            split_tasks(10, 3, seed=0)
        with self.assertRaises(ConfigurationError):
            split_tasks(10, 0, seed=0)


class TestTrainValSplit(unittest.TestCase):
    def setUp(self):
        """Set up test cases."""
        self.data = make_blobs(num_classes=3, per_class=10, input_dim=2, separation=3.0, noise=1.0,
                               seed=0, test_per_class=4)

    def test_stratified_counts(self):
        """Test that each class gives round(n * f) training rows to validation."""
        split = train_val_split(self.data, 0.2, seed=1)
        for c in range(3):
            self.assertEqual(len(split.indices("val", [c])), 2)
            self.assertEqual(len(split.indices("train", [c])), 8)
            self.assertEqual(len(split.indices("test", [c])), 4)

    def test_half_rounds_up(self):
        """Test round-half-up of the validation count."""
        split = train_val_split(self.data, 0.25, seed=1)
        self.assertEqual(len(split.indices("val", [0])), 3)

    def test_test_rows_untouched_and_deterministic(self):
        """Test that only training rows are re-tagged, reproducibly."""
        first, second = train_val_split(self.data, 0.2, 5), train_val_split(self.data, 0.2, 5)
        np.testing.assert_array_equal(first.splits, second.splits)
        np.testing.assert_array_equal(first.indices("test"), self.data.indices("test"))
        self.assertEqual(len(train_val_split(self.data, 0.0, 5).indices("val")), 0)

    def test_invalid_fraction(self):
        """Test the [0, 1) range."""
        with self.assertRaises(ConfigurationError):
            train_val_split(self.data, 1.0, seed=0)


if __name__ == '__main__':
    unittest.main()
