"""
Round trace and run-file tests.
"""
import csv
import os
import tempfile
import unittest
from fractions import Fraction

import numpy as np

from src.fedsim import TRACE_COLUMNS, RoundTrace, write_partition_csvs, write_trace_csv
from src.partition import PartitionStats


class TestRoundTrace(unittest.TestCase):
    def setUp(self):
        """Set up test cases."""
        self.trace = RoundTrace(
            seed=1, strategy="reswu", task=0, round=2,
            client_losses=[0.5, None, 0.25],
            residual_norms={"blocks.0.v": 0.5, "blocks.0.q": 0.25},
            residual_applied=True,
            test_accuracy=Fraction(3, 4),
            bytes_up=96, bytes_down=128,
        )

    def test_derived_fields(self):
        """Test participants and total residual norm."""
        self.assertEqual(self.trace.participants, 2)
        self.assertEqual(self.trace.residual_norm_total, 0.75)

    def test_row(self):
        """Test the CSV row encoding."""
        row = self.trace.row()
        self.assertEqual(list(row), TRACE_COLUMNS)
        self.assertEqual(row["client_losses"], "0.5;;0.25")
        self.assertEqual(row["mean_client_loss"], "0.375")
        self.assertEqual(row["residual_norm_max"], "0.5")
        self.assertEqual(row["residual_applied"], "1")
        self.assertEqual(row["test_accuracy"], "0.75")
        self.assertEqual(row["val_accuracy"], "")
        self.assertEqual(row["grad_norm_sq"], "")

    def test_empty_round(self):
        """Test a round without participants or residuals."""
        row = RoundTrace(seed=1, strategy="head_only", task=0, round=0, client_losses=[None]).row()
        self.assertEqual(row["mean_client_loss"], "")
        self.assertEqual(row["residual_norm_total"], "0.0")
        self.assertEqual(row["residual_norm_max"], "0.0")


class TestRunFiles(unittest.TestCase):
    def setUp(self):
        """Set up test cases."""
        self.tmp = tempfile.TemporaryDirectory()

    def tearDown(self):
        self.tmp.cleanup()

    def test_write_trace_csv(self):
        """Test one row per trace under the fixed header."""
        path = os.path.join(self.tmp.name, "trace.csv")
        traces = [RoundTrace(seed=1, strategy="naive", task=0, round=r, client_losses=[0.1]) for r in range(3)]
        write_trace_csv(traces, path)
        with open(path, encoding="utf-8") as f:
            rows = list(csv.DictReader(f))
        self.assertEqual(len(rows), 3)
        self.assertEqual([r["round"] for r in rows], ["0", "1", "2"])

    def test_write_partition_csvs(self):
        """Test one file per task with a count row per seed and client."""
        stats = {
            7: PartitionStats(counts=np.array([[[2, 0, 0], [1, 1, 0]], [[0, 0, 3], [0, 0, 0]]])),
            8: PartitionStats(counts=np.array([[[1, 1, 0], [2, 0, 0]], [[0, 0, 1], [0, 0, 2]]])),
        }
        paths = write_partition_csvs(stats, self.tmp.name)
        self.assertEqual([p.name for p in paths], ["partition_t0.csv", "partition_t1.csv"])
        with open(paths[1], encoding="utf-8") as f:
            rows = list(csv.reader(f))
        self.assertEqual(rows[0], ["seed", "client", "class_0", "class_1", "class_2"])
        self.assertEqual(rows[1:], [["7", "0", "0", "0", "3"], ["7", "1", "0", "0", "0"],
                                    ["8", "0", "0", "0", "1"], ["8", "1", "0", "0", "2"]])


if __name__ == '__main__':
    unittest.main()
