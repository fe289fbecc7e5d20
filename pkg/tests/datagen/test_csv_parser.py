"""
CSV dataset parser tests.
"""
import os
import tempfile
import unittest

import numpy as np

from src.datagen import CsvSchema, load_csv, make_blobs, write_csv
from src.utils.error_utils import DatasetParseError, ValidationError


class TestCsvParser(unittest.TestCase):
    def setUp(self):
        """Set up test cases."""
        self.tmp = tempfile.TemporaryDirectory()
        self.path = os.path.join(self.tmp.name, "data.csv")

    def tearDown(self):
        self.tmp.cleanup()

    def _write(self, text):
        with open(self.path, "w", encoding="utf-8") as f:
            f.write(text)

    def test_exact_rows(self):
        """Test a three-row file loads exactly, in order."""
        self._write("0.5,1.5,0\n-2.0,3.25,1\n4,5,1\n")
        data = load_csv(self.path, CsvSchema(num_classes=2))
        np.testing.assert_array_equal(data.features.data, [[0.5, 1.5], [-2.0, 3.25], [4.0, 5.0]])
        self.assertEqual(data.labels.tolist(), [0, 1, 1])
        self.assertEqual(data.splits.tolist(), ["train"] * 3)

    def test_header_and_split(self):
        """Test header skipping and the split tag."""
        self._write("a,b,label\n1,2,0\n\n3,4,2\n")
        data = load_csv(self.path, CsvSchema(num_classes=3, has_header=True, split="test"))
        self.assertEqual(len(data), 2)
        self.assertEqual(data.splits.tolist(), ["test", "test"])

    def test_round_trip(self):
        """Test that written files load back with identical values."""
        data = make_blobs(3, 4, 3, 2.0, 1.0, seed=5)
        write_csv(data, self.path, header=True)
        loaded = load_csv(self.path, CsvSchema(num_classes=3, has_header=True))
        np.testing.assert_array_equal(loaded.features.data, data.features.data)
        np.testing.assert_array_equal(loaded.labels, data.labels)

    def test_parse_errors_carry_line_numbers(self):
        """Test malformed rows."""
        cases = [
            ("1,2,0\n1,x,0\n", 2),
            ("1,2,0\n1,2\n", 2),
            ("1,2,0.5\n", 1),
            ("1,nan,0\n", 1),
        ]
        for text, line in cases:
            self._write(text)
            with self.assertRaises(DatasetParseError) as ctx:
                load_csv(self.path, CsvSchema(num_classes=2))
            self.assertEqual(ctx.exception.line_number, line)

    def test_label_out_of_range(self):
        """Test labels beyond the declared class count."""
        self._write("1,2,0\n1,2,5\n")
        with self.assertRaises(ValidationError):
            load_csv(self.path, CsvSchema(num_classes=2))

    def test_empty_and_missing_files(self):
        """Test empty and missing files."""
        self._write("")
        with self.assertRaises(ValidationError):
            load_csv(self.path, CsvSchema(num_classes=2))
        with self.assertRaises(FileNotFoundError):
            load_csv(os.path.join(self.tmp.name, "missing.csv"), CsvSchema(num_classes=2))


if __name__ == '__main__':
    unittest.main()
