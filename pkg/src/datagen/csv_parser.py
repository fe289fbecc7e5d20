"""CSV parser for external tabular datasets.

This module provides functionality for reading labelled datasets from
comma-separated files: float feature columns followed by one integer label
column, with an optional single header row.
"""
import csv
import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import List, Union

import numpy as np

from ..numkit import Tensor
from ..utils.error_utils import DatasetParseError, ValidationError
from .models import SPLITS, LabeledDataset

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class CsvSchema:
    """Layout of a dataset file.

    Attributes:
        num_classes: Declared class count; labels must lie in [0, num_classes).
        has_header: Whether the first line is a header to skip.
        split: Split tag given to every row of the file.
    """
    num_classes: int
    has_header: bool = False
    split: str = "train"


class CsvDatasetParser:
    """Parser for labelled CSV files.

    Attributes:
        schema: The expected file layout.
    """

    def __init__(self, schema: CsvSchema):
        """Initialize the parser.

        Args:
            schema: The expected file layout.
        """
        if schema.split not in SPLITS:
            raise ValidationError(f"unknown split tag {schema.split!r}")
        self.schema = schema

    def _parse_row(self, row: List[str], line_number: int, width: int) -> List[float]:
        if len(row) != width:
            raise DatasetParseError(f"expected {width} columns, found {len(row)}", line_number)
        try:
            values = [float(cell) for cell in row]
        except ValueError as e:
            raise DatasetParseError(str(e), line_number)
        if not all(math.isfinite(v) for v in values):
            raise DatasetParseError("non-finite feature value", line_number)
        label = values[-1]
        if not label.is_integer():
            raise DatasetParseError(f"label {row[-1]!r} is not an integer", line_number)
        if not 0 <= label < self.schema.num_classes:
            raise ValidationError(
                f"line {line_number}: label {int(label)} outside [0, {self.schema.num_classes})"
            )
        return values

    def parse(self, path: Union[str, Path]) -> LabeledDataset:
        """Parse a dataset file, preserving row order.

        Args:
            path: Path to the CSV file.

        Returns:
            The parsed dataset.

        Raises:
            FileNotFoundError: If the file does not exist.
            DatasetParseError: On malformed rows, with the 1-based line number.
            ValidationError: On labels outside the declared range.
        """
        rows: List[List[float]] = []
        width = None
        with open(path, "r", encoding="utf-8", newline="") as f:
            for line_number, row in enumerate(csv.reader(f), start=1):
                if line_number == 1 and self.schema.has_header:
                    continue
                if not row or all(not cell.strip() for cell in row):
                    continue
                if width is None:
                    width = len(row)
                    if width < 2:
                        raise DatasetParseError("need at least one feature and a label", line_number)
                rows.append(self._parse_row(row, line_number, width))
        if not rows:
            raise ValidationError(f"{path}: no data rows")
        table = np.asarray(rows, dtype=np.float64)
        logger.info(f"Loaded {len(rows)} rows with {width - 1} features from {path}")
        return LabeledDataset(
            features=Tensor(table[:, :-1]),
            labels=table[:, -1].astype(np.int64),
            num_classes=self.schema.num_classes,
            splits=np.full(len(rows), self.schema.split),
        )


def load_csv(path: Union[str, Path], schema: CsvSchema) -> LabeledDataset:
    """Load a labelled dataset from a CSV file; see `CsvDatasetParser.parse`."""
    return CsvDatasetParser(schema).parse(path)


def write_csv(dataset: LabeledDataset, path: Union[str, Path], header: bool = False) -> None:
    """Write a dataset in the format `load_csv` reads.

    Floats are written with `repr`, so loading the file back yields
    identical values.
    """
    with open(path, "w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f)
        if header:
            writer.writerow([f"x{i}" for i in range(dataset.input_dim)] + ["label"])
        for features, label in zip(dataset.features.data, dataset.labels):
            writer.writerow([repr(float(v)) for v in features] + [int(label)])
