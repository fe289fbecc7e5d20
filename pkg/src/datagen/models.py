"""Dataset models for the fedtalora project.

This module defines the labelled dataset that flows through partitioning,
local training and evaluation.
"""
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np

from ..numkit import Tensor
from ..utils.error_utils import ShapeError, ValidationError

SPLITS = ("train", "val", "test")


@dataclass(frozen=True, eq=False)
class LabeledDataset:
    """Feature rows with integer class labels and a split tag per row.

    Attributes:
        features: N×input_dim tensor.
        labels: N class indices in [0, num_classes).
        num_classes: Total class count C.
        splits: N tags, each one of "train", "val", "test".
    """
    features: Tensor
    labels: np.ndarray
    num_classes: int
    splits: Optional[np.ndarray] = field(default=None)

    def __post_init__(self):
        labels = np.asarray(self.labels, dtype=np.int64).reshape(-1)
        labels.flags.writeable = False
        object.__setattr__(self, "labels", labels)
        if len(self.features.shape) != 2 or self.features.shape[0] != labels.shape[0]:
            raise ShapeError("one label per feature row required", self.features.shape, labels.shape)
        if labels.size and (labels.min() < 0 or labels.max() >= self.num_classes):
            raise ValidationError(f"labels must lie in [0, {self.num_classes})")
        splits = np.full(labels.shape, "train") if self.splits is None else np.asarray(self.splits, dtype=str)
        if splits.shape != labels.shape:
            raise ShapeError("one split tag per row required", splits.shape, labels.shape)
        unknown = set(np.unique(splits)) - set(SPLITS)
        if unknown:
            raise ValidationError(f"unknown split tags {sorted(unknown)}")
        splits.flags.writeable = False
        object.__setattr__(self, "splits", splits)

    def __len__(self) -> int:
        return int(self.labels.shape[0])

    @property
    def input_dim(self) -> int:
        return self.features.shape[1]

    def indices(self, split: str, classes: Optional[Iterable[int]] = None) -> np.ndarray:
        """Sorted row indices with the given split tag, optionally restricted to classes."""
        mask = self.splits == split
        if classes is not None:
            mask &= np.isin(self.labels, np.fromiter(classes, dtype=np.int64))
        return np.flatnonzero(mask)

    def subset(self, indices: Sequence[int]) -> "LabeledDataset":
        idx = np.asarray(indices, dtype=np.int64)
        return LabeledDataset(
            features=Tensor(self.features.data[idx]),
            labels=self.labels[idx],
            num_classes=self.num_classes,
            splits=self.splits[idx],
        )

    def with_splits(self, splits: np.ndarray) -> "LabeledDataset":
        return LabeledDataset(self.features, self.labels, self.num_classes, splits)

    def check_test_coverage(self) -> None:
        """Require at least one test sample for every class.

        Raises:
            ValidationError: Naming the classes without test samples.
        """
        present = set(np.unique(self.labels[self.splits == "test"]).tolist())
        missing = [c for c in range(self.num_classes) if c not in present]
        if missing:
            raise ValidationError(f"classes without test samples: {missing}")


def concat_datasets(first: LabeledDataset, second: LabeledDataset) -> LabeledDataset:
    """Rows of `first` followed by the rows of `second`."""
    if first.num_classes != second.num_classes:
        raise ValidationError(f"class counts differ: {first.num_classes} vs {second.num_classes}")
    if first.input_dim != second.input_dim:
        raise ShapeError("feature widths differ", first.features.shape, second.features.shape)
    return LabeledDataset(
        features=Tensor(np.vstack([first.features.data, second.features.data])),
        labels=np.concatenate([first.labels, second.labels]),
        num_classes=first.num_classes,
        splits=np.concatenate([first.splits, second.splits]),
    )
