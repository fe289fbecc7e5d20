"""Class-incremental accuracy bookkeeping.

`S[t][tau]` is the accuracy on task tau's test classes after training task
t (tau <= t). Entries are exact fractions; floats appear only in reports.

    A_t = mean over tau <= t of S[t][tau]
    FAA = A_T
    AIA = mean over t of A_t
"""
from fractions import Fraction
from typing import Dict, List, Optional, Sequence, Union

import numpy as np

from ..datagen import LabeledDataset
from ..model import predict
from ..utils.error_utils import UsageError, ValidationError

Number = Union[Fraction, float, int]


def _as_fraction(value: Number) -> Fraction:
    if isinstance(value, Fraction):
        return value
    if isinstance(value, float):
        return Fraction(repr(value))
    return Fraction(value)


class AccuracyMatrix:
    """Lower-triangular matrix of task accuracies."""

    def __init__(self, num_tasks: int):
        if num_tasks < 1:
            raise ValidationError(f"an accuracy matrix needs >= 1 task, got {num_tasks}")
        self.num_tasks = num_tasks
        self._rows: List[List[Optional[Fraction]]] = [[None] * (t + 1) for t in range(num_tasks)]

    @classmethod
    def from_rows(cls, rows: Sequence[Sequence[Number]]) -> "AccuracyMatrix":
        """Build a matrix from its rows, e.g. `[[0.9], [0.8, 0.6]]`."""
        matrix = cls(len(rows))
        for t, row in enumerate(rows):
            if len(row) != t + 1:
                raise ValidationError(f"row {t} must hold {t + 1} entries, got {len(row)}")
            for tau, value in enumerate(row):
                matrix.set(t, tau, value)
        return matrix

    def set(self, t: int, tau: int, value: Number) -> None:
        if not 0 <= tau <= t < self.num_tasks:
            raise UsageError(f"entry ({t}, {tau}) outside a lower-triangular {self.num_tasks}-task matrix")
        value = _as_fraction(value)
        if not 0 <= value <= 1:
            raise ValidationError(f"accuracy {float(value)} outside [0, 1]")
        self._rows[t][tau] = value

    def __getitem__(self, key) -> Fraction:
        t, tau = key
        value = self._rows[t][tau]
        if value is None:
            raise ValidationError(f"accuracy ({t}, {tau}) not recorded yet")
        return value

    def is_complete(self) -> bool:
        return all(v is not None for row in self._rows for v in row)

    def row(self, t: int) -> List[Fraction]:
        return [self[t, tau] for tau in range(t + 1)]

    def to_lists(self) -> List[List[float]]:
        """Rows as floats; missing entries are omitted."""
        return [[float(v) for v in row if v is not None] for row in self._rows]

    def __eq__(self, other) -> bool:
        return isinstance(other, AccuracyMatrix) and self._rows == other._rows

    def __repr__(self) -> str:
        return f"AccuracyMatrix({self.to_lists()})"


def evaluate_task(model, dataset: LabeledDataset) -> Fraction:
    """Fraction of correctly classified rows.

    Args:
        model: A `ModelState`; prediction is the argmax over all C logits,
            ties resolved to the lowest class index.
        dataset: Test rows of one task.

    Raises:
        ValidationError: If the dataset is empty.
    """
    if len(dataset) == 0:
        raise ValidationError("cannot evaluate on an empty test set")
    correct = int(np.sum(predict(model, dataset.features) == dataset.labels))
    return Fraction(correct, len(dataset))


def _require_complete(S: AccuracyMatrix) -> None:
    if not S.is_complete():
        raise ValidationError("accuracy matrix is incomplete")


def stage_accuracies(S: AccuracyMatrix) -> List[Fraction]:
    """A_t for every stage t."""
    _require_complete(S)
    return [sum(S.row(t), Fraction(0)) / (t + 1) for t in range(S.num_tasks)]


def faa(S: AccuracyMatrix) -> float:
    """Final average accuracy A_T."""
    return float(stage_accuracies(S)[-1])


def aia(S: AccuracyMatrix) -> float:
    """Average incremental accuracy, the mean of A_t over all stages."""
    stages = stage_accuracies(S)
    return float(sum(stages, Fraction(0)) / len(stages))


def forgetting(S: AccuracyMatrix) -> Dict[int, float]:
    """Drop of every earlier task from its best accuracy to its final one.

    Returns:
        `{tau: max_{t < T} S[t][tau] - S[T][tau]}` clipped at zero, for every
        task tau before the last; empty for a single task.
    """
    _require_complete(S)
    last = S.num_tasks - 1
    drops = {}
    for tau in range(last):
        best = max(S[t, tau] for t in range(tau, last))
        drops[tau] = float(max(best - S[last, tau], Fraction(0)))
    return drops
