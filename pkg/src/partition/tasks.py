"""Class-incremental task construction and the per-task validation split."""
import logging
from dataclasses import dataclass
from typing import List, Set, Tuple

import numpy as np

from ..datagen import LabeledDataset
from ..utils import rng_utils
from ..utils.error_utils import ConfigurationError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class TaskSequence:
    """Disjoint class sets presented one task after another.

    Attributes:
        class_order: Seeded permutation of all classes.
        tasks: Class set of each task, consecutive chunks of `class_order`.
        seed: Seed that produced the order.
    """
    class_order: Tuple[int, ...]
    tasks: Tuple[Tuple[int, ...], ...]
    seed: int

    @property
    def num_tasks(self) -> int:
        return len(self.tasks)

    def seen_classes(self, t: int) -> List[int]:
        """Classes of tasks 0..t, sorted."""
        seen: Set[int] = set()
        for classes in self.tasks[:t + 1]:
            seen.update(classes)
        return sorted(seen)


def split_tasks(num_classes: int, num_tasks: int, seed: int) -> TaskSequence:
    """Split a seeded permutation of the classes into equal consecutive tasks.

    Raises:
        ConfigurationError: If `num_tasks` does not divide `num_classes`.
    """
    if num_tasks < 1 or num_classes < 1:
        raise ConfigurationError(f"need >= 1 task and class, got {num_tasks} and {num_classes}",
                                 field="tasks.num_tasks")
    if num_classes % num_tasks:
        raise ConfigurationError(f"{num_tasks} tasks do not divide {num_classes} classes evenly",
                                 field="tasks.num_tasks")
    order = rng_utils.stream(seed, rng_utils.TASK_ORDER).permutation(num_classes)
    size = num_classes // num_tasks
    tasks = tuple(tuple(int(c) for c in order[i * size:(i + 1) * size]) for i in range(num_tasks))
    logger.info(f"Class order {order.tolist()} split into {num_tasks} tasks")
    return TaskSequence(class_order=tuple(int(c) for c in order), tasks=tasks, seed=seed)


def train_val_split(dataset: LabeledDataset, val_fraction: float, seed: int) -> LabeledDataset:
    """Re-tag a stratified share of each class's training rows as validation.

    For every class, round(n * val_fraction) of its n training rows (drawn
    from a seeded permutation of the sorted rows) become "val"; test rows are
    untouched.

    Raises:
        ConfigurationError: If `val_fraction` is outside [0, 1).
    """
    if not 0.0 <= val_fraction < 1.0:
        raise ConfigurationError(f"must lie in [0, 1), got {val_fraction}", field="dataset.val_fraction")
    rng = rng_utils.stream(seed, rng_utils.TRAIN_VAL_SPLIT)
    splits = dataset.splits.copy()
    for c in range(dataset.num_classes):
        rows = dataset.indices("train", [c])
        n_val = int(np.floor(len(rows) * val_fraction + 0.5))
        if n_val:
            splits[rng.permutation(rows)[:n_val]] = "val"
    return dataset.with_splits(splits)
