"""Seeded Gaussian-blob datasets."""
import logging
from typing import Optional

import numpy as np

from ..numkit import Tensor
from ..utils import rng_utils
from ..utils.error_utils import ConfigurationError
from .models import LabeledDataset

logger = logging.getLogger(__name__)


def make_blobs(num_classes: int, per_class: int, input_dim: int, separation: float,
               noise: float, seed: int, test_per_class: Optional[int] = None) -> LabeledDataset:
    """Generate one isotropic Gaussian blob per class.

    Class means are random directions scaled to length `separation`; every
    sample is its class mean plus Normal(0, noise^2) per coordinate. Rows are
    ordered class by class, training rows first within each class.

    Args:
        num_classes: Number of classes C.
        per_class: Training samples per class.
        input_dim: Feature dimension.
        separation: Radius of the sphere holding the class means.
        noise: Per-coordinate noise standard deviation.
        seed: Dataset seed.
        test_per_class: Test samples per class; defaults to
            max(1, per_class // 4).

    Returns:
        A dataset tagged "train" and "test".

    Raises:
        ConfigurationError: On non-positive sizes or separation, or negative noise.
    """
    if separation <= 0.0:
        raise ConfigurationError(f"must be > 0, got {separation}", field="dataset.separation")
    if noise < 0.0:
        raise ConfigurationError(f"must be >= 0, got {noise}", field="dataset.noise")
    if num_classes < 1 or per_class < 1 or input_dim < 1:
        raise ConfigurationError("num_classes, per_class and input_dim must be >= 1", field="dataset")
    if test_per_class is None:
        test_per_class = max(1, per_class // 4)
    if test_per_class < 1:
        raise ConfigurationError("every class needs a test sample", field="dataset.test_per_class")

    rng = rng_utils.stream(seed, rng_utils.DATASET)
    directions = rng.normal(size=(num_classes, input_dim))
    means = separation * directions / np.linalg.norm(directions, axis=1, keepdims=True)

    rows, labels, splits = [], [], []
    total = per_class + test_per_class
    for c in range(num_classes):
        rows.append(means[c] + rng.normal(0.0, noise, size=(total, input_dim)))
        labels.extend([c] * total)
        splits.extend(["train"] * per_class + ["test"] * test_per_class)

    logger.debug(f"Generated {num_classes} blobs x {total} samples in {input_dim} dims")
    return LabeledDataset(
        features=Tensor(np.vstack(rows)),
        labels=np.asarray(labels),
        num_classes=num_classes,
        splits=np.asarray(splits),
    )
