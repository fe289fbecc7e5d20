"""Non-IID client partitioning of each task's training samples.

Two label-imbalance schemes are supported:

* quantity(alpha): every client owns exactly alpha distinct labels of the
  task, and each label's samples are divided evenly among its owners;
* dirichlet(beta): each class is spread over the clients in proportions
  drawn from Dirichlet(beta, ..., beta).

Inputs are sorted by sample index before any draw, so the result does not
depend on the order in which samples are passed in.
"""
import logging
from dataclasses import dataclass
from typing import List, Sequence, Tuple

import numpy as np

from ..config import QUANTITY_MAX_ATTEMPTS
from ..datagen import LabeledDataset
from ..utils import rng_utils
from ..utils.error_utils import ConfigurationError, ValidationError
from .tasks import TaskSequence

logger = logging.getLogger(__name__)

SCHEMES = ("quantity", "dirichlet")


@dataclass(frozen=True, eq=False)
class PartitionPlan:
    """Sample indices of every client for every task.

    Attributes:
        scheme: "quantity" or "dirichlet".
        param: alpha (quantity) or beta (dirichlet).
        shards: `shards[t][k]` is the sorted index array of client k in task t.
        labels: Label of every sample of the partitioned dataset.
        num_classes: Total class count.
    """
    scheme: str
    param: float
    shards: Tuple[Tuple[np.ndarray, ...], ...]
    labels: np.ndarray
    num_classes: int

    @property
    def num_tasks(self) -> int:
        return len(self.shards)

    @property
    def num_clients(self) -> int:
        return len(self.shards[0]) if self.shards else 0

    def shard_sizes(self, t: int) -> List[int]:
        return [len(shard) for shard in self.shards[t]]


def _sorted_samples(indices: Sequence[int], labels: Sequence[int]) -> Tuple[np.ndarray, np.ndarray]:
    idx = np.asarray(indices, dtype=np.int64)
    lab = np.asarray(labels, dtype=np.int64)
    if idx.shape != lab.shape:
        raise ValidationError("one label per sample index required")
    if len(np.unique(idx)) != len(idx):
        raise ValidationError("sample indices must be unique")
    order = np.argsort(idx, kind="stable")
    return idx[order], lab[order]


def _draw_owners(classes: np.ndarray, num_clients: int, alpha: int,
                 rng: np.random.Generator) -> List[List[int]]:
    """Label sets of size alpha per client that jointly cover every class."""
    for attempt in range(QUANTITY_MAX_ATTEMPTS):
        owned: List[List[int]] = [[] for _ in range(num_clients)]
        for i, c in enumerate(rng.permutation(classes)):
            owned[i % num_clients].append(int(c))
        for labels in owned:
            free = np.setdiff1d(classes, labels)
            labels.extend(int(c) for c in rng.choice(free, size=alpha - len(labels), replace=False))
        covered = set().union(*map(set, owned))
        if covered == set(classes.tolist()) and all(len(set(o)) == alpha for o in owned):
            return [sorted(o) for o in owned]
        logger.warning(f"Label ownership draw {attempt} left labels uncovered; redrawing")
    raise ConfigurationError(f"no covering label assignment after {QUANTITY_MAX_ATTEMPTS} draws",
                             field="clients.alpha")


def quantity_partition(indices: Sequence[int], labels: Sequence[int], num_clients: int,
                       alpha: int, seed: int, task: int = 0) -> List[np.ndarray]:
    """Give every client the samples of exactly `alpha` distinct labels.

    Ownership is dealt cover-first: a shuffled round-robin deal hands every
    label to one client, then each client draws further distinct labels until
    it owns `alpha`. A label's samples, shuffled, are split into equal
    chunks over its owners in client order; the first owners take one extra
    sample each when the split is uneven. A label with fewer samples than
    owners is rejected, since some owner would hold none of it.

    Args:
        indices: Sample indices of the task's training rows.
        labels: Label of each index.
        num_clients: Number of clients K.
        alpha: Labels per client.
        seed: Experiment seed.
        task: Task index, keying the random stream.

    Returns:
        One sorted index array per client.

    Raises:
        ConfigurationError: If alpha is out of range, K * alpha cannot
            cover the task's labels, or a label has fewer samples than the
            clients drawn to own it.
    """
    idx, lab = _sorted_samples(indices, labels)
    classes = np.unique(lab)
    if num_clients < 1:
        raise ConfigurationError(f"must be >= 1, got {num_clients}", field="clients.num_clients")
    if not 1 <= alpha <= len(classes):
        raise ConfigurationError(f"alpha {alpha} outside [1, {len(classes)}] labels per task",
                                 field="clients.alpha")
    if num_clients * alpha < len(classes):
        raise ConfigurationError(
            f"{num_clients} clients x {alpha} labels cannot cover {len(classes)} labels", field="clients.alpha"
        )
    rng = rng_utils.stream(seed, rng_utils.PARTITION, task)
    owned = _draw_owners(classes, num_clients, alpha, rng)

    parts: List[List[np.ndarray]] = [[] for _ in range(num_clients)]
    for c in classes:
        owners = [k for k in range(num_clients) if int(c) in owned[k]]
        samples = rng.permutation(idx[lab == c])
        if len(samples) < len(owners):
            raise ConfigurationError(
                f"label {int(c)} has {len(samples)} samples for {len(owners)} owners", field="clients.alpha"
            )
        for k, chunk in zip(owners, np.array_split(samples, len(owners))):
            parts[k].append(chunk)
    return [np.sort(np.concatenate(p)) if p else np.empty(0, dtype=np.int64) for p in parts]


def _largest_remainder(total: int, proportions: np.ndarray) -> np.ndarray:
    raw = total * proportions
    counts = np.floor(raw).astype(np.int64)
    remainder = total - int(counts.sum())
    frac = raw - counts
    order = sorted(range(len(proportions)), key=lambda k: (-frac[k], k))
    for k in order[:remainder]:
        counts[k] += 1
    return counts


def dirichlet_partition(indices: Sequence[int], labels: Sequence[int], num_clients: int,
                        beta: float, seed: int, task: int = 0) -> List[np.ndarray]:
    """Spread every class over the clients in Dirichlet(beta) proportions.

    Per class, counts are the rounded proportions with largest-remainder
    correction (ties to the lower client index), so every class total is
    preserved exactly. Empty shards are allowed.

    Raises:
        ConfigurationError: If beta is not positive.
    """
    if not beta > 0.0:
        raise ConfigurationError(f"must be > 0, got {beta}", field="clients.beta")
    if num_clients < 1:
        raise ConfigurationError(f"must be >= 1, got {num_clients}", field="clients.num_clients")
    idx, lab = _sorted_samples(indices, labels)
    rng = rng_utils.stream(seed, rng_utils.PARTITION, task)

    parts: List[List[np.ndarray]] = [[] for _ in range(num_clients)]
    for c in np.unique(lab):
        proportions = rng.dirichlet(np.full(num_clients, beta))
        if not np.all(np.isfinite(proportions)) or proportions.sum() <= 0.0:
            proportions = np.zeros(num_clients)
            proportions[rng.integers(num_clients)] = 1.0
        samples = rng.permutation(idx[lab == c])
        counts = _largest_remainder(len(samples), proportions / proportions.sum())
        bounds = np.concatenate([[0], np.cumsum(counts)])
        for k in range(num_clients):
            parts[k].append(samples[bounds[k]:bounds[k + 1]])
    return [np.sort(np.concatenate(p)) if p else np.empty(0, dtype=np.int64) for p in parts]


def build_plan(dataset: LabeledDataset, tasks: TaskSequence, num_clients: int, scheme: str,
               param: float, seed: int) -> PartitionPlan:
    """Partition the training rows of every task of `dataset`.

    Raises:
        ConfigurationError: On an unknown scheme or an infeasible parameter.
    """
    if scheme not in SCHEMES:
        raise ConfigurationError(f"expected one of {SCHEMES}, got {scheme!r}", field="clients.scheme")
    shards = []
    for t, classes in enumerate(tasks.tasks):
        rows = dataset.indices("train", classes)
        if scheme == "quantity":
            parts = quantity_partition(rows, dataset.labels[rows], num_clients, int(param), seed, t)
        else:
            parts = dirichlet_partition(rows, dataset.labels[rows], num_clients, float(param), seed, t)
        logger.info(f"Task {t}: {scheme}({param}) shard sizes {[len(p) for p in parts]}")
        shards.append(tuple(parts))
    return PartitionPlan(scheme=scheme, param=param, shards=tuple(shards),
                         labels=dataset.labels, num_classes=dataset.num_classes)
