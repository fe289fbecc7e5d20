"""Summaries of a partition plan (client x class count matrices)."""
from dataclasses import dataclass

import numpy as np

from .schemes import PartitionPlan


@dataclass(frozen=True, eq=False)
class PartitionStats:
    """Per-task count matrices and per-client label-skew measures.

    Attributes:
        counts: Array of shape (T, K, C); `counts[t, k, c]` samples of class c
            held by client k in task t.
    """
    counts: np.ndarray

    @property
    def client_totals(self) -> np.ndarray:
        """(T, K) shard sizes."""
        return self.counts.sum(axis=2)

    @property
    def class_totals(self) -> np.ndarray:
        """(T, C) partitioned samples per class."""
        return self.counts.sum(axis=1)

    def _distributions(self) -> np.ndarray:
        totals = self.client_totals[..., None]
        return np.divide(self.counts, totals, out=np.zeros(self.counts.shape), where=totals > 0)

    @property
    def entropy(self) -> np.ndarray:
        """(T, K) natural-log entropy of each client's label distribution; 0 when empty."""
        p = self._distributions()
        logs = np.log(p, out=np.zeros_like(p), where=p > 0)
        return -(p * logs).sum(axis=2)

    @property
    def gini(self) -> np.ndarray:
        """(T, K) Gini impurity 1 - sum p^2; 0 when empty."""
        p = self._distributions()
        impurity = 1.0 - (p * p).sum(axis=2)
        return np.where(self.client_totals > 0, impurity, 0.0)

    def distinct_labels(self) -> np.ndarray:
        """(T, K) number of classes with at least one sample."""
        return (self.counts > 0).sum(axis=2)


def partition_stats(plan: PartitionPlan) -> PartitionStats:
    counts = np.zeros((plan.num_tasks, plan.num_clients, plan.num_classes), dtype=np.int64)
    for t, shards in enumerate(plan.shards):
        for k, shard in enumerate(shards):
            counts[t, k] = np.bincount(plan.labels[shard], minlength=plan.num_classes)
    return PartitionStats(counts=counts)
