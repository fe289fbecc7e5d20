"""Round traces and the CSV files written by a run.

`trace.csv` holds one row per (seed, task, round) with these columns:

    seed, strategy, task, round, participants, mean_client_loss,
    client_losses, residual_norm_total, residual_norm_max, residual_applied,
    test_accuracy, val_accuracy, bytes_up, bytes_down, grad_norm_sq

Floats are written with `repr` so that identical runs give identical files.
Wall time is kept in memory only.
"""
import csv
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Union

import numpy as np

from ..partition import PartitionStats

TRACE_COLUMNS = [
    "seed", "strategy", "task", "round", "participants", "mean_client_loss", "client_losses",
    "residual_norm_total", "residual_norm_max", "residual_applied", "test_accuracy",
    "val_accuracy", "bytes_up", "bytes_down", "grad_norm_sq",
]


@dataclass
class RoundTrace:
    """Diagnostics of one communication round.

    Attributes:
        seed: Experiment seed.
        strategy: Aggregation strategy.
        task: Task index t.
        round: Round index r within the task.
        client_losses: Final local loss per client, None when skipped.
        residual_norms: Frobenius norm of W_res per adapted matrix.
        residual_applied: Whether W_res was folded into the bases.
        test_accuracy: Global test accuracy on the seen classes.
        val_accuracy: Global validation accuracy on the seen classes.
        bytes_up: Float64 payload uploaded by all clients.
        bytes_down: Float64 payload downloaded by all clients.
        grad_norm_sq: Squared global gradient norm at the start of the round.
        wall_time: Seconds spent in the round.
    """
    seed: int
    strategy: str
    task: int
    round: int
    client_losses: List[Optional[float]] = field(default_factory=list)
    residual_norms: Dict[str, float] = field(default_factory=dict)
    residual_applied: bool = False
    test_accuracy: Fraction = Fraction(0)
    val_accuracy: Optional[Fraction] = None
    bytes_up: int = 0
    bytes_down: int = 0
    grad_norm_sq: Optional[float] = None
    wall_time: float = 0.0

    @property
    def participants(self) -> int:
        return sum(loss is not None for loss in self.client_losses)

    @property
    def residual_norm_total(self) -> float:
        return float(sum(self.residual_norms[name] for name in sorted(self.residual_norms)))

    def row(self) -> Dict[str, str]:
        losses = [loss for loss in self.client_losses if loss is not None]
        return {
            "seed": str(self.seed),
            "strategy": self.strategy,
            "task": str(self.task),
            "round": str(self.round),
            "participants": str(self.participants),
            "mean_client_loss": repr(float(np.mean(losses))) if losses else "",
            "client_losses": ";".join("" if loss is None else repr(loss) for loss in self.client_losses),
            "residual_norm_total": repr(self.residual_norm_total),
            "residual_norm_max": repr(max(self.residual_norms.values(), default=0.0)),
            "residual_applied": str(int(self.residual_applied)),
            "test_accuracy": repr(float(self.test_accuracy)),
            "val_accuracy": "" if self.val_accuracy is None else repr(float(self.val_accuracy)),
            "bytes_up": str(self.bytes_up),
            "bytes_down": str(self.bytes_down),
            "grad_norm_sq": "" if self.grad_norm_sq is None else repr(self.grad_norm_sq),
        }


@dataclass
class TaskRecord:
    """Adapter fingerprints at the boundaries of one task."""
    task: int
    classes: List[int]
    start_fingerprint: str
    end_fingerprint: str


def write_trace_csv(traces: Iterable[RoundTrace], path: Union[str, Path]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as f:
        writer = csv.DictWriter(f, fieldnames=TRACE_COLUMNS, lineterminator="\n")
        writer.writeheader()
        for trace in traces:
            writer.writerow(trace.row())


def partition_columns(num_classes: int) -> List[str]:
    return ["seed", "client"] + [f"class_{c}" for c in range(num_classes)]


def write_partition_csvs(stats_by_seed: Dict[int, PartitionStats], output_dir: Union[str, Path]) -> List[Path]:
    """Write one `partition_t<k>.csv` per task: a (client x class) count row per seed and client."""
    output_dir = Path(output_dir)
    first = next(iter(stats_by_seed.values()))
    num_tasks, _, num_classes = first.counts.shape
    paths = []
    for t in range(num_tasks):
        path = output_dir / f"partition_t{t}.csv"
        with open(path, "w", encoding="utf-8", newline="") as f:
            writer = csv.writer(f, lineterminator="\n")
            writer.writerow(partition_columns(num_classes))
            for seed, stats in stats_by_seed.items():
                for k, counts in enumerate(stats.counts[t]):
                    writer.writerow([seed, k] + [int(c) for c in counts])
        paths.append(path)
    return paths
