"""Metrics JSON report across seeds."""
import json
from pathlib import Path
from typing import Any, Dict, Mapping, Optional, Union

import numpy as np

from .accuracy import AccuracyMatrix, aia, faa, forgetting, stage_accuracies


def seed_summary(S: AccuracyMatrix) -> Dict[str, Any]:
    """Summary of one seed: S, FAA, AIA, forgetting and A_t."""
    return {
        "S": S.to_lists(),
        "FAA": faa(S),
        "AIA": aia(S),
        "forgetting": {str(tau): drop for tau, drop in forgetting(S).items()},
        "A_t": [float(a) for a in stage_accuracies(S)],
    }


def metrics_report(matrices: Mapping[int, AccuracyMatrix],
                   extras: Optional[Mapping[int, Mapping[str, Any]]] = None) -> Dict[str, Any]:
    """Build the report `{per_seed: {...}, mean: {...}, std: {...}}`.

    Args:
        matrices: Accuracy matrix per seed.
        extras: Optional additional fields merged into each seed's entry
            (residual diagnostics, communication and parameter counts).

    Returns:
        A JSON-serialisable dict; mean and std (population) cover FAA and AIA.
    """
    per_seed = {}
    for seed, S in matrices.items():
        entry = seed_summary(S)
        if extras and seed in extras:
            entry.update(extras[seed])
        per_seed[str(seed)] = entry
    report: Dict[str, Any] = {"per_seed": per_seed, "mean": {}, "std": {}}
    for key in ("FAA", "AIA"):
        values = np.array([entry[key] for entry in per_seed.values()])
        report["mean"][key] = float(values.mean())
        report["std"][key] = float(values.std())
    return report


def write_report(report: Mapping[str, Any], path: Union[str, Path]) -> None:
    with open(path, "w", encoding="utf-8") as f:
        json.dump(report, f, indent=2, sort_keys=True)
        f.write("\n")
