"""Command-line interface for the fedtalora simulator.

Sub-commands:

    run                 run one experiment (or every point of its sweep)
    verify              randomised identity suite, pass/fail table
    partition-preview   write the (client x class) counts of every task
    ablate              compare strategies on shared seeds

Exit codes: 0 success, 1 runtime or verification failure, 2 configuration
error.
"""
import argparse
import csv
import logging
import sys
from pathlib import Path
from typing import Dict, List, Optional, Sequence

import numpy as np
from tabulate import tabulate

from ..config import DEFAULT_WORKERS, OUTPUT_DIR, VERSION
from ..fedsim import (
    STRATEGIES,
    ExperimentConfig,
    ExperimentResult,
    ablation_suite,
    apply_overrides,
    expand_sweep,
    load_config,
    prepare_seed,
    run_experiment,
    save_config,
    write_partition_csvs,
)
from ..partition import partition_stats
from ..utils.error_utils import EXIT_FAILURE, EXIT_OK, ConfigurationError, handle_cli_errors
from .manifest import CONFIG_FILE, MANIFEST_FILE, RunManifest, file_inventory, run_lock
from .verify import run_identity_suite

logger = logging.getLogger(__name__)

ABLATION_FILE = "ablation.csv"
ABLATION_COLUMNS = [
    "variant", "seed", "FAA", "AIA", "params_lora", "params_head", "params_backbone",
    "params_total", "bytes_up", "bytes_down", "residual_norm_cumulative",
]


def _load(args: argparse.Namespace) -> ExperimentConfig:
    config = load_config(args.config)
    return apply_overrides(config, args.set or [], getattr(args, "strategy", None))


def _output_dir(args: argparse.Namespace, suffix: str = "") -> Path:
    if args.output:
        return Path(args.output)
    return OUTPUT_DIR / f"{Path(args.config).stem}{suffix}"


def _begin(config: ExperimentConfig, output_dir: Path, command: Sequence[str]) -> RunManifest:
    manifest = RunManifest.create(config, output_dir, command)
    manifest.write(output_dir / MANIFEST_FILE)
    save_config(config, output_dir / CONFIG_FILE)
    return manifest


def _finish(manifest: RunManifest, output_dir: Path) -> None:
    manifest.files = file_inventory(output_dir)
    manifest.write(output_dir / MANIFEST_FILE)
    logger.info(f"Wrote {len(manifest.files)} files to {output_dir}")


def _summary_table(result: ExperimentResult) -> str:
    report = result.report()
    rows = [[seed, f"{entry['FAA']:.4f}", f"{entry['AIA']:.4f}"]
            for seed, entry in report["per_seed"].items()]
    rows.append(["mean", f"{report['mean']['FAA']:.4f}", f"{report['mean']['AIA']:.4f}"])
    return tabulate(rows, headers=["seed", "FAA", "AIA"], tablefmt="grid")


@handle_cli_errors
def cmd_run(args: argparse.Namespace) -> int:
    config = _load(args)
    if config.sweep and not args.sweep:
        raise ConfigurationError("config declares a sweep; pass --sweep to expand it", field="sweep")
    runs = expand_sweep(config) if args.sweep else [("", config)]
    for _, run_config in runs:
        run_config.validate()

    root = _output_dir(args)
    for label, run_config in runs:
        with run_lock(root / label if label else root) as output_dir:
            manifest = _begin(run_config, output_dir, args.command_line)
            result = run_experiment(run_config, output_dir, workers=args.workers,
                                    progress=not args.no_progress)
            _finish(manifest, output_dir)
        print(f"{label or run_config.strategy}:")
        print(_summary_table(result))
    return EXIT_OK


@handle_cli_errors
def cmd_verify(args: argparse.Namespace) -> int:
    checks = run_identity_suite(trials=args.trials, max_k=args.max_k, seed=args.seed,
                                gradient_trials=args.gradient_trials, inject_fault=args.inject_fault)
    print(tabulate([c.row() for c in checks],
                   headers=["identity", "trials", "worst error", "tolerance", "result"],
                   tablefmt="grid"))
    return EXIT_OK if all(c.passed for c in checks) else EXIT_FAILURE


@handle_cli_errors
def cmd_partition_preview(args: argparse.Namespace) -> int:
    config = _load(args).validate()
    stats = {}
    for seed in config.seeds:
        context = prepare_seed(config, seed)
        stats[seed] = partition_stats(context.plan)
        logger.info(f"Seed {seed}: task classes {[list(c) for c in context.tasks.tasks]}")

    with run_lock(_output_dir(args, "_partition")) as output_dir:
        manifest = _begin(config, output_dir, args.command_line)
        write_partition_csvs(stats, output_dir)
        _finish(manifest, output_dir)

    rows = []
    for seed, s in stats.items():
        for t in range(s.counts.shape[0]):
            sizes = s.client_totals[t]
            rows.append([seed, t, int(sizes.min()), int(sizes.max()),
                         f"{s.distinct_labels()[t].mean():.2f}", f"{s.entropy[t].mean():.4f}",
                         f"{s.gini[t].mean():.4f}"])
    print(tabulate(rows, headers=["seed", "task", "min shard", "max shard", "labels/client",
                                  "entropy", "gini"], tablefmt="grid"))
    return EXIT_OK


def ablation_rows(results: Dict[str, ExperimentResult]) -> List[Dict]:
    """One row per variant and seed, followed by a mean row per variant."""
    rows = []
    for variant, result in results.items():
        report = result.report()
        variant_rows = []
        for seed, entry in report["per_seed"].items():
            variant_rows.append({
                "variant": variant,
                "seed": seed,
                "FAA": entry["FAA"],
                "AIA": entry["AIA"],
                "params_lora": entry["params"]["lora"],
                "params_head": entry["params"]["head"],
                "params_backbone": entry["params"]["backbone"],
                "params_total": entry["params"]["total"],
                "bytes_up": entry["bytes_up"],
                "bytes_down": entry["bytes_down"],
                "residual_norm_cumulative": entry["residual_norm_cumulative"],
            })
        mean = {"variant": variant, "seed": "mean"}
        for column in ABLATION_COLUMNS[2:]:
            mean[column] = float(np.mean([row[column] for row in variant_rows]))
        rows.extend(variant_rows)
        rows.append(mean)
    return rows


def write_ablation_csv(rows: Sequence[Dict], path: Path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as f:
        writer = csv.DictWriter(f, fieldnames=ABLATION_COLUMNS, lineterminator="\n")
        writer.writeheader()
        for row in rows:
            writer.writerow({k: repr(v) if isinstance(v, float) else v for k, v in row.items()})


@handle_cli_errors
def cmd_ablate(args: argparse.Namespace) -> int:
    config = _load(args).validate()
    variants = args.variants or list(STRATEGIES)
    for variant in variants:
        apply_overrides(config, strategy=variant).validate()

    with run_lock(_output_dir(args, "_ablation")) as output_dir:
        manifest = _begin(config, output_dir, args.command_line)
        results = ablation_suite(config, variants, workers=args.workers, progress=not args.no_progress)
        rows = ablation_rows(results)
        write_ablation_csv(rows, output_dir / ABLATION_FILE)
        _finish(manifest, output_dir)

    table = [[r["variant"], r["seed"], f"{r['FAA']:.4f}", f"{r['AIA']:.4f}", int(r["params_total"]),
              f"{r['residual_norm_cumulative']:.3e}"] for r in rows if r["seed"] == "mean"]
    print(tabulate(table, headers=["variant", "", "FAA", "AIA", "trainable", "sum |W_res|"],
                   tablefmt="grid"))
    return EXIT_OK


def _add_config_args(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("config", help="experiment YAML file")
    parser.add_argument("--set", action="append", metavar="KEY=VALUE",
                        help="override a dotted config key (repeatable)")
    parser.add_argument("--output", help="output directory (default: runs/<config name>)")


def _add_run_args(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--workers", type=int, default=DEFAULT_WORKERS,
                        help="client threads per round (results do not depend on it)")
    parser.add_argument("--no-progress", action="store_true", help="hide the progress bar")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fedtalora",
                                     description="Federated continual fine-tuning with task-agnostic LoRA")
    parser.add_argument("--version", action="version", version=f"%(prog)s {VERSION}")
    parser.add_argument("--log-level", choices=["DEBUG", "INFO", "WARNING", "ERROR"],
                        help="override FEDTALORA_LOG_LEVEL")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run an experiment")
    _add_config_args(run)
    _add_run_args(run)
    run.add_argument("--strategy", choices=STRATEGIES, help="shortcut for --set strategy=NAME")
    run.add_argument("--sweep", action="store_true", help="expand the config's sweep into sub-runs")
    run.set_defaults(func=cmd_run)

    verify = sub.add_parser("verify", help="run the aggregation and gradient identity suite")
    verify.add_argument("--trials", type=int, default=500)
    verify.add_argument("--max-k", type=int, default=16)
    verify.add_argument("--seed", type=int, default=0)
    verify.add_argument("--gradient-trials", type=int, default=50)
    verify.add_argument("--inject-fault", action="store_true",
                        help="flip the sign of the residual product term (must fail)")
    verify.set_defaults(func=cmd_verify)

    preview = sub.add_parser("partition-preview", help="write per-task client x class counts")
    _add_config_args(preview)
    preview.set_defaults(func=cmd_partition_preview)

    ablate = sub.add_parser("ablate", help="compare strategies on shared seeds")
    _add_config_args(ablate)
    _add_run_args(ablate)
    ablate.add_argument("--variants", nargs="+", choices=STRATEGIES,
                        help="strategies to compare (default: all)")
    ablate.set_defaults(func=cmd_ablate)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Parse `argv` and dispatch to a sub-command.

    Returns:
        The sub-command's exit code.
    """
    argv = list(sys.argv[1:] if argv is None else argv)
    args = build_parser().parse_args(argv)
    if args.log_level:
        logging.getLogger().setLevel(args.log_level)
    args.command_line = ["fedtalora", *argv]
    return args.func(args)
