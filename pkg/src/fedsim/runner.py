"""Orchestration of tasks, rounds and clients.

One round, in order:

1. every client folds the pending residual into its frozen bases;
2. every client adopts the global factors (or the global backbone in full
   fine-tuning) and trains on its shard for the configured local epochs;
3. the server weights the uploads by shard size and aggregates them with
   the configured strategy; a residual is applied to the server's bases at
   once and queued for the clients' next round;
4. the global model is evaluated on the test and validation rows of every
   class seen so far.

Clients keep their own heads between rounds; the averaged head is used for
evaluation only. Clients may run on a thread pool; each draws from its own
(seed, task, round, client) stream and results are reduced in client order,
so the worker count never changes a result.
"""
import logging
import time
from concurrent.futures import Executor, ThreadPoolExecutor
from contextlib import contextmanager
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Dict, Iterator, List, Optional, Sequence, Tuple, Union

import numpy as np
from tqdm import tqdm

from ..aggregate import (
    ClientUpdate,
    aggregate,
    aggregate_factors,
    aggregate_head,
    average_dense,
    fedavg_weights,
)
from ..config import DEFAULT_WORKERS
from ..datagen import CsvSchema, LabeledDataset, concat_datasets, load_csv, make_blobs
from ..lora import apply_reswu, count_trainable
from ..metrics import AccuracyMatrix, evaluate_task, metrics_report, write_report
from ..model import gradient_norm_sq, local_train
from ..numkit import Tensor, ordered_matmul
from ..partition import (
    PartitionPlan,
    PartitionStats,
    TaskSequence,
    build_plan,
    partition_stats,
    split_tasks,
    train_val_split,
)
from ..utils import rng_utils
from ..utils.error_utils import EmptyShardError, ProtocolError
from .config import STRATEGIES, ExperimentConfig, with_values
from .state import ClientState, ServerState, init_server
from .trace import RoundTrace, TaskRecord, write_partition_csvs, write_trace_csv

logger = logging.getLogger(__name__)


@dataclass
class SeedContext:
    """Data of one seed: dataset, task order, partition and evaluation subsets."""
    seed: int
    dataset: LabeledDataset
    tasks: TaskSequence
    plan: PartitionPlan

    def shards(self, t: int) -> List[LabeledDataset]:
        return [self.dataset.subset(idx) for idx in self.plan.shards[t]]

    def task_train(self, t: int) -> LabeledDataset:
        return self.dataset.subset(np.sort(np.concatenate(self.plan.shards[t])))

    def test_set(self, classes: Sequence[int]) -> LabeledDataset:
        return self.dataset.subset(self.dataset.indices("test", classes))

    def val_set(self, classes: Sequence[int]) -> LabeledDataset:
        return self.dataset.subset(self.dataset.indices("val", classes))


@dataclass
class ExperimentResult:
    """Everything a run produces, keyed by seed."""
    config: ExperimentConfig
    matrices: Dict[int, AccuracyMatrix] = field(default_factory=dict)
    traces: Dict[int, List[RoundTrace]] = field(default_factory=dict)
    task_records: Dict[int, List[TaskRecord]] = field(default_factory=dict)
    partitions: Dict[int, PartitionStats] = field(default_factory=dict)
    extras: Dict[int, Dict] = field(default_factory=dict)

    def all_traces(self) -> List[RoundTrace]:
        return [trace for seed in self.config.seeds for trace in self.traces[seed]]

    def report(self) -> Dict:
        return metrics_report(self.matrices, self.extras)


def load_dataset(config: ExperimentConfig, seed: int) -> LabeledDataset:
    """Build the dataset of one seed, with the validation split applied."""
    ds = config.dataset
    if ds.source == "csv":
        train = load_csv(ds.train_path, CsvSchema(ds.num_classes, ds.has_header, "train"))
        test = load_csv(ds.test_path, CsvSchema(ds.num_classes, ds.has_header, "test"))
        dataset = concat_datasets(train, test)
    else:
        dataset = make_blobs(ds.num_classes, ds.train_per_class, ds.input_dim, ds.separation,
                             ds.noise, seed, test_per_class=ds.test_per_class)
    dataset.check_test_coverage()
    return train_val_split(dataset, ds.val_fraction, seed)


def prepare_seed(config: ExperimentConfig, seed: int) -> SeedContext:
    dataset = load_dataset(config, seed)
    tasks = split_tasks(config.dataset.num_classes, config.tasks.num_tasks, seed)
    plan = build_plan(dataset, tasks, config.clients.num_clients, config.clients.scheme,
                      config.partition_param, seed)
    return SeedContext(seed=seed, dataset=dataset, tasks=tasks, plan=plan)


def _adopt_global(server: ServerState, client: ClientState) -> None:
    if server.model.full_finetune:
        client.model.params = {name: t.copy(requires_grad=True) for name, t in server.model.params.items()}
        return
    client.model.adapters = {
        name: adapter.copy(train_a=server.train_a) for name, adapter in server.model.adapters.items()
    }


def _client_step(server: ServerState, client: ClientState, shard: LabeledDataset,
                 config: ExperimentConfig, seed: int, task: int,
                 round_index: int) -> Optional[ClientUpdate]:
    client.apply_residual(server.pending_residual)
    _adopt_global(server, client)
    train = config.train
    rng = rng_utils.client_stream(seed, task, round_index, client.client_id)
    try:
        result = local_train(client.model, shard, train.local_epochs, train.batch_size,
                             train.lr_lora, train.lr_head, rng, loss=train.loss)
    except EmptyShardError:
        logger.warning(f"Client {client.client_id} has no samples in task {task}; skipped in round {round_index}")
        return None
    client.last_loss = result.final_loss
    model = client.model
    return ClientUpdate(
        client_id=client.client_id,
        num_samples=len(shard),
        factors={name: a.copy(train_a=a.A.requires_grad) for name, a in model.adapters.items()},
        head=None if model.head_weight is None else (model.head_weight.copy(), model.head_bias.copy()),
        dense={name: t.copy() for name, t in model.params.items()} if model.full_finetune else {},
    )


def _dense_residual(server: ServerState, updates: Sequence[ClientUpdate],
                    weights: Sequence[float]) -> Dict[str, Tensor]:
    """Residual that moves the server's factor model onto the dense target."""
    current = {name: server.model.bases[name].current() for name in server.model.adapters}
    target = aggregate("dense", updates, weights, bases=current).dense
    factors = aggregate_factors(updates, weights)
    return {
        name: Tensor(target[name].data - current[name].data
                     - ordered_matmul(factors[name].B.data, factors[name].A.data), name="W_res")
        for name in factors
    }


def _server_step(server: ServerState, updates: Sequence[ClientUpdate], weights: Sequence[float],
                 eval_head: str) -> Tuple[Dict[str, float], bool]:
    """Aggregate uploads into the server model; returns residual norms and whether they were applied."""
    strategy = server.strategy
    model = server.model
    norms: Dict[str, float] = {}
    applied = False
    server.pending_residual = {}

    if strategy == "full_finetune":
        model.params = {name: t.copy(requires_grad=True) for name, t in average_dense(updates, weights).items()}
    elif strategy in ("reswu", "naive", "ffa"):
        result = aggregate(strategy, updates, weights)
        model.adapters = {name: a.copy(train_a=server.train_a) for name, a in result.factors.items()}
        norms = result.residual_norms
        if result.applied_residual:
            server.pending_residual = result.w_res
            applied = True
    elif strategy == "dense":
        w_res = _dense_residual(server, updates, weights)
        model.adapters = {name: a.copy() for name, a in aggregate_factors(updates, weights).items()}
        norms = {name: float(np.linalg.norm(t.data)) for name, t in w_res.items()}
        server.pending_residual = w_res
        applied = True

    for name, residual in server.pending_residual.items():
        model.bases[name] = apply_reswu(model.bases[name], residual)

    if model.head_weight is not None and eval_head == "average":
        weight, bias = aggregate_head(updates, weights)
        model.head_weight = weight.copy(requires_grad=True)
        model.head_bias = bias.copy(requires_grad=True)
    return norms, applied


def _evaluate(server: ServerState, dataset: LabeledDataset, eval_head: str) -> Fraction:
    models = server.evaluation_models(eval_head)
    return sum((evaluate_task(m, dataset) for m in models), Fraction(0)) / len(models)


def _payload_bytes(server: ServerState, updates: Sequence[ClientUpdate], eval_head: str,
                   applied: bool) -> Tuple[int, int]:
    model = server.model
    factor_bytes = sum(a.B.nbytes + (a.A.nbytes if server.train_a else 0) for a in model.adapters.values())
    dense_bytes = sum(t.nbytes for t in model.params.values()) if model.full_finetune else 0
    head_bytes = 0
    if model.head_weight is not None and eval_head == "average":
        head_bytes = model.head_weight.nbytes + model.head_bias.nbytes
    residual_bytes = sum(t.nbytes for t in server.pending_residual.values()) if applied else 0
    up = len(updates) * (factor_bytes + dense_bytes + head_bytes)
    down = len(server.clients) * (factor_bytes + dense_bytes + residual_bytes)
    return up, down


def run_round(server: ServerState, shards: Sequence[LabeledDataset], config: ExperimentConfig,
              seed: int, task: int, round_index: int, test_set: LabeledDataset,
              val_set: Optional[LabeledDataset] = None, train_set: Optional[LabeledDataset] = None,
              executor: Optional[Executor] = None) -> Tuple[ServerState, RoundTrace]:
    """Run one communication round, updating `server` and its clients in place.

    Args:
        server: Server state with its clients.
        shards: One training shard per client for the current task.
        config: Experiment configuration.
        seed: Experiment seed.
        task: Task index.
        round_index: Round index within the task.
        test_set: Test rows of every class seen so far.
        val_set: Validation rows of every class seen so far.
        train_set: Union of the shards; required when tracking gradient norms.
        executor: Optional pool running the clients.

    Returns:
        The server and the round's trace.

    Raises:
        ProtocolError: If no client holds a sample.
    """
    started = time.perf_counter()
    grad_norm = None
    if config.train.track_grad_norm and train_set is not None:
        grad_norm = gradient_norm_sq(server.model, train_set, config.train.loss)

    def step(client: ClientState) -> Optional[ClientUpdate]:
        return _client_step(server, client, shards[client.client_id], config, seed, task, round_index)

    if executor is None:
        results = [step(c) for c in server.clients]
    else:
        results = list(executor.map(step, server.clients))
    updates = [u for u in results if u is not None]
    if not updates:
        raise ProtocolError(f"no client holds a sample in task {task}")

    weights = fedavg_weights([u.num_samples for u in updates])
    norms, applied = _server_step(server, updates, weights, config.eval_head)
    up, down = _payload_bytes(server, updates, config.eval_head, applied)

    trace = RoundTrace(
        seed=seed,
        strategy=server.strategy,
        task=task,
        round=round_index,
        client_losses=[None if r is None else c.last_loss for c, r in zip(server.clients, results)],
        residual_norms=norms,
        residual_applied=applied,
        test_accuracy=_evaluate(server, test_set, config.eval_head),
        val_accuracy=_evaluate(server, val_set, config.eval_head) if val_set is not None and len(val_set) else None,
        bytes_up=up,
        bytes_down=down,
        grad_norm_sq=grad_norm,
    )
    trace.wall_time = time.perf_counter() - started
    logger.debug(f"Seed {seed} task {task} round {round_index}: residual {trace.residual_norm_total:.3e}, "
                 f"{trace.wall_time:.2f}s")
    return server, trace


def run_task(server: ServerState, t: int, config: ExperimentConfig, context: SeedContext,
             executor: Optional[Executor] = None,
             progress: Optional[tqdm] = None) -> Tuple[ServerState, List[RoundTrace], TaskRecord]:
    """Run every round of task `t`; adapters carry over from the previous task untouched."""
    seen = context.tasks.seen_classes(t)
    shards = context.shards(t)
    test_set, val_set = context.test_set(seen), context.val_set(seen)
    train_set = context.task_train(t) if config.train.track_grad_norm else None
    start = server.model.fingerprint()
    traces = []
    for r in range(config.train.rounds):
        server, trace = run_round(server, shards, config, context.seed, t, r, test_set, val_set,
                                  train_set, executor)
        traces.append(trace)
        if progress is not None:
            progress.update(1)
    logger.info(f"Seed {context.seed} task {t} ({list(context.tasks.tasks[t])}): "
                f"seen-class accuracy {float(traces[-1].test_accuracy):.4f}")
    record = TaskRecord(task=t, classes=list(context.tasks.tasks[t]),
                        start_fingerprint=start, end_fingerprint=server.model.fingerprint())
    return server, traces, record


def _resources(config: ExperimentConfig, traces: Sequence[RoundTrace]) -> Dict:
    model_config = config.model_config()
    placement = config.placement() if config.uses_adapters else None
    counts = count_trainable(placement, model_config, config.lora.rank)
    backbone = model_config.backbone_parameters() if config.strategy == "full_finetune" else 0
    return {
        "params": {"lora": counts.lora, "head": counts.head, "backbone": backbone,
                   "total": counts.total + backbone},
        "bytes_up": int(sum(t.bytes_up for t in traces)),
        "bytes_down": int(sum(t.bytes_down for t in traces)),
        "residual_norm_cumulative": float(sum(t.residual_norm_total for t in traces)),
    }


@contextmanager
def client_pool(workers: int) -> Iterator[Optional[Executor]]:
    """Thread pool for the clients, or None for sequential execution."""
    if workers <= 1:
        yield None
        return
    with ThreadPoolExecutor(max_workers=workers, thread_name_prefix="client") as pool:
        yield pool


def run_seed(config: ExperimentConfig, context: SeedContext, executor: Optional[Executor] = None,
             progress: Optional[tqdm] = None) -> Tuple[AccuracyMatrix, List[RoundTrace], List[TaskRecord]]:
    """Run all tasks for one seed and fill its accuracy matrix."""
    server = init_server(config, context.seed)
    S = AccuracyMatrix(context.tasks.num_tasks)
    traces: List[RoundTrace] = []
    records: List[TaskRecord] = []
    for t in range(context.tasks.num_tasks):
        server, task_traces, record = run_task(server, t, config, context, executor, progress)
        traces.extend(task_traces)
        records.append(record)
        for tau in range(t + 1):
            S.set(t, tau, _evaluate(server, context.test_set(context.tasks.tasks[tau]), config.eval_head))
    return S, traces, records


def run_experiment(config: ExperimentConfig, output_dir: Optional[Union[str, Path]] = None,
                   workers: int = DEFAULT_WORKERS, progress: bool = True) -> ExperimentResult:
    """Run every seed of an experiment.

    Args:
        config: Validated configuration.
        output_dir: If given, `metrics.json`, `trace.csv` and one
            `partition_t<k>.csv` per task are written there.
        workers: Client threads per round.
        progress: Show a progress bar (only on a terminal).

    Returns:
        Accuracy matrices, traces and per-seed resource figures.
    """
    config.validate()
    result = ExperimentResult(config=config)
    total = len(config.seeds) * config.tasks.num_tasks * config.train.rounds
    with client_pool(workers) as pool, tqdm(total=total, desc=config.strategy,
                                            disable=None if progress else True) as bar:
        for seed in config.seeds:
            logger.info(f"Seed {seed}: {config.strategy}, {config.clients.num_clients} clients, "
                        f"{config.tasks.num_tasks} tasks x {config.train.rounds} rounds")
            context = prepare_seed(config, seed)
            S, traces, records = run_seed(config, context, pool, bar)
            result.matrices[seed] = S
            result.traces[seed] = traces
            result.task_records[seed] = records
            result.partitions[seed] = partition_stats(context.plan)
            result.extras[seed] = _resources(config, traces)

    if output_dir is not None:
        output_dir = Path(output_dir)
        output_dir.mkdir(parents=True, exist_ok=True)
        write_report(result.report(), output_dir / "metrics.json")
        write_trace_csv(result.all_traces(), output_dir / "trace.csv")
        write_partition_csvs(result.partitions, output_dir)
    return result


def ablation_suite(config: ExperimentConfig, variants: Sequence[str] = STRATEGIES,
                   workers: int = DEFAULT_WORKERS, progress: bool = True) -> Dict[str, ExperimentResult]:
    """Run the same experiment under every strategy in `variants`, with shared seeds."""
    results = {}
    for variant in variants:
        logger.info(f"Ablation variant {variant}")
        results[variant] = run_experiment(with_values(config, {"strategy": variant}),
                                          workers=workers, progress=progress)
    return results
