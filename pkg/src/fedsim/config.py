"""Experiment configuration.

An experiment is described by one YAML document whose sections map onto
the dataclasses below:

    dataset:  {source, num_classes, input_dim, train_per_class, ...}
    tasks:    {num_tasks}
    clients:  {num_clients, scheme, alpha, beta}
    train:    {rounds, local_epochs, batch_size, lr_lora, lr_head, loss, track_grad_norm}
    model:    {arch, depth, dim, heads, ffn_dim, num_tokens}
    lora:     {rank, init_std, attention, ffn, blocks, num_blocks}
    strategy: reswu | dense | naive | ffa | head_only | full_finetune
    eval_head: average | local
    seeds:    [1993, 1996, 1997]
    sweep:    {dotted.key: [value, ...]}

Unknown keys are errors. `dump_config` followed by `parse_config` gives back
an equal configuration.
"""
import copy
import itertools
import logging
import typing
from dataclasses import asdict, dataclass, field, fields, is_dataclass
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Sequence, Tuple, Union

import yaml

from .. import config as defaults
from ..lora import ATTENTION_MATRICES, FFN_MATRICES, PlacementSpec
from ..model import LOSSES, ModelConfig
from ..partition import SCHEMES
from ..utils.error_utils import ConfigurationError

logger = logging.getLogger(__name__)

STRATEGIES = ("reswu", "dense", "naive", "ffa", "head_only", "full_finetune")
EVAL_HEADS = ("average", "local")
SOURCES = ("blobs", "csv")


@dataclass
class DatasetConfig:
    source: str = "blobs"
    num_classes: int = defaults.DEFAULT_NUM_CLASSES
    input_dim: int = defaults.DEFAULT_INPUT_DIM
    train_per_class: int = defaults.DEFAULT_TRAIN_PER_CLASS
    test_per_class: int = defaults.DEFAULT_TEST_PER_CLASS
    separation: float = defaults.DEFAULT_SEPARATION
    noise: float = defaults.DEFAULT_NOISE
    val_fraction: float = defaults.DEFAULT_VAL_FRACTION
    train_path: Optional[str] = None
    test_path: Optional[str] = None
    has_header: bool = False


@dataclass
class TasksConfig:
    num_tasks: int = defaults.DEFAULT_NUM_TASKS


@dataclass
class ClientsConfig:
    num_clients: int = defaults.DEFAULT_NUM_CLIENTS
    scheme: str = "dirichlet"
    alpha: int = 1
    beta: float = 0.5


@dataclass
class TrainConfig:
    rounds: int = defaults.DEFAULT_ROUNDS
    local_epochs: int = defaults.DEFAULT_LOCAL_EPOCHS
    batch_size: int = defaults.DEFAULT_BATCH_SIZE
    lr_lora: float = defaults.DEFAULT_LR_LORA
    lr_head: float = defaults.DEFAULT_LR_HEAD
    loss: str = "cross_entropy"
    track_grad_norm: bool = False


@dataclass
class ModelSection:
    arch: str = "transformer"
    depth: int = defaults.DEFAULT_DEPTH
    dim: int = defaults.DEFAULT_DIM
    heads: int = 1
    ffn_dim: int = defaults.DEFAULT_FFN_DIM
    num_tokens: int = defaults.DEFAULT_NUM_TOKENS


@dataclass
class LoraConfig:
    rank: int = defaults.DEFAULT_RANK
    init_std: float = defaults.DEFAULT_LORA_INIT_STD
    attention: List[str] = field(default_factory=lambda: list(ATTENTION_MATRICES))
    ffn: List[str] = field(default_factory=lambda: list(FFN_MATRICES))
    blocks: str = "first"
    num_blocks: Optional[int] = None


@dataclass
class ExperimentConfig:
    """Complete description of one experiment."""
    dataset: DatasetConfig = field(default_factory=DatasetConfig)
    tasks: TasksConfig = field(default_factory=TasksConfig)
    clients: ClientsConfig = field(default_factory=ClientsConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    model: ModelSection = field(default_factory=ModelSection)
    lora: LoraConfig = field(default_factory=LoraConfig)
    strategy: str = "reswu"
    eval_head: str = "average"
    seeds: List[int] = field(default_factory=lambda: list(defaults.DEFAULT_SEEDS))
    sweep: Dict[str, List[Any]] = field(default_factory=dict)

    @property
    def uses_adapters(self) -> bool:
        return self.strategy not in ("head_only", "full_finetune")

    @property
    def partition_param(self) -> Union[int, float]:
        return self.clients.alpha if self.clients.scheme == "quantity" else self.clients.beta

    def model_config(self) -> ModelConfig:
        return ModelConfig(
            input_dim=self.dataset.input_dim,
            num_classes=self.dataset.num_classes,
            arch=self.model.arch,
            depth=self.model.depth,
            dim=self.model.dim,
            heads=self.model.heads,
            ffn_dim=self.model.ffn_dim,
            num_tokens=self.model.num_tokens,
        )

    def placement(self) -> PlacementSpec:
        return PlacementSpec(
            attention=tuple(self.lora.attention),
            ffn=tuple(self.lora.ffn),
            blocks=self.lora.blocks,
            num_blocks=self.lora.num_blocks,
        )

    def validate(self) -> "ExperimentConfig":
        """Check every cross-field constraint.

        Returns:
            The config itself.

        Raises:
            ConfigurationError: Naming the offending field.
        """
        _choice(self.strategy, STRATEGIES, "strategy")
        _choice(self.eval_head, EVAL_HEADS, "eval_head")
        _choice(self.dataset.source, SOURCES, "dataset.source")
        _choice(self.clients.scheme, SCHEMES, "clients.scheme")
        _choice(self.train.loss, LOSSES, "train.loss")
        for path in ("dataset.num_classes", "dataset.input_dim", "dataset.train_per_class",
                     "dataset.test_per_class", "tasks.num_tasks", "clients.num_clients",
                     "train.rounds", "train.local_epochs", "train.batch_size", "lora.rank"):
            _at_least(get_value(self, path), 1, path)
        if self.dataset.source == "csv" and not (self.dataset.train_path and self.dataset.test_path):
            raise ConfigurationError("csv datasets need train_path and test_path", field="dataset.train_path")
        if not 0.0 <= self.dataset.val_fraction < 1.0:
            raise ConfigurationError(f"must lie in [0, 1), got {self.dataset.val_fraction}",
                                     field="dataset.val_fraction")

        lr_lora, lr_head = self.train.lr_lora, self.train.lr_head
        if lr_lora < 0.0:
            raise ConfigurationError(f"must be >= 0, got {lr_lora}", field="train.lr_lora")
        if not lr_lora < lr_head:
            raise ConfigurationError(
                f"dual-rate constraint violated: lr_lora ({lr_lora}) must be < lr_head ({lr_head})",
                field="train.lr_lora",
            )

        per_task = self.dataset.num_classes // self.tasks.num_tasks
        if self.dataset.num_classes % self.tasks.num_tasks:
            raise ConfigurationError(
                f"{self.tasks.num_tasks} tasks do not divide {self.dataset.num_classes} classes",
                field="tasks.num_tasks",
            )
        if self.clients.scheme == "quantity":
            if not 1 <= self.clients.alpha <= per_task:
                raise ConfigurationError(f"alpha must lie in [1, {per_task}]", field="clients.alpha")
            if self.clients.num_clients * self.clients.alpha < per_task:
                raise ConfigurationError(
                    f"{self.clients.num_clients} clients x alpha {self.clients.alpha} cannot cover "
                    f"{per_task} labels per task", field="clients.alpha",
                )
        elif not self.clients.beta > 0.0:
            raise ConfigurationError(f"must be > 0, got {self.clients.beta}", field="clients.beta")

        if not self.seeds:
            raise ConfigurationError("at least one seed is required", field="seeds")
        if any(s < 0 for s in self.seeds) or len(set(self.seeds)) != len(self.seeds):
            raise ConfigurationError(f"seeds must be distinct and >= 0, got {self.seeds}", field="seeds")
        if self.lora.init_std < 0.0:
            raise ConfigurationError(f"must be >= 0, got {self.lora.init_std}", field="lora.init_std")

        model_config = self.model_config()
        if not model_config.has_head and self.strategy == "head_only":
            raise ConfigurationError("the linear architecture has no head to train", field="strategy")
        if self.uses_adapters:
            shapes = model_config.matrix_shapes()
            for name in self.placement().adapted_matrices(model_config):
                if self.lora.rank > min(shapes[name]):
                    raise ConfigurationError(f"rank {self.lora.rank} exceeds min{shapes[name]} of {name}",
                                             field="lora.rank")
        return self


def _choice(value: Any, allowed: Sequence[str], path: str) -> None:
    if value not in allowed:
        raise ConfigurationError(f"expected one of {list(allowed)}, got {value!r}", field=path)


def _at_least(value: int, minimum: int, path: str) -> None:
    if value < minimum:
        raise ConfigurationError(f"must be >= {minimum}, got {value}", field=path)


def _coerce(value: Any, tp: Any, path: str) -> Any:
    origin = typing.get_origin(tp)
    if origin is Union:
        args = [a for a in typing.get_args(tp) if a is not type(None)]
        return None if value is None else _coerce(value, args[0], path)
    if origin in (list, List):
        if not isinstance(value, (list, tuple)):
            raise ConfigurationError(f"expected a list, got {value!r}", field=path)
        (item,) = typing.get_args(tp) or (Any,)
        return [_coerce(v, item, f"{path}[{i}]") for i, v in enumerate(value)]
    if origin in (dict, Dict):
        if not isinstance(value, dict):
            raise ConfigurationError(f"expected a mapping, got {value!r}", field=path)
        return {str(k): list(v) if isinstance(v, (list, tuple)) else v for k, v in value.items()}
    if tp is bool:
        if not isinstance(value, bool):
            raise ConfigurationError(f"expected true/false, got {value!r}", field=path)
        return value
    if tp is int:
        if isinstance(value, bool) or not isinstance(value, (int, float)) or float(value) != int(value):
            raise ConfigurationError(f"expected an integer, got {value!r}", field=path)
        return int(value)
    if tp is float:
        if isinstance(value, bool):
            raise ConfigurationError(f"expected a number, got {value!r}", field=path)
        try:
            return float(value)
        except (TypeError, ValueError):
            raise ConfigurationError(f"expected a number, got {value!r}", field=path)
    if tp is str:
        if not isinstance(value, str):
            raise ConfigurationError(f"expected a string, got {value!r}", field=path)
        return value
    return value


def _build(cls, data: Mapping[str, Any], prefix: str = ""):
    if not isinstance(data, Mapping):
        raise ConfigurationError(f"expected a mapping, got {data!r}", field=prefix.rstrip(".") or None)
    hints = typing.get_type_hints(cls)
    known = {f.name for f in fields(cls)}
    unknown = sorted(set(data) - known)
    if unknown:
        raise ConfigurationError("unknown key", field=f"{prefix}{unknown[0]}")
    kwargs = {}
    for name, value in data.items():
        tp = hints[name]
        if is_dataclass(tp):
            kwargs[name] = _build(tp, value or {}, f"{prefix}{name}.")
        else:
            kwargs[name] = _coerce(value, tp, f"{prefix}{name}")
    return cls(**kwargs)


def parse_config(data: Optional[Mapping[str, Any]]) -> ExperimentConfig:
    """Build a config from a parsed YAML mapping (missing keys take defaults)."""
    return _build(ExperimentConfig, data or {})


def load_config(path: Union[str, Path]) -> ExperimentConfig:
    """Read a YAML config file.

    Raises:
        FileNotFoundError: If the file does not exist.
        yaml.YAMLError: If the file is not valid YAML.
        ConfigurationError: On unknown keys or ill-typed values.
    """
    with open(path, "r", encoding="utf-8") as f:
        data = yaml.safe_load(f)
    logger.info(f"Loaded config from {path}")
    return parse_config(data)


def config_to_dict(config: ExperimentConfig) -> Dict[str, Any]:
    return asdict(config)


def dump_config(config: ExperimentConfig) -> str:
    return yaml.safe_dump(config_to_dict(config), sort_keys=False)


def save_config(config: ExperimentConfig, path: Union[str, Path]) -> None:
    with open(path, "w", encoding="utf-8") as f:
        f.write(dump_config(config))


def get_value(config: ExperimentConfig, path: str) -> Any:
    node: Any = config
    for part in path.split("."):
        if not is_dataclass(node) or part not in {f.name for f in fields(node)}:
            raise ConfigurationError("unknown key", field=path)
        node = getattr(node, part)
    return node


def _set_path(data: Dict[str, Any], path: str, value: Any) -> None:
    parts = path.split(".")
    node = data
    for part in parts[:-1]:
        if not isinstance(node.get(part), dict):
            raise ConfigurationError("unknown key", field=path)
        node = node[part]
    if parts[-1] not in node:
        raise ConfigurationError("unknown key", field=path)
    node[parts[-1]] = value


def with_values(config: ExperimentConfig, values: Mapping[str, Any]) -> ExperimentConfig:
    """Copy of `config` with dotted keys replaced."""
    data = copy.deepcopy(config_to_dict(config))
    for path, value in values.items():
        _set_path(data, path, value)
    return parse_config(data)


def apply_overrides(config: ExperimentConfig, overrides: Sequence[str] = (),
                    strategy: Optional[str] = None) -> ExperimentConfig:
    """Apply `key=value` overrides (values parsed as YAML) and a strategy shortcut.

    Raises:
        ConfigurationError: On a malformed override or an unknown key.
    """
    values: Dict[str, Any] = {}
    for item in overrides:
        key, sep, raw = item.partition("=")
        if not sep or not key.strip():
            raise ConfigurationError(f"override {item!r} is not of the form key=value", field="--set")
        values[key.strip()] = yaml.safe_load(raw)
    if strategy is not None:
        values["strategy"] = strategy
    return with_values(config, values)


def expand_sweep(config: ExperimentConfig) -> List[Tuple[str, ExperimentConfig]]:
    """Expand the `sweep` mapping into the cartesian product of its values.

    Returns:
        `(label, config)` pairs labelled `sweep_<i>`; each config has an
        empty sweep. A config without a sweep yields itself as `sweep_0`.

    Raises:
        ConfigurationError: If a swept key is unknown or has no values.
    """
    keys = list(config.sweep)
    for key in keys:
        get_value(config, key)
        if not config.sweep[key]:
            raise ConfigurationError("sweep needs at least one value", field=f"sweep.{key}")
    base = with_values(config, {"sweep": {}})
    runs = []
    for i, combo in enumerate(itertools.product(*(config.sweep[k] for k in keys))):
        runs.append((f"sweep_{i}", with_values(base, dict(zip(keys, combo)))))
    if len(runs) > 1:
        logger.warning(f"Sweep over {keys} expands into {len(runs)} runs")
    return runs
