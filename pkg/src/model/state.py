"""Model parameters: frozen backbone, adapters and classification head.

Every party in a run builds its backbone with `init_backbone` from the same
seed, so all of them share bit-identical frozen weights `W0`.
"""
import hashlib
import logging
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional

import numpy as np

from ..config import DEFAULT_LORA_INIT_STD
from ..lora import FrozenBase, LoraAdapter, PlacementSpec, effective_weight, init_adapter
from ..numkit import Tensor
from ..utils import rng_utils
from ..utils.error_utils import ConfigurationError, UsageError
from .config import ModelConfig

logger = logging.getLogger(__name__)

HEAD_INIT_STD = 0.01
POS_INIT_STD = 0.1


@dataclass
class ModelState:
    """All parameters of one party's copy of the model.

    Attributes:
        config: Architecture of the model.
        params: Non-matrix backbone tensors (embedding, positions, norms); in
            full fine-tuning also every block matrix.
        bases: Frozen block matrices, keyed by `blocks.<i>.<m>`.
        adapters: LoRA factors of the adapted subset of `bases`.
        head_weight: C×dim classifier weight, None for the linear architecture.
        head_bias: C classifier bias, None for the linear architecture.
        full_finetune: Whether every backbone tensor is trainable.
    """
    config: ModelConfig
    params: Dict[str, Tensor] = field(default_factory=dict)
    bases: Dict[str, FrozenBase] = field(default_factory=dict)
    adapters: Dict[str, LoraAdapter] = field(default_factory=dict)
    head_weight: Optional[Tensor] = None
    head_bias: Optional[Tensor] = None
    full_finetune: bool = False

    def weight(self, name: str) -> Tensor:
        """Weight of block matrix `name` as seen by the forward pass."""
        if name in self.bases:
            return effective_weight(self.bases[name], self.adapters.get(name))
        if name in self.params:
            return self.params[name]
        raise UsageError(f"model has no matrix {name!r}")

    def lora_parameters(self) -> List[Tensor]:
        """Trainable adapter factors in model order (B before A)."""
        out = []
        for name in sorted(self.adapters, key=self._order):
            adapter = self.adapters[name]
            out.extend(t for t in (adapter.B, adapter.A) if t.requires_grad)
        return out

    def backbone_parameters(self) -> List[Tensor]:
        """Trainable backbone tensors; empty unless fully fine-tuned."""
        if not self.full_finetune:
            return []
        return [self.params[name] for name in sorted(self.params)]

    def head_parameters(self) -> List[Tensor]:
        if self.head_weight is None:
            return []
        return [self.head_weight, self.head_bias]

    def representation_parameters(self) -> List[Tensor]:
        """Parameters trained with the representation learning rate."""
        return self.backbone_parameters() + self.lora_parameters()

    def trainable_parameters(self) -> List[Tensor]:
        return self.representation_parameters() + self.head_parameters()

    def _order(self, name: str):
        return list(self.config.matrix_shapes()).index(name)

    def clone(self) -> "ModelState":
        """Copy with independent trainable tensors.

        Frozen bases are immutable and therefore shared.
        """
        params = {
            name: t.copy() if self.full_finetune else t for name, t in self.params.items()
        }
        return ModelState(
            config=self.config,
            params=params,
            bases=dict(self.bases),
            adapters={
                name: a.copy(train_a=a.A.requires_grad) for name, a in self.adapters.items()
            },
            head_weight=None if self.head_weight is None else self.head_weight.copy(),
            head_bias=None if self.head_bias is None else self.head_bias.copy(),
            full_finetune=self.full_finetune,
        )

    def fingerprint(self) -> str:
        """SHA-256 over the representation parameters, in a fixed order."""
        digest = hashlib.sha256()
        for name in sorted(self.adapters):
            digest.update(name.encode())
            digest.update(self.adapters[name].B.data.tobytes())
            digest.update(self.adapters[name].A.data.tobytes())
        for t in self.backbone_parameters():
            digest.update(t.data.tobytes())
        return digest.hexdigest()


def _normal(rng: np.random.Generator, shape, std: float, name: str) -> Tensor:
    return Tensor(rng.normal(0.0, std, size=shape), name=name)


def init_backbone(config: ModelConfig, seed: int) -> ModelState:
    """Build the seeded frozen backbone and a random classification head.

    Matrices are drawn in model order from the backbone stream with standard
    deviation 1/sqrt(fan_in) (sqrt(2/fan_in) for the ReLU MLP); layer-norm
    gains start at one and biases at zero. The head weight is drawn from its
    own stream with standard deviation 0.01 and a zero bias.

    Args:
        config: Architecture.
        seed: Experiment seed shared by every party.

    Returns:
        A state with no adapters.
    """
    rng = rng_utils.stream(seed, rng_utils.BACKBONE)
    params: Dict[str, Tensor] = {}
    if config.arch == "transformer":
        params["embed"] = _normal(rng, (config.dim, config.patch_dim), 1.0 / math.sqrt(config.patch_dim), "embed")
        params["pos"] = _normal(rng, (config.num_tokens, config.dim), POS_INIT_STD, "pos")
        for block in range(config.depth):
            for ln in ("ln1", "ln2"):
                params[f"blocks.{block}.{ln}.gain"] = Tensor(np.ones(config.dim), name=f"blocks.{block}.{ln}.gain")
                params[f"blocks.{block}.{ln}.bias"] = Tensor.zeros((config.dim,), name=f"blocks.{block}.{ln}.bias")
        params["ln_f.gain"] = Tensor(np.ones(config.dim), name="ln_f.gain")
        params["ln_f.bias"] = Tensor.zeros((config.dim,), name="ln_f.bias")

    gain = 2.0 if config.arch == "mlp" else 1.0
    bases = {
        name: FrozenBase.from_weight(_normal(rng, shape, math.sqrt(gain / shape[1]), name))
        for name, shape in config.matrix_shapes().items()
    }

    head_weight = head_bias = None
    if config.has_head:
        head_rng = rng_utils.stream(seed, rng_utils.HEAD)
        head_weight = Tensor(head_rng.normal(0.0, HEAD_INIT_STD, size=(config.num_classes, config.dim)),
                             requires_grad=True, name="head.weight")
        head_bias = Tensor.zeros((config.num_classes,), requires_grad=True, name="head.bias")

    logger.debug(f"Initialised {config.arch} backbone with {len(bases)} block matrices (seed {seed})")
    return ModelState(config=config, params=params, bases=bases,
                      head_weight=head_weight, head_bias=head_bias)


def attach_adapters(state: ModelState, placement: PlacementSpec, rank: int, seed: int,
                    std: float = DEFAULT_LORA_INIT_STD, train_a: bool = True) -> ModelState:
    """Attach fresh adapters to the matrices selected by `placement`.

    Each matrix draws A from its own stream keyed by its position in the
    model, so the draw does not depend on which other matrices are adapted.

    Args:
        state: State without adapters.
        placement: Matrices to adapt.
        rank: Adapter rank r.
        seed: Experiment seed.
        std: Standard deviation of A's entries.
        train_a: False freezes A (the frozen-A baseline).

    Returns:
        The same state, with adapters attached.

    Raises:
        ConfigurationError: On an invalid rank or placement, or if the state
            is fully fine-tuned.
    """
    if state.full_finetune:
        raise ConfigurationError("adapters cannot be attached to a fully fine-tuned model", field="strategy")
    order = list(state.config.matrix_shapes())
    for name in placement.adapted_matrices(state.config):
        d, k = state.bases[name].shape
        rng = rng_utils.stream(seed, rng_utils.ADAPTER, order.index(name))
        adapter = init_adapter(d, k, rank, rng, std)
        state.adapters[name] = adapter if train_a else adapter.copy(train_a=False)
    return state


def to_full_finetune(state: ModelState) -> ModelState:
    """Make every backbone tensor trainable; the bases become plain parameters."""
    if state.adapters:
        raise ConfigurationError("full fine-tuning does not use adapters", field="strategy")
    params = {name: t.copy(requires_grad=True) for name, t in state.params.items()}
    for name, base in state.bases.items():
        params[name] = Tensor(base.current().data, requires_grad=True, name=name)
    return ModelState(config=state.config, params=params, bases={},
                      head_weight=state.head_weight, head_bias=state.head_bias,
                      full_finetune=True)
