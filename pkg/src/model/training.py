"""Local training of one party's model on its data shard."""
import logging
from dataclasses import dataclass, field
from typing import List

import numpy as np

from .. import numkit
from ..datagen import LabeledDataset
from ..numkit import ParamGroup, Tape, Tensor, backward, sgd_step
from ..utils.error_utils import ConfigurationError, EmptyShardError
from .network import forward
from .state import ModelState

logger = logging.getLogger(__name__)

LOSSES = ("cross_entropy", "mse")


@dataclass
class TrainResult:
    """Outcome of one `local_train` call.

    Attributes:
        epoch_losses: Sample-weighted mean batch loss of each epoch, measured
            before each batch's update.
        num_samples: Shard size.
        steps: SGD steps taken.
    """
    epoch_losses: List[float] = field(default_factory=list)
    num_samples: int = 0
    steps: int = 0

    @property
    def final_loss(self) -> float:
        return self.epoch_losses[-1] if self.epoch_losses else float("nan")


def compute_loss(logits: Tensor, labels: np.ndarray, loss: str) -> Tensor:
    if loss == "cross_entropy":
        return numkit.softmax_cross_entropy(logits, labels)
    if loss == "mse":
        return numkit.mse_loss(logits, labels)
    raise ConfigurationError(f"expected one of {LOSSES}, got {loss!r}", field="train.loss")


def build_groups(state: ModelState, lr_repr: float, lr_head: float) -> List[ParamGroup]:
    """Learning-rate groups of a state; a zero rate leaves its group out."""
    for value, name in ((lr_repr, "train.lr_lora"), (lr_head, "train.lr_head")):
        if not np.isfinite(value) or value < 0.0:
            raise ConfigurationError(f"learning rate must be >= 0, got {value}", field=name)
    groups = []
    representation = state.representation_parameters()
    if representation and lr_repr > 0.0:
        groups.append(ParamGroup("backbone" if state.full_finetune else "lora", representation, lr_repr))
    head = state.head_parameters()
    if head and lr_head > 0.0:
        groups.append(ParamGroup("head", head, lr_head))
    return groups


def local_train(state: ModelState, shard: LabeledDataset, epochs: int, batch_size: int,
                lr_lora: float, lr_head: float, rng: np.random.Generator,
                loss: str = "cross_entropy") -> TrainResult:
    """Run `epochs` epochs of minibatch SGD on a shard, updating `state` in place.

    Adapter factors (or, in full fine-tuning, the backbone) use `lr_lora`;
    the head uses `lr_head`. Frozen tensors never change. Each epoch visits
    the shard in an order drawn from `rng`.

    Args:
        state: The party's model; its trainable tensors are updated.
        shard: Training samples.
        epochs: Local epochs, >= 1.
        batch_size: Minibatch size, >= 1.
        lr_lora: Representation learning rate; 0 freezes the adapters.
        lr_head: Head learning rate; 0 freezes the head.
        rng: Generator of this client and round.
        loss: "cross_entropy" or "mse".

    Returns:
        Per-epoch losses and step count.

    Raises:
        EmptyShardError: If the shard holds no samples.
        ConfigurationError: On invalid epochs, batch size or rates.
    """
    if len(shard) == 0:
        raise EmptyShardError("cannot train on an empty shard")
    if epochs < 1:
        raise ConfigurationError(f"must be >= 1, got {epochs}", field="train.local_epochs")
    if batch_size < 1:
        raise ConfigurationError(f"must be >= 1, got {batch_size}", field="train.batch_size")
    groups = build_groups(state, lr_lora, lr_head)
    params = [p for group in groups for p in group.params]

    features = shard.features.data
    result = TrainResult(num_samples=len(shard))
    for _ in range(epochs):
        order = rng.permutation(len(shard))
        total = 0.0
        for start in range(0, len(shard), batch_size):
            idx = order[start:start + batch_size]
            batch, labels = Tensor(features[idx]), shard.labels[idx]
            if not params:
                total += compute_loss(forward(state, batch), labels, loss).item() * len(idx)
                continue
            with Tape() as tape:
                value = compute_loss(forward(state, batch), labels, loss)
            grads = backward(tape, value)
            sgd_step(params, grads, groups)
            total += value.item() * len(idx)
            result.steps += 1
        result.epoch_losses.append(total / len(shard))
    logger.debug(f"Local training: {len(shard)} samples, losses {result.epoch_losses}")
    return result


def gradient_norm_sq(state: ModelState, dataset: LabeledDataset, loss: str = "cross_entropy") -> float:
    """Squared norm of the full-batch loss gradient w.r.t. the trainable tensors.

    Nothing is updated. Returns 0.0 when the state has nothing to train.
    """
    params = state.trainable_parameters()
    if not params or len(dataset) == 0:
        return 0.0
    with Tape() as tape:
        value = compute_loss(forward(state, dataset.features), dataset.labels, loss)
    return backward(tape, value).squared_norm(params)
