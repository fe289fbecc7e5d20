"""Low-rank adapters and the frozen base weights they modify.

An adapted weight is always evaluated as `W0 + W_res_accum + B @ A`. The
original weight `W0` never changes; server-computed residual corrections are
accumulated separately in `W_res_accum` through `apply_reswu`, so the total
correction can be inspected or reset. There is no alpha/r scaling: the
update is exactly `B @ A`.
"""
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .. import numkit
from ..numkit import Tensor
from ..utils.error_utils import ConfigurationError, ShapeError


@dataclass
class LoraAdapter:
    """Trainable factor pair of one adapted matrix.

    Attributes:
        B: d×r factor, zero at initialization.
        A: r×k factor, Gaussian at initialization.
    """
    B: Tensor
    A: Tensor

    def __post_init__(self):
        if len(self.B.shape) != 2 or len(self.A.shape) != 2 or self.B.shape[1] != self.A.shape[0]:
            raise ShapeError("adapter factors do not chain", self.B.shape, self.A.shape)

    @property
    def rank(self) -> int:
        return self.B.shape[1]

    @property
    def shape(self):
        """Shape (d, k) of the adapted matrix."""
        return self.B.shape[0], self.A.shape[1]

    @property
    def num_parameters(self) -> int:
        return self.B.size + self.A.size

    def delta(self) -> Tensor:
        """The low-rank update B @ A."""
        return numkit.matmul(self.B, self.A)

    def copy(self, train_a: bool = True) -> "LoraAdapter":
        """Independent trainable copy; `train_a=False` freezes A."""
        return LoraAdapter(B=self.B.copy(requires_grad=True), A=self.A.copy(requires_grad=train_a))


@dataclass(frozen=True)
class FrozenBase:
    """Frozen weight of an adapted matrix plus its accumulated residuals.

    Attributes:
        W0: Original d×k weight; never modified after construction.
        W_res_accum: Sum of every residual applied so far.
    """
    W0: Tensor
    W_res_accum: Tensor

    def __post_init__(self):
        if self.W0.shape != self.W_res_accum.shape:
            raise ShapeError("residual accumulator differs from base", self.W0.shape, self.W_res_accum.shape)

    @classmethod
    def from_weight(cls, weight: Tensor) -> "FrozenBase":
        return cls(W0=weight, W_res_accum=Tensor.zeros(weight.shape))

    @property
    def shape(self):
        return self.W0.shape

    def current(self) -> Tensor:
        """The updated frozen weight W0' = W0 + W_res_accum."""
        return numkit.add(self.W0, self.W_res_accum)


def init_adapter(d: int, k: int, r: int, rng: np.random.Generator,
                 std: float = 0.02) -> LoraAdapter:
    """Create a fresh adapter with B = 0 and A ~ Normal(0, std^2).

    Args:
        d: Output dimension of the adapted matrix.
        k: Input dimension of the adapted matrix.
        r: Rank, 1 <= r <= min(d, k).
        rng: Deterministically seeded generator.
        std: Standard deviation of A's entries.

    Returns:
        An adapter whose product B @ A is exactly zero.

    Raises:
        ConfigurationError: If the rank is out of range or std is negative.
    """
    if not 1 <= r <= min(d, k):
        raise ConfigurationError(f"rank {r} outside [1, {min(d, k)}] for a {d}x{k} matrix", field="lora.rank")
    if std < 0.0:
        raise ConfigurationError(f"init std must be >= 0, got {std}", field="lora.init_std")
    return LoraAdapter(
        B=Tensor(np.zeros((d, r)), requires_grad=True, name="B"),
        A=Tensor(rng.normal(0.0, std, size=(r, k)), requires_grad=True, name="A"),
    )


def effective_weight(base: FrozenBase, adapter: Optional[LoraAdapter]) -> Tensor:
    """Weight used by the forward pass: W0 + W_res_accum + B @ A.

    Differentiable w.r.t. the adapter factors when traced. Without an
    adapter this is the updated frozen weight alone.

    Raises:
        ShapeError: If the adapter does not match the base.
    """
    weight = base.current()
    if adapter is None:
        return weight
    if adapter.shape != base.shape:
        raise ShapeError("adapter does not match base weight", adapter.shape, base.shape)
    return numkit.add(weight, adapter.delta())


def apply_reswu(base: FrozenBase, w_res: Tensor) -> FrozenBase:
    """Fold a residual weight update into the frozen base.

    Returns a new `FrozenBase` sharing `W0` with W_res_accum + w_res.

    Raises:
        ShapeError: If `w_res` does not match W0.
    """
    if w_res.shape != base.shape:
        raise ShapeError("residual does not match base weight", w_res.shape, base.shape)
    return FrozenBase(W0=base.W0, W_res_accum=numkit.add(base.W_res_accum, w_res))
