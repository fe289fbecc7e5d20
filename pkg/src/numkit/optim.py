"""Plain SGD with per-group learning rates."""
import math
from dataclasses import dataclass, field
from typing import Dict, List, Sequence, Tuple

from ..utils.error_utils import ConfigurationError
from .tensor import Gradients, Tensor


@dataclass(frozen=True)
class ParamGroup:
    """A set of trainable tensors sharing one learning rate.

    Attributes:
        name: Group label, e.g. "lora" or "head".
        params: The tensors updated with `lr`.
        lr: Strictly positive learning rate.
    """
    name: str
    params: Tuple[Tensor, ...] = field(default_factory=tuple)
    lr: float = 0.0

    def __post_init__(self):
        if not (math.isfinite(self.lr) and self.lr > 0.0):
            raise ConfigurationError(f"learning rate must be > 0, got {self.lr}", field=f"group.{self.name}")
        object.__setattr__(self, "params", tuple(self.params))


def sgd_step(params: Sequence[Tensor], grads: Gradients,
             groups: Sequence[ParamGroup]) -> List[Tensor]:
    """Apply p <- p - lr_group * g to every parameter.

    Args:
        params: Tensors to update.
        grads: Gradients from `backward`.
        groups: Groups assigning a learning rate to each parameter; every
            parameter must belong to exactly one group.

    Returns:
        The updated parameters (the same tensor objects).

    Raises:
        ConfigurationError: If a parameter has no group or several groups.
    """
    rates: Dict[int, float] = {}
    for group in groups:
        for p in group.params:
            if id(p) in rates:
                raise ConfigurationError(f"parameter {p.name or p.shape} assigned to several groups")
            rates[id(p)] = group.lr
    for p in params:
        if id(p) not in rates:
            raise ConfigurationError(f"parameter {p.name or list(p.shape)} has no learning-rate group")
    for p in params:
        p._assign(p.data - rates[id(p)] * grads[p])
    return list(params)
