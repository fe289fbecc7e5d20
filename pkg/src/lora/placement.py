"""Adapter placement: which weight matrices of which blocks carry LoRA.

Matrices are addressed as `blocks.<i>.<m>` with `m` one of the attention
projections `q`, `k`, `v`, `o` or the feed-forward matrices `fc1`, `fc2`.
Block selections follow the first / mid / last / all naming used in
placement sweeps.
"""
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Protocol, Tuple

from ..utils.error_utils import ConfigurationError

ATTENTION_MATRICES = ("q", "k", "v", "o")
FFN_MATRICES = ("fc1", "fc2")
BLOCK_SELECTIONS = ("first", "mid", "last", "all")


class AdaptableModel(Protocol):
    """What placement needs to know about a model configuration."""

    block_count: int

    def matrix_shapes(self) -> Dict[str, Tuple[int, int]]:
        ...

    def head_parameters(self) -> int:
        ...


def matrix_name(block: int, matrix: str) -> str:
    return f"blocks.{block}.{matrix}"


@dataclass(frozen=True)
class PlacementSpec:
    """Selection of adapted matrices.

    Attributes:
        attention: Attention projections to adapt in each selected block.
        ffn: Feed-forward matrices to adapt in each selected block.
        blocks: One of "first", "mid", "last", "all".
        num_blocks: How many blocks the selection spans; defaults to
            ceil(depth / 3). Ignored for "all".
    """
    attention: Tuple[str, ...] = ATTENTION_MATRICES
    ffn: Tuple[str, ...] = FFN_MATRICES
    blocks: str = "first"
    num_blocks: Optional[int] = None

    def __post_init__(self):
        object.__setattr__(self, "attention", tuple(self.attention))
        object.__setattr__(self, "ffn", tuple(self.ffn))
        unknown = [m for m in self.attention if m not in ATTENTION_MATRICES]
        unknown += [m for m in self.ffn if m not in FFN_MATRICES]
        if unknown:
            raise ConfigurationError(f"unknown matrices {unknown}", field="lora")
        if self.blocks not in BLOCK_SELECTIONS:
            raise ConfigurationError(f"expected one of {BLOCK_SELECTIONS}, got {self.blocks!r}",
                                     field="lora.blocks")
        if not self.attention and not self.ffn:
            raise ConfigurationError("at least one matrix must be adapted", field="lora")

    def block_indices(self, depth: int) -> List[int]:
        """Indices of the selected blocks for a model of `depth` blocks."""
        if self.blocks == "all":
            return list(range(depth))
        n = self.num_blocks if self.num_blocks is not None else math.ceil(depth / 3)
        if not 1 <= n <= depth:
            raise ConfigurationError(f"{n} blocks requested from a model of depth {depth}",
                                     field="lora.num_blocks")
        if self.blocks == "first":
            start = 0
        elif self.blocks == "last":
            start = depth - n
        else:
            start = (depth - n) // 2
        return list(range(start, start + n))

    def adapted_matrices(self, model: AdaptableModel) -> List[str]:
        """Names of the adapted matrices, in model order.

        Raises:
            ConfigurationError: If the selection hits no matrix of the model.
        """
        wanted = set(self.attention) | set(self.ffn)
        blocks = set(self.block_indices(model.block_count))
        names = [
            name for name in model.matrix_shapes()
            if int(name.split(".")[1]) in blocks and name.split(".")[2] in wanted
        ]
        if not names:
            raise ConfigurationError("placement selects no matrix of this architecture", field="lora")
        return names


@dataclass(frozen=True)
class TrainableCount:
    """Trainable-parameter report.

    Attributes:
        lora: Sum of r(d+k) over adapted matrices.
        head: Classifier weight and bias entries.
        per_matrix: r(d+k) for each adapted matrix.
    """
    lora: int
    head: int
    per_matrix: Dict[str, int] = field(default_factory=dict)

    @property
    def total(self) -> int:
        return self.lora + self.head


def count_trainable(placement: Optional[PlacementSpec], model: AdaptableModel,
                    rank: int) -> TrainableCount:
    """Count trainable parameters of a LoRA placement.

    Args:
        placement: The placement, or None for a head-only model.
        model: Model configuration.
        rank: Adapter rank r.

    Returns:
        LoRA and head counts, reported separately.
    """
    per_matrix = {}
    if placement is not None:
        shapes = model.matrix_shapes()
        for name in placement.adapted_matrices(model):
            d, k = shapes[name]
            per_matrix[name] = rank * (d + k)
    return TrainableCount(lora=sum(per_matrix.values()), head=model.head_parameters(),
                          per_matrix=per_matrix)
