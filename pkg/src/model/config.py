"""Architecture configuration for the classifier family.

Three architectures share one configuration type:

* ``transformer``: the input row is cut into ``num_tokens`` patches, embedded
  to ``dim``, passed through ``depth`` pre-norm single-head blocks, mean
  pooled and normalised before the classification head.
* ``mlp``: two bias-free ReLU layers of width ``dim`` and the head.
* ``linear``: one weight matrix mapping the input straight to the logits,
  with no head (the convex surrogate).
"""
from dataclasses import dataclass
from typing import Dict, Tuple

from ..config import DEFAULT_DEPTH, DEFAULT_DIM, DEFAULT_FFN_DIM, DEFAULT_NUM_TOKENS
from ..lora.placement import ATTENTION_MATRICES, matrix_name
from ..utils.error_utils import ConfigurationError

ARCHITECTURES = ("transformer", "mlp", "linear")


@dataclass(frozen=True)
class ModelConfig:
    """Shape of a classifier.

    Attributes:
        input_dim: Width of an input row.
        num_classes: Total class count C over all tasks.
        arch: One of "transformer", "mlp", "linear".
        depth: Number of transformer blocks.
        dim: Embedding width (hidden width for the MLP).
        heads: Attention heads; only single-head attention is supported.
        ffn_dim: Hidden width of the feed-forward sub-layer.
        num_tokens: Patches per input row for the transformer.
        ln_eps: Layer-norm stabiliser.
    """
    input_dim: int
    num_classes: int
    arch: str = "transformer"
    depth: int = DEFAULT_DEPTH
    dim: int = DEFAULT_DIM
    heads: int = 1
    ffn_dim: int = DEFAULT_FFN_DIM
    num_tokens: int = DEFAULT_NUM_TOKENS
    ln_eps: float = 1e-5

    def __post_init__(self):
        if self.arch not in ARCHITECTURES:
            raise ConfigurationError(f"expected one of {ARCHITECTURES}, got {self.arch!r}", field="model.arch")
        for name in ("input_dim", "num_classes", "depth", "dim", "heads", "ffn_dim", "num_tokens"):
            if getattr(self, name) < 1:
                raise ConfigurationError(f"must be >= 1, got {getattr(self, name)}", field=f"model.{name}")
        if self.heads != 1:
            raise ConfigurationError("only single-head attention is supported", field="model.heads")
        if self.dim % self.heads:
            raise ConfigurationError("dim must be divisible by heads", field="model.dim")
        if self.ln_eps <= 0.0:
            raise ConfigurationError(f"must be > 0, got {self.ln_eps}", field="model.ln_eps")
        if self.arch == "transformer" and self.input_dim % self.num_tokens:
            raise ConfigurationError(
                f"input_dim {self.input_dim} is not divisible into {self.num_tokens} tokens",
                field="model.num_tokens",
            )

    @property
    def block_count(self) -> int:
        return self.depth if self.arch == "transformer" else 1

    @property
    def patch_dim(self) -> int:
        return self.input_dim // self.num_tokens

    @property
    def has_head(self) -> bool:
        return self.arch != "linear"

    def matrix_shapes(self) -> Dict[str, Tuple[int, int]]:
        """Shapes (out, in) of every adaptable matrix, in model order."""
        if self.arch == "linear":
            return {matrix_name(0, "fc1"): (self.num_classes, self.input_dim)}
        if self.arch == "mlp":
            return {
                matrix_name(0, "fc1"): (self.dim, self.input_dim),
                matrix_name(0, "fc2"): (self.dim, self.dim),
            }
        shapes = {}
        for block in range(self.depth):
            for m in ATTENTION_MATRICES:
                shapes[matrix_name(block, m)] = (self.dim, self.dim)
            shapes[matrix_name(block, "fc1")] = (self.ffn_dim, self.dim)
            shapes[matrix_name(block, "fc2")] = (self.dim, self.ffn_dim)
        return shapes

    def head_parameters(self) -> int:
        return self.num_classes * self.dim + self.num_classes if self.has_head else 0

    def backbone_parameters(self) -> int:
        """Entries of every backbone tensor, trained only in full fine-tuning."""
        total = sum(d * k for d, k in self.matrix_shapes().values())
        if self.arch == "transformer":
            total += self.dim * self.patch_dim + self.num_tokens * self.dim
            total += (4 * self.depth + 2) * self.dim
        return total
