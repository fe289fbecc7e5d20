"""Data models exchanged between clients and the server."""
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

from ..lora import LoraAdapter
from ..numkit import Tensor


@dataclass
class ClientUpdate:
    """What one client uploads at the end of a round.

    Attributes:
        client_id: Index of the client.
        num_samples: Shard size N_k.
        factors: Trained (B_k, A_k) per adapted matrix.
        head: Optional (weight, bias) of the client's classifier.
        dense: Optional trained backbone tensors (full fine-tuning only).
    """
    client_id: int
    num_samples: int
    factors: Dict[str, LoraAdapter] = field(default_factory=dict)
    head: Optional[Tuple[Tensor, Tensor]] = None
    dense: Dict[str, Tensor] = field(default_factory=dict)


@dataclass
class AggregationResult:
    """Outcome of one server aggregation.

    Attributes:
        strategy: Strategy that produced the result.
        weights: Aggregation weights, one per update, summing to 1.
        factors: Aggregated (B, A) per adapted matrix; empty for `dense`.
        w_res: Residual weight per adapted matrix, applied or diagnostic.
        applied_residual: Whether clients fold `w_res` into their bases.
        dense: Dense target weights per matrix (`dense`) or averaged
            backbone tensors (full fine-tuning).
        residual_norms: Frobenius norm of `w_res` per matrix.
    """
    strategy: str
    weights: List[float]
    factors: Dict[str, LoraAdapter] = field(default_factory=dict)
    w_res: Dict[str, Tensor] = field(default_factory=dict)
    applied_residual: bool = False
    dense: Dict[str, Tensor] = field(default_factory=dict)
    residual_norms: Dict[str, float] = field(default_factory=dict)

    @property
    def total_residual_norm(self) -> float:
        return float(sum(self.residual_norms.values()))
