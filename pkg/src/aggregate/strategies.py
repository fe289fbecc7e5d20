"""Server-side aggregation strategies.

Averaging LoRA factors separately does not average the adapted weights:

    (sum_k w_k B_k)(sum_k w_k A_k) != sum_k w_k B_k A_k

The residual weight `W_res` is exactly the difference. Folding it into the
frozen base makes factor averaging reproduce dense weighted averaging of
the client models. Every weighted sum runs in client order, starting from
the first client's term, and every product uses `ordered_matmul`.
"""
import logging
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from ..lora import LoraAdapter
from ..numkit import Tensor, ordered_matmul
from ..utils.error_utils import ConfigurationError, ProtocolError, ShapeError, ValidationError
from .models import AggregationResult, ClientUpdate

logger = logging.getLogger(__name__)

AGGREGATION_STRATEGIES = ("reswu", "naive", "ffa", "dense")


def fedavg_weights(counts: Sequence[int]) -> List[float]:
    """FedAvg weights w_k = N_k / sum(N).

    Raises:
        ValidationError: On a negative count.
        ProtocolError: If every count is zero.
    """
    if any(n < 0 for n in counts):
        raise ValidationError(f"sample counts must be >= 0, got {list(counts)}")
    total = sum(int(n) for n in counts)
    if total == 0:
        raise ProtocolError("no client holds any sample; nothing to aggregate")
    return [int(n) / total for n in counts]


def _weighted_sum(arrays: Sequence[np.ndarray], weights: Sequence[float]) -> np.ndarray:
    acc = weights[0] * arrays[0]
    for w, x in zip(weights[1:], arrays[1:]):
        acc = acc + w * x
    return acc


def _check_updates(updates: Sequence[ClientUpdate], weights: Sequence[float]) -> List[str]:
    if not updates:
        raise ProtocolError("aggregation needs at least one client update")
    if len(updates) != len(weights):
        raise ShapeError("one weight per client update required", (len(updates),), (len(weights),))
    names = sorted(updates[0].factors)
    for update in updates[1:]:
        if sorted(update.factors) != names:
            raise ShapeError(f"client {update.client_id} adapts different matrices")
        for name in names:
            first, other = updates[0].factors[name], update.factors[name]
            if first.B.shape != other.B.shape or first.A.shape != other.A.shape:
                raise ShapeError(f"factor shapes of {name} differ between clients",
                                 first.B.shape, first.A.shape, other.B.shape, other.A.shape)
    return names


def aggregate_factors(updates: Sequence[ClientUpdate],
                      weights: Sequence[float]) -> Dict[str, LoraAdapter]:
    """Weighted factor averages B = sum w_k B_k and A = sum w_k A_k per matrix."""
    result = {}
    for name in _check_updates(updates, weights):
        B = _weighted_sum([u.factors[name].B.data for u in updates], weights)
        A = _weighted_sum([u.factors[name].A.data for u in updates], weights)
        result[name] = LoraAdapter(B=Tensor(B, name="B"), A=Tensor(A, name="A"))
    return result


def _product_mean(updates: Sequence[ClientUpdate], weights: Sequence[float], name: str) -> np.ndarray:
    return _weighted_sum(
        [ordered_matmul(u.factors[name].B.data, u.factors[name].A.data) for u in updates], weights
    )


def residual_weight(updates: Sequence[ClientUpdate],
                    weights: Sequence[float]) -> Dict[str, Tensor]:
    """W_res = sum w_k B_k A_k - (sum w_k B_k)(sum w_k A_k) for every adapted matrix."""
    factors = aggregate_factors(updates, weights)
    return {
        name: Tensor(_product_mean(updates, weights, name)
                     - ordered_matmul(adapter.B.data, adapter.A.data), name="W_res")
        for name, adapter in factors.items()
    }


def residual_weight_pairwise(updates: Sequence[ClientUpdate],
                             weights: Sequence[float]) -> Dict[str, Tensor]:
    """The residual weight in pairwise-difference form.

    sum over k < l of w_k w_l (B_k - B_l)(A_k - A_l). Equal to
    `residual_weight` whenever the weights sum to one.
    """
    result = {}
    for name in _check_updates(updates, weights):
        d, k = updates[0].factors[name].B.shape[0], updates[0].factors[name].A.shape[1]
        acc = np.zeros((d, k))
        for i in range(len(updates)):
            for j in range(i + 1, len(updates)):
                dB = updates[i].factors[name].B.data - updates[j].factors[name].B.data
                dA = updates[i].factors[name].A.data - updates[j].factors[name].A.data
                acc = acc + (weights[i] * weights[j]) * ordered_matmul(dB, dA)
        result[name] = Tensor(acc, name="W_res")
    return result


def dense_aggregate_oracle(W0: Tensor, updates: Sequence[ClientUpdate], weights: Sequence[float],
                           name: str) -> Tensor:
    """The weighted dense target W0 + sum w_k B_k A_k of matrix `name`.

    Raises:
        ShapeError: If the factor products do not match W0.
    """
    _check_updates(updates, weights)
    product = _product_mean(updates, weights, name)
    if product.shape != W0.shape:
        raise ShapeError(f"factor product of {name} does not match its base", product.shape, W0.shape)
    return Tensor(W0.data + product, name=name)


def _residual_norms(w_res: Mapping[str, Tensor]) -> Dict[str, float]:
    return {name: float(np.linalg.norm(t.data)) for name, t in w_res.items()}


def aggregate(strategy: str, updates: Sequence[ClientUpdate], weights: Sequence[float],
              bases: Optional[Mapping[str, Tensor]] = None) -> AggregationResult:
    """Aggregate client factors with the named strategy.

    Args:
        strategy: "reswu" (factors plus an applied residual), "naive" (factors,
            residual reported but not applied), "ffa" (B averaged over a
            shared A) or "dense" (dense target matrices, no factors).
        updates: Client uploads, in client order.
        weights: Aggregation weights aligned with `updates`.
        bases: Current frozen weight per adapted matrix; required by "dense".

    Returns:
        The aggregation result.

    Raises:
        ConfigurationError: On an unknown strategy.
        ProtocolError: For "ffa" when the clients' A factors differ, or for
            "dense" without bases.
    """
    if strategy not in AGGREGATION_STRATEGIES:
        raise ConfigurationError(f"expected one of {AGGREGATION_STRATEGIES}, got {strategy!r}",
                                 field="strategy")
    weights = [float(w) for w in weights]
    result = AggregationResult(strategy=strategy, weights=weights)

    if strategy == "dense":
        if bases is None:
            raise ProtocolError("dense aggregation needs the current frozen bases")
        names = _check_updates(updates, weights)
        result.dense = {name: dense_aggregate_oracle(bases[name], updates, weights, name) for name in names}
        return result

    if strategy == "ffa":
        names = _check_updates(updates, weights)
        for name in names:
            shared = updates[0].factors[name].A.data
            for update in updates[1:]:
                if not np.array_equal(update.factors[name].A.data, shared):
                    raise ProtocolError(f"client {update.client_id} changed the shared A of {name}")
        result.factors = {
            name: LoraAdapter(
                B=Tensor(_weighted_sum([u.factors[name].B.data for u in updates], weights), name="B"),
                A=updates[0].factors[name].A.copy(requires_grad=False),
            )
            for name in names
        }
    else:
        result.factors = aggregate_factors(updates, weights)

    result.w_res = residual_weight(updates, weights)
    result.residual_norms = _residual_norms(result.w_res)
    result.applied_residual = strategy == "reswu"
    logger.debug(f"{strategy}: residual norms {result.residual_norms}")
    return result


def _check_heads(updates: Sequence[ClientUpdate]) -> Tuple[Tuple[int, ...], Tuple[int, ...]]:
    if any(u.head is None for u in updates):
        raise ProtocolError("every client must upload a head for head aggregation")
    weight_shape, bias_shape = updates[0].head[0].shape, updates[0].head[1].shape
    for update in updates[1:]:
        if update.head[0].shape != weight_shape or update.head[1].shape != bias_shape:
            raise ShapeError(f"head of client {update.client_id} differs",
                             weight_shape, update.head[0].shape)
    return weight_shape, bias_shape


def aggregate_head(updates: Sequence[ClientUpdate],
                   weights: Sequence[float]) -> Tuple[Tensor, Tensor]:
    """Weighted average of the client classifiers, used for evaluation only."""
    if len(updates) != len(weights):
        raise ShapeError("one weight per client update required", (len(updates),), (len(weights),))
    _check_heads(updates)
    weight = _weighted_sum([u.head[0].data for u in updates], weights)
    bias = _weighted_sum([u.head[1].data for u in updates], weights)
    return Tensor(weight, name="head.weight"), Tensor(bias, name="head.bias")


def average_dense(updates: Sequence[ClientUpdate], weights: Sequence[float]) -> Dict[str, Tensor]:
    """Weighted average of fully fine-tuned backbone tensors."""
    if not updates or len(updates) != len(weights):
        raise ShapeError("one weight per client update required", (len(updates),), (len(weights),))
    names = sorted(updates[0].dense)
    for update in updates[1:]:
        if sorted(update.dense) != names:
            raise ShapeError(f"client {update.client_id} uploads different backbone tensors")
    return {
        name: Tensor(_weighted_sum([u.dense[name].data for u in updates], weights), name=name)
        for name in names
    }
