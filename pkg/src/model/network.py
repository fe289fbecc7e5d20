"""Forward pass of the classifier family.

Every linear map is `x @ W.T` with `W` of shape (out, in) and no bias. A
transformer block is pre-norm:

    h = h + attention(q, k, v) @ Wo.T     with q, k, v = LN1(h) @ W{q,k,v}.T
    h = h + gelu(LN2(h) @ Wfc1.T) @ Wfc2.T
"""
import numpy as np

from .. import numkit
from ..numkit import Tensor
from ..utils.error_utils import ShapeError
from .state import ModelState


def _linear(x: Tensor, weight: Tensor) -> Tensor:
    return numkit.matmul(x, numkit.transpose(weight))


def _layer_norm(state: ModelState, h: Tensor, prefix: str) -> Tensor:
    return numkit.layer_norm(h, state.params[f"{prefix}.gain"], state.params[f"{prefix}.bias"],
                             state.config.ln_eps)


def _transformer_features(state: ModelState, x: Tensor) -> Tensor:
    cfg = state.config
    n = x.shape[0]
    h = numkit.reshape(x, (n * cfg.num_tokens, cfg.patch_dim))
    h = numkit.add_rows(_linear(h, state.params["embed"]), state.params["pos"])
    for block in range(cfg.depth):
        prefix = f"blocks.{block}"
        a = _layer_norm(state, h, f"{prefix}.ln1")
        q = _linear(a, state.weight(f"{prefix}.q"))
        k = _linear(a, state.weight(f"{prefix}.k"))
        v = _linear(a, state.weight(f"{prefix}.v"))
        att = numkit.attention(q, k, v, cfg.num_tokens)
        h = numkit.add(h, _linear(att, state.weight(f"{prefix}.o")))
        b = _layer_norm(state, h, f"{prefix}.ln2")
        ffn = _linear(numkit.gelu(_linear(b, state.weight(f"{prefix}.fc1"))), state.weight(f"{prefix}.fc2"))
        h = numkit.add(h, ffn)
    pooled = numkit.group_mean(h, cfg.num_tokens)
    return _layer_norm(state, pooled, "ln_f")


def _mlp_features(state: ModelState, x: Tensor) -> Tensor:
    h = numkit.relu(_linear(x, state.weight("blocks.0.fc1")))
    return numkit.relu(_linear(h, state.weight("blocks.0.fc2")))


def forward(state: ModelState, batch: Tensor) -> Tensor:
    """Logits over all C classes for a batch of input rows.

    Args:
        state: Model parameters.
        batch: n×input_dim inputs.

    Returns:
        n×C logits.

    Raises:
        ShapeError: If the batch width differs from the model's input width.
    """
    cfg = state.config
    if len(batch.shape) != 2 or batch.shape[1] != cfg.input_dim:
        raise ShapeError(f"batch must be n x {cfg.input_dim}", batch.shape)
    if cfg.arch == "linear":
        return _linear(batch, state.weight("blocks.0.fc1"))
    if cfg.arch == "mlp":
        features = _mlp_features(state, batch)
    else:
        features = _transformer_features(state, batch)
    return numkit.add_rows(_linear(features, state.head_weight), state.head_bias)


def predict(state: ModelState, batch: Tensor) -> np.ndarray:
    """Predicted class per row; ties go to the lowest class index."""
    return np.argmax(forward(state, batch).data, axis=1)
