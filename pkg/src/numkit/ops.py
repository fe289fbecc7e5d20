"""Differentiable primitive operations for the fedtalora project.

Every function here takes and returns `Tensor` objects, checks operand
shapes, and registers itself on the active `Tape` when one of its inputs is
traced. Matrix products accumulate in a fixed left-to-right order over the
inner dimension, so results are bit-identical to a sequential triple loop
and independent of BLAS threading.

The GELU activation uses the tanh approximation

    gelu(x) = 0.5 * x * (1 + tanh(sqrt(2 / pi) * (x + 0.044715 * x**3)))
"""
import math
from typing import Callable, Optional, Sequence, Tuple

import numpy as np

from ..utils.error_utils import ShapeError, UsageError, ValidationError
from .tensor import Tape, Tensor

GELU_C = math.sqrt(2.0 / math.pi)
GELU_K = 0.044715


def _emit(op: str, inputs: Tuple[Tensor, ...], value: np.ndarray,
          backward_fn: Callable[[np.ndarray], Sequence[Optional[np.ndarray]]]) -> Tensor:
    out = Tensor._wrap(value, op)
    tape = Tape.current()
    if tape is not None:
        tape._record(op, inputs, out, backward_fn)
    return out


def ordered_matmul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Matrix product with sequential accumulation over the inner dimension.

    Works on 2-D operands and on stacks of matrices (leading batch axes).
    """
    out = np.zeros(a.shape[:-1] + b.shape[-1:])
    for p in range(a.shape[-1]):
        out += a[..., :, p:p + 1] * b[..., p:p + 1, :]
    return out


def _require_2d(op: str, *tensors: Tensor) -> None:
    for t in tensors:
        if len(t.shape) != 2:
            raise ShapeError(f"{op} expects 2-D operands", *(x.shape for x in tensors))


def _require_same(op: str, a: Tensor, b: Tensor) -> None:
    if a.shape != b.shape:
        raise ShapeError(f"{op} shape mismatch", a.shape, b.shape)


def matmul(a: Tensor, b: Tensor) -> Tensor:
    """Standard matrix product of an m×k and a k×n tensor."""
    _require_2d("matmul", a, b)
    if a.shape[1] != b.shape[0]:
        raise ShapeError("matmul inner dimensions differ", a.shape, b.shape)
    a_data, b_data = a.data, b.data

    def grad(g):
        return ordered_matmul(g, b_data.T), ordered_matmul(a_data.T, g)

    return _emit("matmul", (a, b), ordered_matmul(a_data, b_data), grad)


def transpose(a: Tensor) -> Tensor:
    _require_2d("transpose", a)
    return _emit("transpose", (a,), a.data.T.copy(), lambda g: (g.T,))


def reshape(a: Tensor, shape: Sequence[int]) -> Tensor:
    shape = tuple(int(s) for s in shape)
    if int(np.prod(shape)) != a.size:
        raise ShapeError("reshape changes the element count", a.shape, shape)
    original = a.shape
    return _emit("reshape", (a,), a.data.reshape(shape).copy(), lambda g: (g.reshape(original),))


def add(a: Tensor, b: Tensor) -> Tensor:
    _require_same("add", a, b)
    return _emit("add", (a, b), a.data + b.data, lambda g: (g, g))


def sub(a: Tensor, b: Tensor) -> Tensor:
    _require_same("sub", a, b)
    return _emit("sub", (a, b), a.data - b.data, lambda g: (g, -g))


def scale(a: Tensor, factor: float) -> Tensor:
    factor = float(factor)
    return _emit("scale", (a,), a.data * factor, lambda g: (g * factor,))


def relu(a: Tensor) -> Tensor:
    mask = (a.data > 0.0).astype(np.float64)
    return _emit("relu", (a,), a.data * mask, lambda g: (g * mask,))


def gelu(a: Tensor) -> Tensor:
    x = a.data
    t = np.tanh(GELU_C * (x + GELU_K * x ** 3))
    value = 0.5 * x * (1.0 + t)

    def grad(g):
        dt = (1.0 - t * t) * GELU_C * (1.0 + 3.0 * GELU_K * x * x)
        return (g * (0.5 * (1.0 + t) + 0.5 * x * dt),)

    return _emit("gelu", (a,), value, grad)


_ELEMENTWISE = {
    "add": add,
    "sub": sub,
    "scale": scale,
    "gelu": gelu,
    "relu": relu,
}


def elementwise(op: str, *args) -> Tensor:
    """Dispatch to one of the elementwise operations by name.

    Args:
        op: One of `add`, `sub`, `scale`, `gelu`, `relu`.
        *args: Operands of the selected operation.
    """
    try:
        fn = _ELEMENTWISE[op]
    except KeyError:
        raise UsageError(f"unknown elementwise op {op!r}; expected one of {sorted(_ELEMENTWISE)}")
    return fn(*args)


def add_rows(x: Tensor, b: Tensor) -> Tensor:
    """Add `b` to every row (1-D `b`) or tile a block of rows (2-D `b`).

    A 2-D `b` of shape (g, d) is added to each consecutive group of g rows
    of the (n*g, d) operand; positional embeddings use this form.
    """
    _require_2d("add_rows", x)
    rows, cols = x.shape
    if len(b.shape) == 1:
        if b.shape[0] != cols:
            raise ShapeError("add_rows bias width differs", x.shape, b.shape)
        return _emit("add_rows", (x, b), x.data + b.data,
                     lambda g: (g, g.sum(axis=0)))
    if len(b.shape) != 2 or b.shape[1] != cols or rows % b.shape[0] != 0:
        raise ShapeError("add_rows block does not tile the operand", x.shape, b.shape)
    group = b.shape[0]
    tiled = np.tile(b.data, (rows // group, 1))
    return _emit("add_rows", (x, b), x.data + tiled,
                 lambda g: (g, g.reshape(rows // group, group, cols).sum(axis=0)))


def group_mean(x: Tensor, group: int) -> Tensor:
    """Mean over consecutive groups of `group` rows: (n*group, d) -> (n, d)."""
    _require_2d("group_mean", x)
    rows, cols = x.shape
    if group < 1 or rows % group != 0:
        raise ShapeError(f"group_mean cannot split rows into groups of {group}", x.shape)
    value = x.data.reshape(rows // group, group, cols).mean(axis=1)

    def grad(g):
        return (np.repeat(g / group, group, axis=0),)

    return _emit("group_mean", (x,), value, grad)


def layer_norm(x: Tensor, gain: Tensor, bias: Tensor, eps: float = 1e-5) -> Tensor:
    """Per-row normalisation to zero mean and unit variance, then affine.

    A zero-variance row maps to `bias` because the denominator is
    `sqrt(var + eps)`.
    """
    _require_2d("layer_norm", x)
    if eps <= 0.0:
        raise ValidationError(f"layer_norm eps must be > 0, got {eps}")
    d = x.shape[1]
    if gain.shape != (d,) or bias.shape != (d,):
        raise ShapeError("layer_norm gain/bias width differs", x.shape, gain.shape, bias.shape)
    centred = x.data - x.data.mean(axis=1, keepdims=True)
    inv_std = 1.0 / np.sqrt((centred * centred).mean(axis=1, keepdims=True) + eps)
    xhat = centred * inv_std
    gain_data = gain.data

    def grad(g):
        dxhat = g * gain_data
        dx = inv_std * (
            dxhat
            - dxhat.mean(axis=1, keepdims=True)
            - xhat * (dxhat * xhat).mean(axis=1, keepdims=True)
        )
        return dx, (g * xhat).sum(axis=0), g.sum(axis=0)

    return _emit("layer_norm", (x, gain, bias), xhat * gain_data + bias.data, grad)


def _softmax_last(s: np.ndarray) -> np.ndarray:
    e = np.exp(s - s.max(axis=-1, keepdims=True))
    return e / e.sum(axis=-1, keepdims=True)


def attention(q: Tensor, k: Tensor, v: Tensor, tokens: int) -> Tensor:
    """Single-head scaled dot-product attention within each sample.

    The (n*tokens, d) operands hold `tokens` consecutive rows per sample;
    attention never crosses sample boundaries.
    """
    _require_2d("attention", q, k, v)
    if not (q.shape == k.shape == v.shape):
        raise ShapeError("attention operands differ", q.shape, k.shape, v.shape)
    rows, d = q.shape
    if tokens < 1 or rows % tokens != 0:
        raise ShapeError(f"attention cannot split rows into {tokens} tokens", q.shape)
    n = rows // tokens
    factor = 1.0 / math.sqrt(d)
    Q = q.data.reshape(n, tokens, d)
    K = k.data.reshape(n, tokens, d)
    V = v.data.reshape(n, tokens, d)
    P = _softmax_last(ordered_matmul(Q, K.transpose(0, 2, 1)) * factor)
    value = ordered_matmul(P, V).reshape(rows, d)

    def grad(g):
        G = g.reshape(n, tokens, d)
        dV = ordered_matmul(P.transpose(0, 2, 1), G)
        dP = ordered_matmul(G, V.transpose(0, 2, 1))
        dS = P * (dP - (dP * P).sum(axis=-1, keepdims=True)) * factor
        dQ = ordered_matmul(dS, K)
        dK = ordered_matmul(dS.transpose(0, 2, 1), Q)
        return dQ.reshape(rows, d), dK.reshape(rows, d), dV.reshape(rows, d)

    return _emit("attention", (q, k, v), value, grad)


def sum(x: Tensor) -> Tensor:  # noqa: A001
    shape = x.shape
    return _emit("sum", (x,), np.array(x.data.sum()), lambda g: (np.full(shape, float(g)),))


def _check_labels(labels: Sequence[int], rows: int, classes: int) -> np.ndarray:
    y = np.asarray(labels, dtype=np.int64).reshape(-1)
    if y.shape[0] != rows:
        raise ShapeError("one label per row required", (rows,), y.shape)
    if y.size and (y.min() < 0 or y.max() >= classes):
        raise ValidationError(f"labels must lie in [0, {classes}), got range [{y.min()}, {y.max()}]")
    return y


def softmax_cross_entropy(logits: Tensor, labels: Sequence[int]) -> Tensor:
    """Mean negative log-softmax probability of the true class.

    The log-sum-exp is evaluated as `max + log1p(sum of the other terms)`,
    which keeps confident predictions accurate (logits [10, -10] with label
    0 give about 2.06e-9) and never overflows.

    Returns:
        A scalar tensor; call `.item()` for the float.
    """
    _require_2d("softmax_cross_entropy", logits)
    n, classes = logits.shape
    if n == 0:
        raise ValidationError("softmax_cross_entropy on an empty batch")
    y = _check_labels(labels, n, classes)
    z = logits.data - logits.data.max(axis=1, keepdims=True)
    e = np.exp(z)
    top = np.argmax(z, axis=1)
    others = e.copy()
    others[np.arange(n), top] = 0.0
    lse = np.log1p(others.sum(axis=1))
    log_p = z - lse[:, None]
    loss = -log_p[np.arange(n), y].mean()
    probs = e / e.sum(axis=1, keepdims=True)

    def grad(g):
        d = probs.copy()
        d[np.arange(n), y] -= 1.0
        return (d * (float(g) / n),)

    return _emit("softmax_cross_entropy", (logits,), np.array(loss), grad)


def mse_loss(pred: Tensor, labels: Sequence[int]) -> Tensor:
    """Quadratic loss against one-hot targets: 0.5 * mean_i ||pred_i - onehot(y_i)||^2."""
    _require_2d("mse_loss", pred)
    n, classes = pred.shape
    if n == 0:
        raise ValidationError("mse_loss on an empty batch")
    y = _check_labels(labels, n, classes)
    diff = pred.data.copy()
    diff[np.arange(n), y] -= 1.0
    loss = 0.5 * (diff * diff).sum(axis=1).mean()
    return _emit("mse_loss", (pred,), np.array(loss), lambda g: (diff * (float(g) / n),))
