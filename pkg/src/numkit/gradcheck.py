"""Central finite-difference checks for reverse-mode gradients.

Example:
    >>> x = Tensor(np.random.default_rng(0).uniform(-1, 1, (3, 4)), requires_grad=True)
    >>> errors = check_gradients(lambda: ops.sum(ops.gelu(x)), [x])
    >>> max(errors.values()) < 1e-6
    True
"""
from typing import Callable, Dict, Sequence

import numpy as np

from .tensor import Tape, Tensor, backward

DEFAULT_STEP = 1e-5


def numerical_gradient(fn: Callable[[], Tensor], tensor: Tensor,
                       step: float = DEFAULT_STEP) -> np.ndarray:
    """Central-difference gradient of the scalar `fn()` w.r.t. `tensor`.

    The tensor's values are perturbed one entry at a time and restored
    afterwards.
    """
    original = tensor.numpy()
    grad = np.zeros(original.shape)
    flat = grad.reshape(-1)
    for i in range(original.size):
        shifted = original.copy().reshape(-1)
        shifted[i] += step
        tensor._assign(shifted.reshape(original.shape))
        upper = fn().item()
        shifted[i] -= 2.0 * step
        tensor._assign(shifted.reshape(original.shape))
        lower = fn().item()
        flat[i] = (upper - lower) / (2.0 * step)
    tensor._assign(original)
    return grad


def relative_error(analytic: np.ndarray, numeric: np.ndarray) -> float:
    """||a - n|| / max(||a||, ||n||); zero when both vanish."""
    scale = max(float(np.linalg.norm(analytic)), float(np.linalg.norm(numeric)))
    if scale == 0.0:
        return 0.0
    return float(np.linalg.norm(analytic - numeric)) / scale


def analytic_gradients(fn: Callable[[], Tensor], tensors: Sequence[Tensor]) -> Dict[int, np.ndarray]:
    with Tape() as tape:
        loss = fn()
    grads = backward(tape, loss)
    return {id(t): grads[t] for t in tensors}


def check_gradients(fn: Callable[[], Tensor], tensors: Sequence[Tensor],
                    step: float = DEFAULT_STEP) -> Dict[str, float]:
    """Compare reverse-mode and finite-difference gradients.

    Args:
        fn: Builds the scalar loss from the current tensor values.
        tensors: Leaves to check; they must have `requires_grad` set.
        step: Finite-difference step.

    Returns:
        Relative error per tensor, keyed by its name (or position).
    """
    analytic = analytic_gradients(fn, tensors)
    errors = {}
    for index, tensor in enumerate(tensors):
        numeric = numerical_gradient(fn, tensor, step)
        errors[tensor.name or str(index)] = relative_error(analytic[id(tensor)], numeric)
    return errors
