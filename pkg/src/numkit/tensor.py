"""Tensor and tape primitives for the fedtalora project.

This module defines the dense float64 `Tensor` that carries every number in
the simulator, the `Tape` that records primitive operations during a forward
pass, and `backward`, which replays a tape in reverse to produce gradients.

Example:
    >>> w = Tensor([[1.0, 2.0]], requires_grad=True)
    >>> with Tape() as tape:
    ...     loss = ops.sum(ops.scale(w, 3.0))
    >>> grads = backward(tape, loss)
    >>> grads[w]
    array([[3., 3.]])
"""
import threading
from dataclasses import dataclass
from typing import Callable, Dict, Iterator, List, Optional, Sequence, Tuple

import numpy as np

from ..utils.error_utils import UsageError, ValidationError

_local = threading.local()


def _freeze(array: np.ndarray, origin: str) -> np.ndarray:
    if not np.all(np.isfinite(array)):
        raise ValidationError(f"non-finite values produced by {origin}")
    array.flags.writeable = False
    return array


class Tensor:
    """Dense, row-major float64 array with a shape.

    Tensors are immutable: every operation returns a new tensor, and the only
    in-place change is the explicit parameter update performed by
    `src.numkit.optim.sgd_step`.

    Attributes:
        data: The read-only float64 array.
        requires_grad: Whether `backward` reports a gradient for this leaf.
        name: Optional label used in error messages and gradient reports.
    """

    __slots__ = ("data", "requires_grad", "name")

    def __init__(self, data, requires_grad: bool = False, name: Optional[str] = None):
        self.data = _freeze(np.array(data, dtype=np.float64), name or "Tensor()")
        self.requires_grad = requires_grad
        self.name = name

    @classmethod
    def _wrap(cls, array: np.ndarray, origin: str) -> "Tensor":
        tensor = cls.__new__(cls)
        tensor.data = _freeze(np.asarray(array, dtype=np.float64), origin)
        tensor.requires_grad = False
        tensor.name = None
        return tensor

    @classmethod
    def zeros(cls, shape: Sequence[int], requires_grad: bool = False,
              name: Optional[str] = None) -> "Tensor":
        return cls(np.zeros(tuple(shape)), requires_grad=requires_grad, name=name)

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.data.shape

    @property
    def size(self) -> int:
        return int(self.data.size)

    @property
    def nbytes(self) -> int:
        return int(self.data.nbytes)

    def numpy(self) -> np.ndarray:
        """Return a writable copy of the values."""
        return np.array(self.data)

    def item(self) -> float:
        if self.data.size != 1:
            raise UsageError(f"item() on tensor of shape {list(self.shape)}")
        return float(self.data.reshape(-1)[0])

    def copy(self, requires_grad: Optional[bool] = None) -> "Tensor":
        """Return an independent tensor with the same values and name."""
        return Tensor(
            self.data,
            requires_grad=self.requires_grad if requires_grad is None else requires_grad,
            name=self.name,
        )

    def _assign(self, array: np.ndarray) -> None:
        if array.shape != self.data.shape:
            raise UsageError(f"cannot assign shape {list(array.shape)} to {list(self.shape)}")
        self.data = _freeze(np.array(array, dtype=np.float64), self.name or "update")

    def __repr__(self) -> str:
        label = f", name={self.name!r}" if self.name else ""
        return f"Tensor(shape={list(self.shape)}, requires_grad={self.requires_grad}{label})"


@dataclass(frozen=True)
class _Node:
    op: str
    inputs: Tuple[Tensor, ...]
    traced: Tuple[bool, ...]
    output: Tensor
    backward: Callable[[np.ndarray], Sequence[Optional[np.ndarray]]]


class Tape:
    """Ordered record of the primitive operations of one forward pass.

    A tape becomes active inside a `with` block on the current thread only,
    so concurrent clients on different workers never share one. It is
    single-use: `backward` consumes it and releases intermediate buffers.
    """

    def __init__(self):
        self._nodes: List[_Node] = []
        self._traced: Dict[int, Tensor] = {}
        self._leaves: Dict[int, Tensor] = {}
        self._consumed = False

    def __enter__(self) -> "Tape":
        stack = getattr(_local, "stack", None)
        if stack is None:
            stack = _local.stack = []
        stack.append(self)
        return self

    def __exit__(self, *exc_info) -> None:
        _local.stack.pop()

    @staticmethod
    def current() -> Optional["Tape"]:
        """The innermost active tape on this thread, if any."""
        stack = getattr(_local, "stack", None)
        return stack[-1] if stack else None

    @property
    def consumed(self) -> bool:
        return self._consumed

    def __len__(self) -> int:
        return len(self._nodes)

    def ops(self) -> List[str]:
        """Names of the recorded operations in execution order."""
        return [node.op for node in self._nodes]

    def is_traced(self, tensor: Tensor) -> bool:
        return id(tensor) in self._traced

    def _watch(self, tensor: Tensor) -> bool:
        key = id(tensor)
        if key in self._traced:
            return True
        if tensor.requires_grad:
            self._traced[key] = tensor
            self._leaves[key] = tensor
            return True
        return False

    def _record(self, op: str, inputs: Tuple[Tensor, ...], output: Tensor,
                backward_fn: Callable[[np.ndarray], Sequence[Optional[np.ndarray]]]) -> None:
        if self._consumed:
            raise UsageError("tape already consumed by backward; start a new Tape per forward pass")
        traced = tuple(self._watch(t) for t in inputs)
        if not any(traced):
            return
        self._traced[id(output)] = output
        self._nodes.append(_Node(op, inputs, traced, output, backward_fn))

    def _release(self) -> None:
        self._nodes = []
        self._traced = {}
        self._consumed = True


class Gradients:
    """Gradients of one backward pass, keyed by tensor identity.

    Looking up a tensor that did not take part in the traced computation,
    such as a frozen backbone weight, yields an all-zero array.
    """

    def __init__(self, entries: Dict[int, Tuple[Tensor, np.ndarray]]):
        self._entries = entries

    def __getitem__(self, tensor: Tensor) -> np.ndarray:
        entry = self._entries.get(id(tensor))
        if entry is None or entry[0] is not tensor:
            return np.zeros(tensor.shape)
        return entry[1]

    def __contains__(self, tensor: Tensor) -> bool:
        entry = self._entries.get(id(tensor))
        return entry is not None and entry[0] is tensor

    def __len__(self) -> int:
        return len(self._entries)

    def __iter__(self) -> Iterator[Tensor]:
        return (tensor for tensor, _ in self._entries.values())

    def items(self) -> Iterator[Tuple[Tensor, np.ndarray]]:
        return iter(self._entries.values())

    def squared_norm(self, tensors: Sequence[Tensor]) -> float:
        """Sum of squared gradient entries over `tensors`, in the given order."""
        total = 0.0
        for tensor in tensors:
            grad = self[tensor]
            total += float(np.sum(grad * grad))
        return total


def backward(tape: Tape, loss: Tensor) -> Gradients:
    """Reverse-mode differentiation of a scalar recorded on `tape`.

    Visits every recorded operation exactly once, in reverse order, and
    accumulates gradients for all leaf tensors with `requires_grad`.
    Gradients of intermediate values are dropped as soon as they have been
    propagated, and the tape is released afterwards.

    Args:
        tape: The tape active during the forward pass.
        loss: A single-element tensor produced under `tape`.

    Returns:
        Gradients for every traced leaf.

    Raises:
        UsageError: If the tape was already consumed, the loss is not a
            scalar, or the loss was not produced under the tape.
    """
    if tape.consumed:
        raise UsageError("tape already consumed by a previous backward pass")
    if loss.size != 1:
        raise UsageError(f"backward needs a scalar loss, got shape {list(loss.shape)}")
    if not tape.is_traced(loss):
        raise UsageError("backward on a value that was not traced by this tape")

    pending: Dict[int, np.ndarray] = {id(loss): np.ones(loss.shape)}
    for node in reversed(tape._nodes):
        grad_out = pending.pop(id(node.output), None)
        if grad_out is None:
            continue
        input_grads = node.backward(grad_out)
        for tensor, traced, grad in zip(node.inputs, node.traced, input_grads):
            if not traced or grad is None:
                continue
            key = id(tensor)
            if key in pending:
                pending[key] = pending[key] + grad
            else:
                pending[key] = grad

    entries = {
        key: (tensor, pending.get(key, np.zeros(tensor.shape)))
        for key, tensor in tape._leaves.items()
    }
    tape._release()
    return Gradients(entries)
