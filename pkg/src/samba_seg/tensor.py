"""Dense tensors with tape-based reverse-mode differentiation.

A :class:`Tensor` wraps a contiguous numpy array. Every differentiable
operation creates its output through :func:`from_op`, which appends a record
(inputs, output, backward rule) to the active :class:`Tape`. Calling
:func:`backward` replays the tape in reverse record order.

Precision is global: ``float32`` by default, switchable to ``float64`` with
:func:`set_default_dtype` or the :func:`default_dtype` context manager (used by
the gradient oracle).
"""

from __future__ import annotations

import threading
from contextlib import contextmanager
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .errors import ContractError, NonFiniteError

_DTYPE = np.dtype(np.float32)
_local = threading.local()


def get_default_dtype() -> np.dtype:
    return _DTYPE


def set_default_dtype(dtype) -> None:
    global _DTYPE
    dtype = np.dtype(dtype)
    if dtype not in (np.float32, np.float64):
        raise ValueError(f"unsupported dtype {dtype}; use float32 or float64")
    _DTYPE = dtype


@contextmanager
def default_dtype(dtype):
    """Temporarily switch the global floating dtype."""
    previous = _DTYPE
    set_default_dtype(dtype)
    try:
        yield
    finally:
        set_default_dtype(previous)


def is_grad_enabled() -> bool:
    return getattr(_local, "grad_enabled", True)


@contextmanager
def no_grad():
    """Disable tape recording (inference and finite-difference probes)."""
    previous = is_grad_enabled()
    _local.grad_enabled = False
    try:
        yield
    finally:
        _local.grad_enabled = previous


class Tensor:
    """Row-major array of floats with optional gradient tracking."""

    __array_priority__ = 1000

    def __init__(self, data, requires_grad: bool = False, dtype=None):
        self.data = np.asarray(data, dtype=dtype or _DTYPE, order="C")
        self.requires_grad = requires_grad
        self.grad: np.ndarray | None = None

    @classmethod
    def _wrap(cls, arr: np.ndarray) -> "Tensor":
        # keeps the dtype of an op result (float64 inputs stay float64)
        out = cls.__new__(cls)
        out.data = np.asarray(arr, order="C")
        out.requires_grad = False
        out.grad = None
        return out

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    @property
    def dtype(self) -> np.dtype:
        return self.data.dtype

    def numpy(self) -> np.ndarray:
        return self.data

    def item(self) -> float:
        return float(self.data.reshape(-1)[0]) if self.data.size == 1 else float("nan")

    def __repr__(self):
        flag = ", requires_grad=True" if self.requires_grad else ""
        return f"Tensor(shape={self.shape}, dtype={self.dtype}{flag})"

    # arithmetic sugar; implementations live in ops
    def __add__(self, other):
        from . import ops
        return ops.add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        from . import ops
        return ops.sub(self, other)

    def __rsub__(self, other):
        from . import ops
        return ops.sub(other, self)

    def __mul__(self, other):
        from . import ops
        return ops.mul(self, other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        from . import ops
        if isinstance(other, Tensor):
            raise TypeError("division by a Tensor is not supported")
        return ops.mul(self, 1.0 / other)

    def __neg__(self):
        from . import ops
        return ops.mul(self, -1.0)

    def __matmul__(self, other):
        from . import ops
        return ops.matmul(self, other)

    def __getitem__(self, index):
        from . import ops
        return ops.getitem(self, index)

    def reshape(self, *shape):
        from . import ops
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return ops.reshape(self, shape)

    def transpose(self, *axes):
        from . import ops
        if len(axes) == 1 and isinstance(axes[0], (tuple, list)):
            axes = tuple(axes[0])
        return ops.transpose(self, axes or None)

    def sum(self, axis=None, keepdims=False):
        from . import ops
        return ops.sum(self, axis=axis, keepdims=keepdims)

    def mean(self, axis=None, keepdims=False):
        from . import ops
        return ops.mean(self, axis=axis, keepdims=keepdims)


class Parameter(Tensor):
    """Trainable leaf tensor with a zero-initialized gradient buffer."""

    def __init__(self, data, name: str = ""):
        super().__init__(data, requires_grad=True)
        self.name = name
        self.grad = np.zeros_like(self.data)

    @property
    def value(self) -> Tensor:
        return self

    def zero_grad(self) -> None:
        if self.grad is None or self.grad.shape != self.data.shape or self.grad.dtype != self.data.dtype:
            self.grad = np.zeros_like(self.data)
        else:
            self.grad.fill(0)

    def __repr__(self):
        return f"Parameter({self.name!r}, shape={self.shape}, dtype={self.dtype})"


@dataclass
class Record:
    inputs: tuple[Tensor, ...]
    output: Tensor
    backward: Callable[[np.ndarray], Sequence[np.ndarray | None]]


class Tape:
    """Ordered log of differentiable operations.

    Used as a context manager it becomes the active tape for the current
    thread; otherwise a per-thread default tape collects records.
    """

    def __init__(self):
        self.records: list[Record] = []
        self._previous: Tape | None = None

    def __enter__(self):
        self._previous = getattr(_local, "tape", None)
        _local.tape = self
        return self

    def __exit__(self, *exc):
        _local.tape = self._previous
        self._previous = None
        return False

    def __len__(self):
        return len(self.records)

    def clear(self) -> None:
        self.records.clear()

    def backward(self, loss: Tensor) -> None:
        """Propagate d(loss)/d(.) to every reachable leaf, then clear."""
        if loss.size != 1:
            raise ContractError(f"backward needs a scalar loss, got shape {loss.shape}")
        if not loss.requires_grad:
            self.clear()
            return
        loss.grad = np.ones_like(loss.data)
        for rec in reversed(self.records):
            g = rec.output.grad
            if g is None:
                continue
            grads = rec.backward(g)
            for inp, gi in zip(rec.inputs, grads):
                if gi is None or not inp.requires_grad:
                    continue
                _accumulate(inp, gi)
            # intermediate buffers are released once consumed
            rec.output.grad = None
        self.clear()


def _accumulate(t: Tensor, g: np.ndarray) -> None:
    if g.shape != t.shape:
        g = np.broadcast_to(g, t.shape)
    if t.grad is None:
        t.grad = np.array(g, dtype=t.dtype, copy=True)
    else:
        t.grad += g


def current_tape() -> Tape:
    tape = getattr(_local, "tape", None)
    if tape is None:
        tape = Tape()
        _local.tape = tape
    return tape


def backward(loss: Tensor) -> None:
    """Backpropagate ``loss`` through the active tape.

    Gradients accumulate into ``.grad`` of every leaf; callers zero them
    between steps.
    """
    current_tape().backward(loss)


def from_op(data: np.ndarray, inputs: Sequence[Tensor], backward_fn) -> Tensor:
    """Wrap the result of a differentiable operation and record it.

    ``backward_fn(grad_out)`` must return one gradient (or ``None``) per input.
    """
    if not np.all(np.isfinite(data)):
        raise NonFiniteError(f"non-finite values in forward result of shape {np.shape(data)}")
    out = Tensor._wrap(data)
    if is_grad_enabled() and any(t.requires_grad for t in inputs):
        out.requires_grad = True
        current_tape().records.append(Record(tuple(inputs), out, backward_fn))
    return out


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)
