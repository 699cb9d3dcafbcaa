"""Differentiable array operations.

Every function takes :class:`~samba_seg.tensor.Tensor` operands (plain arrays
and Python scalars are accepted as constants) and returns a new Tensor.
Backward rules are closures registered through :func:`from_op`.
"""

from __future__ import annotations

import math
from contextlib import contextmanager

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import ShapeError
from .tensor import Tensor, as_tensor, from_op

__all__ = [
    "add", "sub", "mul", "matmul", "reshape", "transpose", "getitem", "concat",
    "sum", "mean", "exp", "sigmoid", "softplus", "silu", "relu",
    "conv2d", "depthwise_conv1d", "layer_norm", "bilinear_resize",
    "adaptive_avg_pool2d", "dropout", "flop_counter",
]

_flop_stack: list[list[int]] = []


@contextmanager
def flop_counter():
    """Count FLOPs (2 per multiply-add) of matmul, conv and scan ops executed inside."""
    box = [0]
    _flop_stack.append(box)
    try:
        yield box
    finally:
        _flop_stack.pop()


def add_flops(n: int) -> None:
    for box in _flop_stack:
        box[0] += int(n)


def _unbroadcast(g: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and g.shape[axis] != 1:
            g = g.sum(axis=axis, keepdims=True)
    return g


# -- elementwise -------------------------------------------------------------

def add(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    out = a.data + b.data
    return from_op(out, (a, b), lambda g: (_unbroadcast(g, a.shape), _unbroadcast(g, b.shape)))


def sub(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    out = a.data - b.data
    return from_op(out, (a, b), lambda g: (_unbroadcast(g, a.shape), _unbroadcast(-g, b.shape)))


def mul(a, b) -> Tensor:
    if not isinstance(b, Tensor) and np.isscalar(b):
        a = as_tensor(a)
        return from_op(a.data * b, (a,), lambda g: (g * b,))
    a, b = as_tensor(a), as_tensor(b)
    out = a.data * b.data

    def backward(g):
        ga = _unbroadcast(g * b.data, a.shape) if a.requires_grad else None
        gb = _unbroadcast(g * a.data, b.shape) if b.requires_grad else None
        return ga, gb

    return from_op(out, (a, b), backward)


def exp(x: Tensor) -> Tensor:
    with np.errstate(over="ignore"):   # overflow is reported by from_op
        out = np.exp(x.data)
    return from_op(out, (x,), lambda g: (g * out,))


def _sigmoid(v: np.ndarray) -> np.ndarray:
    # branch-free stable form
    e = np.exp(-np.abs(v))
    return np.where(v >= 0, 1.0 / (1.0 + e), e / (1.0 + e)).astype(v.dtype, copy=False)


def sigmoid(x: Tensor) -> Tensor:
    s = _sigmoid(x.data)
    return from_op(s, (x,), lambda g: (g * s * (1 - s),))


def softplus(x: Tensor) -> Tensor:
    """ln(1 + e^x) without overflow for large |x|."""
    out = np.logaddexp(0, x.data).astype(x.dtype, copy=False)
    return from_op(out, (x,), lambda g: (g * _sigmoid(x.data),))


def silu(x: Tensor) -> Tensor:
    s = _sigmoid(x.data)
    out = x.data * s
    return from_op(out, (x,), lambda g: (g * (s * (1 + x.data * (1 - s))),))


def relu(x: Tensor) -> Tensor:
    mask = x.data > 0
    return from_op(x.data * mask, (x,), lambda g: (g * mask,))


# -- shape manipulation ------------------------------------------------------

def reshape(x: Tensor, shape) -> Tensor:
    src = x.shape
    return from_op(x.data.reshape(shape), (x,), lambda g: (g.reshape(src),))


def transpose(x: Tensor, axes=None) -> Tensor:
    axes = tuple(range(x.ndim))[::-1] if axes is None else tuple(axes)
    inverse = np.argsort(axes)
    return from_op(x.data.transpose(axes), (x,), lambda g: (g.transpose(inverse),))


def getitem(x: Tensor, index) -> Tensor:
    out = x.data[index]

    def backward(g):
        gx = np.zeros_like(x.data)
        np.add.at(gx, index, g)
        return (gx,)

    return from_op(out, (x,), backward)


def concat(tensors, axis: int = 0) -> Tensor:
    tensors = [as_tensor(t) for t in tensors]
    sizes = [t.shape[axis] for t in tensors]
    out = np.concatenate([t.data for t in tensors], axis=axis)
    splits = np.cumsum(sizes)[:-1]
    return from_op(out, tensors, lambda g: tuple(np.split(g, splits, axis=axis)))


def sum(x: Tensor, axis=None, keepdims: bool = False) -> Tensor:  # noqa: A001
    out = x.data.sum(axis=axis, keepdims=keepdims)

    def backward(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, x.shape),)

    return from_op(np.asarray(out), (x,), backward)


def mean(x: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    count = x.size if axis is None else int(np.prod([x.shape[a] for a in np.atleast_1d(axis)]))
    return mul(sum(x, axis=axis, keepdims=keepdims), 1.0 / count)


# -- linear algebra ----------------------------------------------------------

def matmul(a: Tensor, b: Tensor) -> Tensor:
    """Matrix product ``a @ b``.

    ``b`` is a 2-D matrix; ``a`` may carry leading batch dimensions, in which
    case the product is applied over its last axis.
    """
    a, b = as_tensor(a), as_tensor(b)
    if b.ndim != 2 or a.ndim < 1 or a.shape[-1] != b.shape[0]:
        raise ShapeError(f"matmul: cannot multiply shapes {a.shape} and {b.shape}")
    out = a.data @ b.data
    m = a.size // a.shape[-1]
    add_flops(2 * m * b.shape[0] * b.shape[1])

    def backward(g):
        ga = g @ b.data.T if a.requires_grad else None
        gb = None
        if b.requires_grad:
            gb = a.data.reshape(-1, a.shape[-1]).T @ g.reshape(-1, b.shape[1])
        return ga, gb

    return from_op(out, (a, b), backward)


def conv2d(x: Tensor, w: Tensor, b: Tensor | None = None, stride: int = 1, pad: int = 0) -> Tensor:
    """2-D cross-correlation of ``x`` [B, C_in, H, W] with ``w`` [C_out, C_in, k, k]."""
    if x.ndim != 4 or w.ndim != 4 or w.shape[1] != x.shape[1] or w.shape[2] != w.shape[3]:
        raise ShapeError(f"conv2d: input {x.shape} incompatible with weight {w.shape}")
    n, c, h, wd = x.shape
    o, _, k, _ = w.shape
    if k < 1 or stride < 1 or pad < 0:
        raise ShapeError(f"conv2d: bad kernel/stride/pad ({k}, {stride}, {pad})")
    if h + 2 * pad < k or wd + 2 * pad < k:
        raise ShapeError(f"conv2d: kernel {k} larger than padded input {x.shape} (pad {pad})")
    ho = (h + 2 * pad - k) // stride + 1
    wo = (wd + 2 * pad - k) // stride + 1
    xp = np.pad(x.data, ((0, 0), (0, 0), (pad, pad), (pad, pad))) if pad else x.data
    if k == stride and pad == 0 and h % k == 0 and wd % k == 0:
        # non-overlapping patches: a reshape is enough
        cols = xp.reshape(n, c, ho, k, wo, k).transpose(0, 2, 4, 1, 3, 5)
    else:
        win = sliding_window_view(xp, (k, k), axis=(2, 3))[:, :, ::stride, ::stride][:, :, :ho, :wo]
        cols = win.transpose(0, 2, 3, 1, 4, 5)
    cols = cols.reshape(n * ho * wo, c * k * k)
    wmat = w.data.reshape(o, -1)
    out = (cols @ wmat.T).reshape(n, ho, wo, o).transpose(0, 3, 1, 2)
    if b is not None:
        out = out + b.data.reshape(1, o, 1, 1)
    add_flops(2 * n * ho * wo * o * c * k * k)

    def backward(g):
        g2 = g.transpose(0, 2, 3, 1).reshape(-1, o)
        gw = (g2.T @ cols).reshape(w.shape) if w.requires_grad else None
        gx = None
        if x.requires_grad:
            gcols = (g2 @ wmat).reshape(n, ho, wo, c, k, k)
            gxp = np.zeros_like(xp)
            for i in range(k):
                for j in range(k):
                    gxp[:, :, i:i + stride * ho:stride, j:j + stride * wo:stride] += (
                        gcols[..., i, j].transpose(0, 3, 1, 2)
                    )
            gx = gxp[:, :, pad:pad + h, pad:pad + wd] if pad else gxp
        gb = g.sum(axis=(0, 2, 3)) if b is not None else None
        return gx, gw, gb

    inputs = (x, w) if b is None else (x, w, b)
    return from_op(np.ascontiguousarray(out), inputs, backward)


def depthwise_conv1d(x: Tensor, w: Tensor, b: Tensor | None = None) -> Tensor:
    """Causal per-channel convolution over the last axis.

    ``x`` is [B, C, L] and ``w`` is [C, k]; tap ``j`` multiplies the input
    ``j`` steps in the past, so ``y[t] = sum_j w[j] x[t - j]``.
    """
    if x.ndim != 3 or w.ndim != 2 or w.shape[0] != x.shape[1] or w.shape[1] < 1:
        raise ShapeError(f"depthwise_conv1d: input {x.shape} incompatible with weight {w.shape}")
    length = x.shape[2]
    k = w.shape[1]
    out = np.zeros_like(x.data)
    for j in range(min(k, length)):
        out[:, :, j:] += w.data[None, :, j:j + 1] * x.data[:, :, :length - j]
    if b is not None:
        out += b.data[None, :, None]
    add_flops(2 * x.size * k)

    def backward(g):
        gx = np.zeros_like(x.data)
        gw = np.zeros_like(w.data)
        for j in range(min(k, length)):
            gx[:, :, :length - j] += w.data[None, :, j:j + 1] * g[:, :, j:]
            gw[:, j] = (g[:, :, j:] * x.data[:, :, :length - j]).sum(axis=(0, 2))
        gb = g.sum(axis=(0, 2)) if b is not None else None
        return gx, gw, gb

    inputs = (x, w) if b is None else (x, w, b)
    return from_op(out, inputs, backward)


def layer_norm(x: Tensor, gamma: Tensor, beta: Tensor, eps: float = 1e-6) -> Tensor:
    """Normalize over the trailing axis, then apply the affine ``gamma``, ``beta``."""
    d = x.shape[-1] if x.ndim else 0
    if d == 0:
        raise ShapeError(f"layer_norm: empty normalized dimension in {x.shape}")
    if gamma.shape != (d,) or beta.shape != (d,):
        raise ShapeError(f"layer_norm: affine shapes {gamma.shape}/{beta.shape} for input {x.shape}")
    mu = x.data.mean(axis=-1, keepdims=True)
    xc = x.data - mu
    var = (xc * xc).mean(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = xc * inv
    out = xhat * gamma.data + beta.data

    def backward(g):
        gxhat = g * gamma.data
        gx = inv * (gxhat - gxhat.mean(axis=-1, keepdims=True)
                    - xhat * (gxhat * xhat).mean(axis=-1, keepdims=True))
        lead = tuple(range(x.ndim - 1))
        return gx, (g * xhat).sum(axis=lead), g.sum(axis=lead)

    return from_op(out, (x, gamma, beta), backward)


# -- resampling --------------------------------------------------------------

def _interp_matrix(n_in: int, n_out: int, dtype) -> np.ndarray:
    """Rows of linear-interpolation weights, half-pixel (align_corners=False) grid."""
    m = np.zeros((n_out, n_in), dtype=dtype)
    scale = n_in / n_out
    for i in range(n_out):
        src = max((i + 0.5) * scale - 0.5, 0.0)
        i0 = min(int(math.floor(src)), n_in - 1)
        i1 = min(i0 + 1, n_in - 1)
        lam = src - i0
        m[i, i0] += 1.0 - lam
        m[i, i1] += lam
    return m


def _pool_matrix(n_in: int, n_out: int, dtype) -> np.ndarray:
    m = np.zeros((n_out, n_in), dtype=dtype)
    for i in range(n_out):
        start = (i * n_in) // n_out
        stop = -((-(i + 1) * n_in) // n_out)
        m[i, start:stop] = 1.0 / (stop - start)
    return m


def _separable(x: Tensor, rows: np.ndarray, cols: np.ndarray) -> Tensor:
    out = np.einsum("oh,bchw,pw->bcop", rows, x.data, cols, optimize=True)
    return from_op(out, (x,), lambda g: (np.einsum("oh,bcop,pw->bchw", rows, g, cols, optimize=True),))


def bilinear_resize(x: Tensor, out_h: int, out_w: int) -> Tensor:
    """Bilinear resampling of [B, C, H, W] maps (align_corners=False)."""
    if out_h < 1 or out_w < 1:
        raise ShapeError(f"bilinear_resize: output size must be positive, got {(out_h, out_w)}")
    if x.ndim != 4:
        raise ShapeError(f"bilinear_resize: expected [B, C, H, W], got {x.shape}")
    h, w = x.shape[2:]
    if (h, w) == (out_h, out_w):
        return from_op(x.data.copy(), (x,), lambda g: (g,))
    return _separable(x, _interp_matrix(h, out_h, x.dtype), _interp_matrix(w, out_w, x.dtype))


def adaptive_avg_pool2d(x: Tensor, out_h: int, out_w: int | None = None) -> Tensor:
    """Average-pool [B, C, H, W] into an ``out_h`` x ``out_w`` grid of bins."""
    out_w = out_h if out_w is None else out_w
    h, w = x.shape[2:]
    if not (1 <= out_h <= h and 1 <= out_w <= w):
        raise ShapeError(f"adaptive_avg_pool2d: cannot pool {x.shape} to {(out_h, out_w)}")
    return _separable(x, _pool_matrix(h, out_h, x.dtype), _pool_matrix(w, out_w, x.dtype))


def dropout(x: Tensor, rate: float, rng: np.random.Generator | None, training: bool = True) -> Tensor:
    if not training or rate <= 0.0:
        return x
    rng = rng or np.random.default_rng()
    keep = (rng.random(x.shape) >= rate).astype(x.dtype) / (1.0 - rate)
    return from_op(x.data * keep, (x,), lambda g: (g * keep,))
