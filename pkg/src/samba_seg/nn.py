"""Layer containers built on :mod:`samba_seg.ops`."""

from __future__ import annotations

import math
from typing import Iterator

import numpy as np

from . import ops
from .errors import ShapeError
from .tensor import Parameter, Tensor


class Module:
    """Base class: parameters and sub-modules are discovered from attributes."""

    training: bool = True

    def forward(self, *args, **kwargs):
        raise NotImplementedError

    def __call__(self, *args, **kwargs):
        return self.forward(*args, **kwargs)

    def _children(self) -> Iterator[tuple[str, object]]:
        for key, value in vars(self).items():
            if isinstance(value, (Parameter, Module)):
                yield key, value
            elif isinstance(value, (list, tuple)):
                for i, item in enumerate(value):
                    if isinstance(item, (Parameter, Module)):
                        yield f"{key}.{i}", item

    def named_parameters(self, prefix: str = "") -> Iterator[tuple[str, Parameter]]:
        for key, value in self._children():
            name = f"{prefix}{key}"
            if isinstance(value, Parameter):
                yield name, value
            else:
                yield from value.named_parameters(prefix=name + ".")

    def parameters(self) -> list[Parameter]:
        return [p for _, p in self.named_parameters()]

    def modules(self) -> Iterator["Module"]:
        yield self
        for _, value in self._children():
            if isinstance(value, Module):
                yield from value.modules()

    def assign_names(self) -> None:
        """Stamp every parameter with its dotted attribute path."""
        for name, p in self.named_parameters():
            p.name = name

    def train(self, mode: bool = True) -> "Module":
        for m in self.modules():
            m.training = mode
        return self

    def eval(self) -> "Module":
        return self.train(False)

    def zero_grad(self) -> None:
        for p in self.parameters():
            p.zero_grad()

    def astype(self, dtype) -> "Module":
        for p in self.parameters():
            p.data = p.data.astype(dtype)
            p.zero_grad()
        return self

    def state_dict(self) -> dict[str, np.ndarray]:
        return {name: p.data.copy() for name, p in self.named_parameters()}

    def load_state_dict(self, state: dict[str, np.ndarray], strict: bool = True) -> None:
        own = dict(self.named_parameters())
        if strict:
            missing = sorted(set(own) - set(state))
            extra = sorted(set(state) - set(own))
            if missing or extra:
                raise KeyError(f"state mismatch: missing {missing[:5]}, unexpected {extra[:5]}")
        for name, value in state.items():
            if name not in own:
                continue
            p = own[name]
            if tuple(value.shape) != p.shape:
                raise ShapeError(f"{name}: checkpoint shape {tuple(value.shape)} != model shape {p.shape}")
            p.data = np.ascontiguousarray(value, dtype=p.dtype)
            p.zero_grad()


def _uniform(rng: np.random.Generator, shape, bound: float) -> np.ndarray:
    return rng.uniform(-bound, bound, size=shape)


class Linear(Module):
    """``y = x @ W + b`` with ``W`` stored as [in, out]."""

    def __init__(self, in_features: int, out_features: int, bias: bool = True, rng=None):
        rng = rng if rng is not None else np.random.default_rng(0)
        bound = 1.0 / math.sqrt(in_features)
        self.weight = Parameter(_uniform(rng, (in_features, out_features), bound))
        self.bias = Parameter(_uniform(rng, (out_features,), bound)) if bias else None

    def forward(self, x: Tensor) -> Tensor:
        y = ops.matmul(x, self.weight)
        return y + self.bias if self.bias is not None else y


class Conv2d(Module):
    def __init__(self, in_channels: int, out_channels: int, kernel_size: int,
                 stride: int = 1, padding: int = 0, bias: bool = True, rng=None):
        rng = rng if rng is not None else np.random.default_rng(0)
        bound = 1.0 / math.sqrt(in_channels * kernel_size * kernel_size)
        self.weight = Parameter(_uniform(rng, (out_channels, in_channels, kernel_size, kernel_size), bound))
        self.bias = Parameter(_uniform(rng, (out_channels,), bound)) if bias else None
        self.stride = stride
        self.padding = padding

    def forward(self, x: Tensor) -> Tensor:
        return ops.conv2d(x, self.weight, self.bias, stride=self.stride, pad=self.padding)


class LayerNorm(Module):
    def __init__(self, dim: int, eps: float = 1e-6):
        self.weight = Parameter(np.ones(dim))
        self.bias = Parameter(np.zeros(dim))
        self.eps = eps

    def forward(self, x: Tensor) -> Tensor:
        return ops.layer_norm(x, self.weight, self.bias, self.eps)


class ChannelLayerNorm(LayerNorm):
    """LayerNorm over the channel axis of a [B, C, H, W] map."""

    def forward(self, x: Tensor) -> Tensor:
        y = ops.layer_norm(ops.transpose(x, (0, 2, 3, 1)), self.weight, self.bias, self.eps)
        return ops.transpose(y, (0, 3, 1, 2))


class Dropout(Module):
    def __init__(self, rate: float, rng=None):
        self.rate = rate
        self.rng = rng if rng is not None else np.random.default_rng(0)

    def forward(self, x: Tensor) -> Tensor:
        return ops.dropout(x, self.rate, self.rng, training=self.training)


def tokens_to_map(tokens: Tensor, h: int, w: int) -> Tensor:
    """[B, h*w, D] row-major tokens -> [B, D, h, w] map."""
    b, length, d = tokens.shape
    if length != h * w:
        raise ShapeError(f"cannot fold {length} tokens into a {h}x{w} map")
    return ops.transpose(tokens, (0, 2, 1)).reshape(b, d, h, w)


def map_to_tokens(x: Tensor) -> Tensor:
    """[B, D, h, w] map -> [B, h*w, D] tokens in row-major raster order."""
    b, d, h, w = x.shape
    return ops.transpose(x.reshape(b, d, h * w), (0, 2, 1))
