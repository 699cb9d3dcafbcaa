"""UperNet-style decode head: pyramid pooling plus top-down FPN fusion."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import nn, ops
from .encoder import FeaturePyramid
from .errors import ShapeError
from .tensor import Tensor


@dataclass
class DecoderConfig:
    fpn_channels: int = 512
    pool_scales: tuple[int, ...] = (1, 2, 3, 6)
    num_classes: int = 7
    dropout: float = 0.1

    def __post_init__(self):
        self.pool_scales = tuple(int(s) for s in self.pool_scales)
        if not self.pool_scales or list(self.pool_scales) != sorted(self.pool_scales) \
                or self.pool_scales[0] < 1:
            raise ValueError(f"pool_scales must be ascending positive ints, got {self.pool_scales}")
        if self.num_classes < 1 or self.fpn_channels < 1:
            raise ValueError("num_classes and fpn_channels must be positive")


class ConvNormAct(nn.Module):
    """conv -> channel LN -> SiLU."""

    def __init__(self, cin: int, cout: int, k: int, rng):
        self.conv = nn.Conv2d(cin, cout, k, padding=k // 2, rng=rng)
        self.norm = nn.ChannelLayerNorm(cout)

    def forward(self, x: Tensor) -> Tensor:
        return ops.silu(self.norm(self.conv(x)))


class PyramidPooling(nn.Module):
    def __init__(self, in_channels: int, channels: int, scales, rng):
        self.scales = tuple(scales)
        self.branches = [ConvNormAct(in_channels, channels, 1, rng) for _ in self.scales]
        self.bottleneck = ConvNormAct(in_channels + len(self.scales) * channels, channels, 3, rng)

    def pooled(self, f4: Tensor) -> list[Tensor]:
        """Per-scale pooled branches resized back to the input grid."""
        h, w = f4.shape[2:]
        if max(self.scales) > min(h, w):
            raise ShapeError(f"pool scale {max(self.scales)} exceeds feature size {h}x{w}")
        return [
            ops.bilinear_resize(branch(ops.adaptive_avg_pool2d(f4, s)), h, w)
            for s, branch in zip(self.scales, self.branches)
        ]

    def forward(self, f4: Tensor) -> Tensor:
        return self.bottleneck(ops.concat([f4] + self.pooled(f4), axis=1))


class UperNetHead(nn.Module):
    def __init__(self, in_widths, cfg: DecoderConfig, rng=None):
        rng = rng if rng is not None else np.random.default_rng(1)
        self.cfg = cfg
        f = cfg.fpn_channels
        self.ppm = PyramidPooling(in_widths[3], f, cfg.pool_scales, rng)
        self.laterals = [ConvNormAct(c, f, 1, rng) for c in in_widths[:3]]
        self.fpn_convs = [ConvNormAct(f, f, 3, rng) for _ in range(3)]
        self.fuse = ConvNormAct(4 * f, f, 3, rng)
        self.dropout = nn.Dropout(cfg.dropout, rng=np.random.default_rng(rng.integers(2**32)))
        self.classifier = nn.Conv2d(f, cfg.num_classes, 1, rng=rng)

    def fpn_fuse(self, pyramid: FeaturePyramid) -> list[Tensor]:
        """Four fused maps, finest first, each ``fpn_channels`` wide."""
        maps = [lat(x) for lat, x in zip(self.laterals, pyramid[:3])]
        maps.append(self.ppm(pyramid.f4))
        for i in range(3, 0, -1):
            h, w = maps[i - 1].shape[2:]
            maps[i - 1] = maps[i - 1] + ops.bilinear_resize(maps[i], h, w)
        return [conv(m) for conv, m in zip(self.fpn_convs, maps[:3])] + [maps[3]]

    def forward(self, pyramid: FeaturePyramid, out_h: int, out_w: int) -> Tensor:
        fused = self.fpn_fuse(pyramid)
        h, w = fused[0].shape[2:]
        fused = [fused[0]] + [ops.bilinear_resize(m, h, w) for m in fused[1:]]
        x = self.fuse(ops.concat(fused, axis=1))
        x = self.classifier(self.dropout(x))
        return ops.bilinear_resize(x, out_h, out_w)
