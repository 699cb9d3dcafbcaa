"""Four-stage hierarchical Samba encoder."""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from . import nn, ops
from .errors import ShapeError
from .ssm import MambaBlock, MambaBlockConfig
from .tensor import Tensor


@dataclass
class SambaConfig:
    """Encoder hyperparameters.

    Stage widths are ``[C, 2C, 4C, 8C]`` for ``C = base_channels``. The
    Mamba settings are shared by all stages; ``dt_rank = 0`` means
    ``ceil(dim / 16)`` per stage and ``scan_chunk = 0`` selects the
    step-by-step scan.
    """

    base_channels: int = 64
    stage_depths: tuple[int, ...] = (2, 2, 4, 2)
    mlp_ratio: float = 4.0
    d_state: int = 16
    expansion: int = 2
    conv_kernel: int = 4
    dt_rank: int = 0
    scan_chunk: int = 16
    in_channels: int = 3

    def __post_init__(self):
        self.stage_depths = tuple(int(d) for d in self.stage_depths)
        if len(self.stage_depths) != 4 or min(self.stage_depths) < 0:
            raise ValueError(f"stage_depths must be four non-negative ints, got {self.stage_depths}")
        if self.base_channels < 1 or self.mlp_ratio <= 0:
            raise ValueError("base_channels and mlp_ratio must be positive")

    @property
    def widths(self) -> tuple[int, int, int, int]:
        c = self.base_channels
        return (c, 2 * c, 4 * c, 8 * c)

    def mamba_config(self, dim: int) -> MambaBlockConfig:
        return MambaBlockConfig(
            dim=dim, d_state=self.d_state, expansion=self.expansion,
            conv_kernel=self.conv_kernel, dt_rank=self.dt_rank or None,
            scan_chunk=self.scan_chunk or None,
        )


class FeaturePyramid(NamedTuple):
    f1: Tensor  # [B, C, H/4, W/4]
    f2: Tensor  # [B, 2C, H/8, W/8]
    f3: Tensor  # [B, 4C, H/16, W/16]
    f4: Tensor  # [B, 8C, H/32, W/32]


class PatchEmbed(nn.Module):
    """Non-overlapping 4x4 patches, linearly projected, then LN over channels."""

    patch = 4

    def __init__(self, in_channels: int, dim: int, rng):
        self.proj = nn.Conv2d(in_channels, dim, self.patch, stride=self.patch, rng=rng)
        self.norm = nn.ChannelLayerNorm(dim)

    def forward(self, img: Tensor) -> Tensor:
        h, w = img.shape[2:]
        if h % self.patch or w % self.patch:
            raise ShapeError(f"patch embedding needs H, W divisible by {self.patch}, got {h}x{w}")
        return self.norm(self.proj(img))


class Downsample(nn.Module):
    """2x2 stride-2 convolution doubling the width, then LN."""

    def __init__(self, dim: int, rng):
        self.proj = nn.Conv2d(dim, 2 * dim, 2, stride=2, rng=rng)
        self.norm = nn.ChannelLayerNorm(2 * dim)

    def forward(self, f: Tensor) -> Tensor:
        h, w = f.shape[2:]
        if h % 2 or w % 2:
            raise ShapeError(f"downsampling needs even spatial dims, got {h}x{w}")
        return self.norm(self.proj(f))


class FeedForward(nn.Module):
    def __init__(self, dim: int, hidden: int, rng):
        self.fc1 = nn.Linear(dim, hidden, rng=rng)
        self.fc2 = nn.Linear(hidden, dim, rng=rng)

    def forward(self, x: Tensor) -> Tensor:
        return self.fc2(ops.silu(self.fc1(x)))


class SambaBlock(nn.Module):
    """``x + Mamba(x)`` followed by ``x + FFN(LN(x))``.

    The Mamba block normalizes its own input, so its LN doubles as the
    pre-norm of the first residual branch.
    """

    def __init__(self, dim: int, mlp_ratio: float, mamba_cfg: MambaBlockConfig, rng):
        self.mamba = MambaBlock(mamba_cfg, rng=rng)
        self.norm = nn.LayerNorm(dim)
        self.ffn = FeedForward(dim, int(round(mlp_ratio * dim)), rng)

    def forward(self, tokens: Tensor) -> Tensor:
        x = tokens + self.mamba(tokens)
        return x + self.ffn(self.norm(x))

    def zero_residual_outputs(self) -> None:
        for lin in (self.mamba.out_proj, self.ffn.fc2):
            lin.weight.data[...] = 0
            lin.bias.data[...] = 0


class SambaStage(nn.Module):
    def __init__(self, dim: int, depth: int, cfg: SambaConfig, rng):
        mcfg = cfg.mamba_config(dim)
        self.blocks = [SambaBlock(dim, cfg.mlp_ratio, mcfg, rng) for _ in range(depth)]

    def forward(self, f: Tensor) -> Tensor:
        if not self.blocks:
            return f
        h, w = f.shape[2:]
        x = nn.map_to_tokens(f)
        for blk in self.blocks:
            x = blk(x)
        return nn.tokens_to_map(x, h, w)


class SambaEncoder(nn.Module):
    """Patch embedding and four Samba stages joined by 2x downsampling."""

    stride = 32

    def __init__(self, cfg: SambaConfig, rng=None):
        rng = rng if rng is not None else np.random.default_rng(0)
        self.cfg = cfg
        widths = cfg.widths
        self.patch_embed = PatchEmbed(cfg.in_channels, widths[0], rng)
        self.stages = [SambaStage(widths[i], cfg.stage_depths[i], cfg, rng) for i in range(4)]
        self.downsamples = [Downsample(widths[i], rng) for i in range(3)]

    def forward(self, img: Tensor) -> FeaturePyramid:
        if img.ndim != 4 or img.shape[1] != self.cfg.in_channels:
            raise ShapeError(f"encoder expects [B, {self.cfg.in_channels}, H, W], got {img.shape}")
        h, w = img.shape[2:]
        if h % self.stride or w % self.stride:
            raise ShapeError(f"input size {h}x{w} is not divisible by {self.stride}")
        f = self.patch_embed(img)
        feats = []
        for i, stage in enumerate(self.stages):
            f = stage(f)
            feats.append(f)
            if i < 3:
                f = self.downsamples[i](f)
        return FeaturePyramid(*feats)
