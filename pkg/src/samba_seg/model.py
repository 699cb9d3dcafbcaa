"""Encoder + decoder segmentation network and preset configurations."""

from __future__ import annotations

import numpy as np

from . import nn
from .decoder import DecoderConfig, UperNetHead
from .encoder import FeaturePyramid, SambaConfig, SambaEncoder
from .tensor import Tensor


class SambaSegmenter(nn.Module):
    """Maps [B, 3, H, W] images to [B, num_classes, H, W] logits."""

    def __init__(self, encoder_cfg: SambaConfig, decoder_cfg: DecoderConfig, seed: int = 0):
        rng = np.random.default_rng(seed)
        self.encoder_cfg = encoder_cfg
        self.decoder_cfg = decoder_cfg
        self.encoder = SambaEncoder(encoder_cfg, rng=rng)
        self.decoder = UperNetHead(encoder_cfg.widths, decoder_cfg, rng=rng)
        self.assign_names()

    @property
    def num_classes(self) -> int:
        return self.decoder_cfg.num_classes

    def features(self, img: Tensor) -> FeaturePyramid:
        return self.encoder(img)

    def forward(self, img: Tensor) -> Tensor:
        h, w = img.shape[2:]
        return self.decoder(self.encoder(img), h, w)


def desk_config(num_classes: int = 7) -> tuple[SambaConfig, DecoderConfig]:
    """Default configuration sized for CPU experiments."""
    return (SambaConfig(base_channels=64, stage_depths=(2, 2, 4, 2)),
            DecoderConfig(fpn_channels=64, num_classes=num_classes))


def full_config(num_classes: int = 7) -> tuple[SambaConfig, DecoderConfig]:
    """Configuration sized to roughly 50 M parameters with a 512-wide head."""
    return (SambaConfig(base_channels=64, stage_depths=(2, 2, 14, 2), mlp_ratio=4.0),
            DecoderConfig(fpn_channels=512, num_classes=num_classes))


def tiny_config(num_classes: int = 2) -> tuple[SambaConfig, DecoderConfig]:
    """Smallest configuration used for gradient checks."""
    return (SambaConfig(base_channels=8, stage_depths=(1, 1, 1, 1), d_state=2),
            DecoderConfig(fpn_channels=8, pool_scales=(1, 2), num_classes=num_classes, dropout=0.1))
