"""Parameter and FLOP accounting.

FLOPs count 2 per multiply-add of the convolutions, matrix products and the
selective scan (6 multiply-adds per token, inner channel and state). Norms,
activations, pooling and resizing are not counted. Figures are per image.
"""

from __future__ import annotations

from .model import SambaSegmenter


def count_parameters(model) -> int:
    return int(sum(p.size for p in model.parameters()))


def _mamba_flops(tokens: int, dim: int, cfg) -> int:
    mcfg = cfg.mamba_config(dim)
    di, ds, r, k = mcfg.d_inner, mcfg.d_state, mcfg.rank, mcfg.conv_kernel
    macs = (
        2 * tokens * dim * di           # stream and gate projections
        + tokens * di * k               # causal depthwise conv
        + 2 * tokens * di * ds          # B_t and C_t
        + tokens * di * r + tokens * r * di   # low-rank timestep
        + 6 * tokens * di * ds          # scan
        + tokens * di * dim             # output projection
    )
    return 2 * macs


def _block_flops(tokens: int, dim: int, cfg) -> int:
    hidden = int(round(cfg.mlp_ratio * dim))
    return _mamba_flops(tokens, dim, cfg) + 2 * 2 * tokens * dim * hidden


def encoder_flops(cfg, height: int, width: int) -> int:
    widths = cfg.widths
    h, w = height // 4, width // 4
    total = 2 * h * w * widths[0] * cfg.in_channels * 16
    for i, dim in enumerate(widths):
        total += cfg.stage_depths[i] * _block_flops(h * w, dim, cfg)
        if i < 3:
            h, w = h // 2, w // 2
            total += 2 * h * w * (2 * dim) * dim * 4
    return total


def decoder_flops(enc_cfg, dec_cfg, height: int, width: int) -> int:
    f = dec_cfg.fpn_channels
    widths = enc_cfg.widths
    sizes = [(height // s, width // s) for s in (4, 8, 16, 32)]
    h4, w4 = sizes[3]
    total = 0
    for s in dec_cfg.pool_scales:
        total += 2 * s * s * f * widths[3]
    total += 2 * h4 * w4 * f * (widths[3] + len(dec_cfg.pool_scales) * f) * 9
    for (h, w), c in zip(sizes[:3], widths[:3]):
        total += 2 * h * w * f * c            # lateral 1x1
        total += 2 * h * w * f * f * 9        # refinement 3x3
    h1, w1 = sizes[0]
    total += 2 * h1 * w1 * f * 4 * f * 9      # fusion 3x3
    total += 2 * h1 * w1 * dec_cfg.num_classes * f
    return total


def estimate_flops(model: SambaSegmenter, height: int, width: int) -> float:
    """Analytic FLOPs of one forward pass on a ``height`` x ``width`` image."""
    return float(encoder_flops(model.encoder_cfg, height, width)
                 + decoder_flops(model.encoder_cfg, model.decoder_cfg, height, width))
