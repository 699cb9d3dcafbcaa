"""Cutting large scenes into fixed-size tiles and stitching predictions back."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ContractError
from .augment import pad_to
from .manifest import SegmentationSample


@dataclass(frozen=True)
class Placement:
    top: int
    left: int
    height: int   # valid (unpadded) rows inside the tile
    width: int


def tile_starts(extent: int, tile: int, stride: int) -> list[int]:
    """Grid origins along one axis; the last tile is flush with the far edge."""
    if extent <= tile:
        return [0]
    starts = list(range(0, extent - tile + 1, stride))
    if starts[-1] + tile < extent:
        starts.append(extent - tile)
    return starts


def tile_image(sample: SegmentationSample, tile: int, stride: int):
    """Split a scene into ``tile`` x ``tile`` pieces.

    Returns ``(tiles, placements)``. Scenes smaller than ``tile`` along an
    axis are padded (image 0, mask ignore) and yield one tile on that axis.
    """
    if tile < 32 or tile % 32:
        raise ContractError(f"tile must be a positive multiple of 32, got {tile}")
    if not 1 <= stride <= tile:
        raise ContractError(f"stride must lie in [1, tile], got {stride}")
    h, w = sample.mask.shape
    padded = pad_to(sample, tile, tile)
    tiles, placements = [], []
    for top in tile_starts(h, tile, stride):
        for left in tile_starts(w, tile, stride):
            sl = (slice(top, top + tile), slice(left, left + tile))
            tiles.append(SegmentationSample(padded.image[sl].copy(), padded.mask[sl].copy(), sample.name))
            placements.append(Placement(top, left, min(tile, h - top), min(tile, w - left)))
    return tiles, placements


def stitch_logits(tile_logits, placements, height: int, width: int) -> np.ndarray:
    """Average per-tile logits [K, t, t] into a scene-sized [K, height, width] array."""
    k = tile_logits[0].shape[0]
    acc = np.zeros((k, height, width), dtype=np.float64)
    count = np.zeros((height, width), dtype=np.float64)
    for logits, pl in zip(tile_logits, placements):
        acc[:, pl.top:pl.top + pl.height, pl.left:pl.left + pl.width] += logits[:, :pl.height, :pl.width]
        count[pl.top:pl.top + pl.height, pl.left:pl.left + pl.width] += 1
    if np.any(count == 0):
        raise ContractError("placements do not cover the scene")
    return acc / count
