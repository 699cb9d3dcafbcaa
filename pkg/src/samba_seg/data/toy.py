"""Synthetic four-class dataset of coloured geometric regions.

Each image is a textured background with axis-aligned rectangles, discs and
triangles painted in class-specific colours with per-pixel noise. Generation
is deterministic in ``seed``.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .manifest import ClassInfo, format_classes, write_image, write_mask

TOY_CLASSES = (
    ClassInfo(0, "background", (60, 110, 60)),
    ClassInfo(1, "rectangle", (200, 60, 50)),
    ClassInfo(2, "disc", (50, 80, 210)),
    ClassInfo(3, "triangle", (230, 210, 60)),
)


def _paint(mask: np.ndarray, rng: np.random.Generator, size: int) -> None:
    yy, xx = np.mgrid[:size, :size]
    grid = size // 8
    for _ in range(2):
        h, w = rng.integers(2, 4, size=2) * 8
        top, left = rng.integers(0, size - h + 1, size=2) // 8 * 8
        mask[top:top + h, left:left + w] = 1
    cy, cx = rng.integers(grid, size - grid, size=2)
    r = rng.integers(size // 8, size // 4)
    mask[(yy - cy) ** 2 + (xx - cx) ** 2 <= r * r] = 2
    # right triangle anchored at a random corner point
    ty, tx = rng.integers(0, size // 2, size=2)
    leg = rng.integers(size // 4, size // 2)
    tri = (yy >= ty) & (xx >= tx) & ((yy - ty) + (xx - tx) <= leg)
    mask[tri] = 3


def make_toy_sample(seed: int, size: int = 64) -> tuple[np.ndarray, np.ndarray]:
    rng = np.random.default_rng(seed)
    mask = np.zeros((size, size), dtype=np.uint8)
    _paint(mask, rng, size)
    palette = np.array([c.color for c in TOY_CLASSES], dtype=np.float64)
    image = palette[mask] + rng.normal(0.0, 12.0, size=(size, size, 3))
    return np.clip(np.round(image), 0, 255).astype(np.uint8), mask


def make_toy_dataset(root, num_images: int = 8, size: int = 64, seed: int = 0,
                     splits=("train",)) -> Path:
    """Write the toy dataset under ``root`` and return the path."""
    root = Path(root)
    root.mkdir(parents=True, exist_ok=True)
    (root / "classes.txt").write_text(format_classes(TOY_CLASSES), encoding="utf-8")
    for split in splits:
        (root / split / "images").mkdir(parents=True, exist_ok=True)
        (root / split / "masks").mkdir(parents=True, exist_ok=True)
        for i in range(num_images):
            image, mask = make_toy_sample(seed * 1000 + i, size)
            write_image(root / split / "images" / f"toy_{i:03d}.png", image)
            write_mask(root / split / "masks" / f"toy_{i:03d}.png", mask)
    return root
