"""Train-time augmentation and normalization.

Geometric transforms (random resize, random crop, flips) act jointly on image
and mask; the mask is always resampled nearest-neighbour so no label is ever
interpolated. Photometric distortion touches the image only.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from PIL import Image

from .manifest import IGNORE_INDEX, SegmentationSample

MEAN = np.array([0.485, 0.456, 0.406])
STD = np.array([0.229, 0.224, 0.225])


@dataclass
class AugmentationConfig:
    crop_size: int = 512
    scale_min: float = 0.5
    scale_max: float = 2.0
    hflip_prob: float = 0.5
    vflip_prob: float = 0.0
    photometric_prob: float = 0.5
    brightness_delta: float = 32.0
    contrast_min: float = 0.5
    contrast_max: float = 1.5
    saturation_min: float = 0.5
    saturation_max: float = 1.5
    hue_delta: float = 18.0   # degrees on a 360-degree hue circle
    seed: int = 0

    def __post_init__(self):
        if self.crop_size < 32 or self.crop_size % 32:
            raise ValueError(f"crop_size must be a positive multiple of 32, got {self.crop_size}")
        if not 0 < self.scale_min <= self.scale_max:
            raise ValueError("scale range must be positive and ordered")


def sample_rng(seed: int, epoch: int, index: int) -> np.random.Generator:
    """Per-sample generator keyed on (seed, epoch, index)."""
    return np.random.default_rng([seed, epoch, index])


def resize(sample: SegmentationSample, height: int, width: int) -> SegmentationSample:
    if sample.mask.shape == (height, width):
        return sample
    img = Image.fromarray(sample.image).resize((width, height), Image.BILINEAR)
    mask = Image.fromarray(sample.mask).resize((width, height), Image.NEAREST)
    return SegmentationSample(np.asarray(img).copy(), np.asarray(mask).copy(), sample.name)


def pad_to(sample: SegmentationSample, height: int, width: int) -> SegmentationSample:
    """Pad bottom/right to at least ``height`` x ``width`` (image 0, mask ignore)."""
    h, w = sample.mask.shape
    ph, pw = max(height - h, 0), max(width - w, 0)
    if not ph and not pw:
        return sample
    image = np.pad(sample.image, ((0, ph), (0, pw), (0, 0)))
    mask = np.pad(sample.mask, ((0, ph), (0, pw)), constant_values=IGNORE_INDEX)
    return SegmentationSample(image, mask, sample.name)


def crop(sample: SegmentationSample, top: int, left: int, size: int) -> SegmentationSample:
    sl = (slice(top, top + size), slice(left, left + size))
    return SegmentationSample(sample.image[sl].copy(), sample.mask[sl].copy(), sample.name)


def hflip(sample: SegmentationSample) -> SegmentationSample:
    return SegmentationSample(sample.image[:, ::-1].copy(), sample.mask[:, ::-1].copy(), sample.name)


def vflip(sample: SegmentationSample) -> SegmentationSample:
    return SegmentationSample(sample.image[::-1].copy(), sample.mask[::-1].copy(), sample.name)


def augment_geometric(sample: SegmentationSample, cfg: AugmentationConfig,
                      rng: np.random.Generator) -> SegmentationSample:
    """Random resize, pad-if-needed, random square crop, random flips."""
    ratio = rng.uniform(cfg.scale_min, cfg.scale_max)
    h, w = sample.mask.shape
    out = resize(sample, max(1, int(round(h * ratio))), max(1, int(round(w * ratio))))
    size = cfg.crop_size
    out = pad_to(out, size, size)
    h, w = out.mask.shape
    top = int(rng.integers(0, h - size + 1))
    left = int(rng.integers(0, w - size + 1))
    out = crop(out, top, left, size)
    if rng.random() < cfg.hflip_prob:
        out = hflip(out)
    if rng.random() < cfg.vflip_prob:
        out = vflip(out)
    return out


# -- photometric -------------------------------------------------------------

def adjust_brightness(img: np.ndarray, delta: float) -> np.ndarray:
    return np.clip(img.astype(np.float64) + delta, 0, 255)


def adjust_contrast(img: np.ndarray, factor: float) -> np.ndarray:
    return np.clip(img.astype(np.float64) * factor, 0, 255)


def _to_hsv(img: np.ndarray) -> np.ndarray:
    rgb = Image.fromarray(np.clip(np.round(img), 0, 255).astype(np.uint8))
    return np.asarray(rgb.convert("HSV"), dtype=np.float64)


def _from_hsv(hsv: np.ndarray) -> np.ndarray:
    arr = np.clip(np.round(hsv), 0, 255).astype(np.uint8)
    return np.asarray(Image.fromarray(arr, mode="HSV").convert("RGB"), dtype=np.float64)


def adjust_saturation(img: np.ndarray, factor: float) -> np.ndarray:
    hsv = _to_hsv(img)
    hsv[..., 1] = np.clip(hsv[..., 1] * factor, 0, 255)
    return _from_hsv(hsv)


def adjust_hue(img: np.ndarray, degrees: float) -> np.ndarray:
    hsv = _to_hsv(img)
    hsv[..., 0] = np.mod(hsv[..., 0] + degrees * 256.0 / 360.0, 256.0)
    return _from_hsv(hsv)


def photometric_distortion(img: np.ndarray, cfg: AugmentationConfig,
                           rng: np.random.Generator) -> np.ndarray:
    """Random brightness, contrast, saturation and hue, each with ``photometric_prob``.

    Contrast is applied before or after the HSV adjustments with equal odds.
    Returns uint8.
    """
    p = cfg.photometric_prob
    if p <= 0:
        return img
    out = img.astype(np.float64)
    if rng.random() < p:
        out = adjust_brightness(out, rng.uniform(-cfg.brightness_delta, cfg.brightness_delta))
    contrast_first = rng.random() < 0.5
    if contrast_first and rng.random() < p:
        out = adjust_contrast(out, rng.uniform(cfg.contrast_min, cfg.contrast_max))
    if rng.random() < p:
        out = adjust_saturation(out, rng.uniform(cfg.saturation_min, cfg.saturation_max))
    if rng.random() < p:
        out = adjust_hue(out, rng.uniform(-cfg.hue_delta, cfg.hue_delta))
    if not contrast_first and rng.random() < p:
        out = adjust_contrast(out, rng.uniform(cfg.contrast_min, cfg.contrast_max))
    return np.clip(np.round(out), 0, 255).astype(np.uint8)


def normalize(img: np.ndarray) -> np.ndarray:
    """uint8 [H, W, 3] -> standardized float [3, H, W]."""
    x = (img.astype(np.float64) / 255.0 - MEAN) / STD
    return np.ascontiguousarray(x.transpose(2, 0, 1))


def denormalize(x: np.ndarray) -> np.ndarray:
    """Inverse of :func:`normalize`, returning uint8 [H, W, 3]."""
    img = (np.asarray(x).transpose(1, 2, 0) * STD + MEAN) * 255.0
    return np.clip(np.round(img), 0, 255).astype(np.uint8)
