"""Deterministic batch assembly from a manifest."""

from __future__ import annotations

from typing import Iterator

import numpy as np

from ..errors import ManifestError
from .augment import AugmentationConfig, augment_geometric, normalize, photometric_distortion, sample_rng
from .manifest import DatasetManifest, SegmentationSample


class SegmentationDataset:
    """Augmented, normalized training samples.

    Sample ``index`` of ``epoch`` is a pure function of
    ``(cfg.seed, epoch, index)``, so batches can be prepared in any order.
    """

    def __init__(self, manifest: DatasetManifest, cfg: AugmentationConfig,
                 augment: bool = True, cache: bool = True):
        if len(manifest) == 0:
            raise ManifestError(f"split {manifest.split!r} under {manifest.root} is empty")
        self.manifest = manifest
        self.cfg = cfg
        self.augment = augment
        self._cache: dict[int, SegmentationSample] | None = {} if cache else None

    def __len__(self):
        return len(self.manifest)

    def raw(self, index: int) -> SegmentationSample:
        if self._cache is None:
            return self.manifest.load(index)
        if index not in self._cache:
            self._cache[index] = self.manifest.load(index)
        return self._cache[index]

    def sample(self, index: int, epoch: int = 0) -> tuple[np.ndarray, np.ndarray]:
        s = self.raw(index)
        if self.augment:
            rng = sample_rng(self.cfg.seed, epoch, index)
            s = augment_geometric(s, self.cfg, rng)
            image = photometric_distortion(s.image, self.cfg, rng)
        else:
            image = s.image
        return normalize(image), s.mask.astype(np.int64)

    def order(self, epoch: int) -> np.ndarray:
        return np.random.default_rng([self.cfg.seed, epoch, 0x5EED]).permutation(len(self))

    def batches(self, batch_size: int) -> Iterator[tuple[np.ndarray, np.ndarray]]:
        """Endless stream of ``(images [B,3,H,W], masks [B,H,W])``."""
        epoch, pos, perm = 0, 0, self.order(0)
        while True:
            items = []
            while len(items) < batch_size:
                if pos == len(perm):
                    epoch, pos = epoch + 1, 0
                    perm = self.order(epoch)
                items.append(self.sample(int(perm[pos]), epoch))
                pos += 1
            yield np.stack([i for i, _ in items]), np.stack([m for _, m in items])
