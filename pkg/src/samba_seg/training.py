"""Training loop, tiled inference and evaluation."""

from __future__ import annotations

import csv
import logging
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .checkpoint import save_checkpoint
from .data.augment import normalize
from .data.loader import SegmentationDataset
from .data.manifest import DatasetManifest, SegmentationSample
from .data.tiling import stitch_logits, tile_image
from .errors import ConfigError, NonFiniteError, TrainingError
from .losses import cross_entropy_loss
from .metrics import ConfusionMatrix, miou
from .optim import AdamW, TrainConfig, lr_at
from .tensor import Tape, Tensor, no_grad

log = logging.getLogger(__name__)


@dataclass
class TrainResult:
    history: list[tuple[int, float, float]] = field(default_factory=list)
    checkpoints: list[Path] = field(default_factory=list)
    seconds: float = 0.0

    @property
    def losses(self) -> list[float]:
        return [loss for _, _, loss in self.history]


def train_loop(model, dataset: SegmentationDataset, cfg: TrainConfig, out_dir=None,
               config_text: str = "") -> TrainResult:
    """Train ``model`` in place.

    Writes ``metrics.csv`` (``iter,lr,loss``) and checkpoints to ``out_dir``
    when given. Raises :class:`TrainingError` on a non-finite loss or gradient.
    """
    model.train()
    opt = AdamW(model.parameters(), cfg)
    batches = dataset.batches(cfg.batch_size)
    result = TrainResult()
    out_dir = Path(out_dir) if out_dir is not None else None
    writer = handle = None
    if out_dir is not None:
        out_dir.mkdir(parents=True, exist_ok=True)
        handle = open(out_dir / "metrics.csv", "w", newline="", encoding="utf-8")
        writer = csv.writer(handle)
        writer.writerow(["iter", "lr", "loss"])
    start = time.perf_counter()
    try:
        for it in range(cfg.total_iterations):
            images, masks = next(batches)
            lr = lr_at(it, cfg)
            opt.zero_grad()
            try:
                # overflow surfaces as NonFiniteError from the op that produced it
                try:
                    with np.errstate(over="ignore", invalid="ignore"), Tape() as tape:
                        loss = cross_entropy_loss(model(Tensor(images)), masks)
                        value = loss.item()
                        if not np.isfinite(value):
                            raise TrainingError(f"non-finite loss at iteration {it}", iteration=it)
                        tape.backward(loss)
                    if cfg.grad_clip > 0:
                        opt.clip_grad_norm(cfg.grad_clip)
                    opt.step(lr)
                except NonFiniteError as exc:
                    raise TrainingError(f"non-finite value at iteration {it}: {exc}", iteration=it) from exc
            except TrainingError as exc:
                if exc.iteration is None:
                    exc.iteration = it
                log.error("aborting at iteration %d: %s", it, exc)
                raise
            result.history.append((it, lr, value))
            if writer is not None:
                writer.writerow([it, repr(lr), repr(value)])
            if cfg.log_every and it % cfg.log_every == 0:
                log.info("iter %d lr %.3e loss %.4f", it, lr, value)
            if out_dir is not None and cfg.checkpoint_every and (it + 1) % cfg.checkpoint_every == 0 \
                    and it + 1 < cfg.total_iterations:
                result.checkpoints.append(
                    save_checkpoint(out_dir / f"iter_{it + 1:06d}.smba", model, config_text))
    finally:
        if handle is not None:
            handle.close()
    if out_dir is not None:
        result.checkpoints.append(save_checkpoint(out_dir / "last.smba", model, config_text))
    result.seconds = time.perf_counter() - start
    model.eval()
    return result


def predict_logits(model, image: np.ndarray, tile: int, stride: int, batch_size: int = 4) -> np.ndarray:
    """Scene-sized [K, H, W] logits from overlapping tiles (logits averaged)."""
    h, w = image.shape[:2]
    dummy = SegmentationSample(image, np.zeros((h, w), dtype=np.uint8))
    tiles, placements = tile_image(dummy, tile, stride)
    was_training = model.training
    model.eval()
    outputs = []
    try:
        with no_grad():
            for i in range(0, len(tiles), batch_size):
                batch = np.stack([normalize(t.image) for t in tiles[i:i + batch_size]])
                outputs.extend(model(Tensor(batch)).data)
    finally:
        model.train(was_training)
    return stitch_logits(outputs, placements, h, w)


def predict_mask(model, image: np.ndarray, tile: int, stride: int) -> np.ndarray:
    return predict_logits(model, image, tile, stride).argmax(axis=0).astype(np.uint8)


@dataclass
class EvalResult:
    confusion: ConfusionMatrix
    iou: np.ndarray
    miou: float
    included: list[int]


def evaluate(model, manifest: DatasetManifest, tile: int = 512, stride: int = 512,
             excluded_classes=()) -> EvalResult:
    """Tiled inference over every scene of ``manifest`` and mIoU of the result."""
    if model.num_classes != manifest.num_classes:
        raise ConfigError(
            f"model predicts {model.num_classes} classes but dataset declares {manifest.num_classes}")
    cm = ConfusionMatrix(manifest.num_classes, manifest.ignore_index)
    for i in range(len(manifest)):
        sample = manifest.load(i)
        cm.update(predict_mask(model, sample.image, tile, stride), sample.mask)
    included = [c for c in range(manifest.num_classes) if c not in set(excluded_classes)]
    iou, mean = miou(cm, included)
    return EvalResult(cm, iou, mean, included)
