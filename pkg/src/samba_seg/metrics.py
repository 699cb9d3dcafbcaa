"""Confusion matrices and intersection-over-union."""

from __future__ import annotations

from fractions import Fraction

import numpy as np

from .data.manifest import IGNORE_INDEX
from .errors import MetricError, ShapeError, ValidationError


class ConfusionMatrix:
    """Counts indexed ``[ground truth, prediction]``; ignored pixels are skipped."""

    def __init__(self, num_classes: int, ignore_index: int = IGNORE_INDEX):
        self.num_classes = num_classes
        self.ignore_index = ignore_index
        self.counts = np.zeros((num_classes, num_classes), dtype=np.int64)

    def update(self, pred, gt) -> "ConfusionMatrix":
        pred, gt = np.asarray(pred), np.asarray(gt)
        if pred.shape != gt.shape:
            raise ShapeError(f"prediction {pred.shape} and ground truth {gt.shape} differ")
        keep = gt != self.ignore_index
        g = gt[keep].astype(np.int64)
        p = pred[keep].astype(np.int64)
        k = self.num_classes
        if g.size and (g.max() >= k or g.min() < 0 or p.max() >= k or p.min() < 0):
            raise ValidationError(f"labels outside [0, {k})")
        self.counts += np.bincount(g * k + p, minlength=k * k).reshape(k, k)
        return self

    def merge(self, other: "ConfusionMatrix") -> "ConfusionMatrix":
        self.counts += other.counts
        return self

    @property
    def tp(self) -> np.ndarray:
        return np.diag(self.counts)

    @property
    def fp(self) -> np.ndarray:
        return self.counts.sum(axis=0) - self.tp

    @property
    def fn(self) -> np.ndarray:
        return self.counts.sum(axis=1) - self.tp

    @property
    def total(self) -> int:
        return int(self.counts.sum())


def confusion_update(cm: ConfusionMatrix, pred, gt) -> ConfusionMatrix:
    return cm.update(pred, gt)


def miou(cm: ConfusionMatrix, included_classes=None) -> tuple[np.ndarray, float]:
    """Per-class IoU and their mean.

    ``IoU_c = TP / (TP + FP + FN)``. Entries for excluded classes and for
    classes absent from both prediction and ground truth are NaN and do not
    enter the mean. The mean is taken over exact ratios of the integer counts,
    so it is the correctly rounded true mean.
    """
    k = cm.num_classes
    included = list(range(k)) if included_classes is None else sorted(set(included_classes))
    if not included:
        raise MetricError("no classes to evaluate")
    denom = cm.tp + cm.fp + cm.fn
    iou = np.full(k, np.nan)
    ratios = []
    for c in included:
        if denom[c]:
            iou[c] = cm.tp[c] / denom[c]
            ratios.append(Fraction(int(cm.tp[c]), int(denom[c])))
    if not ratios:
        raise MetricError("none of the evaluated classes occur in prediction or ground truth")
    return iou, float(sum(ratios) / len(ratios))
