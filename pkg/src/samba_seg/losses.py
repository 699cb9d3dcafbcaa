"""Pixel-wise cross entropy with an ignore label."""

from __future__ import annotations

import numpy as np

from .data.manifest import IGNORE_INDEX
from .errors import ShapeError, ValidationError
from .tensor import Tensor, from_op


def cross_entropy_loss(logits: Tensor, mask, ignore_index: int = IGNORE_INDEX) -> Tensor:
    """Mean of ``-log softmax(logits)[label]`` over non-ignored pixels.

    ``logits`` is [B, K, H, W] and ``mask`` [B, H, W] of integer labels.
    With no valid pixel the loss is 0 and its gradient is zero.
    """
    mask = np.asarray(mask)
    if logits.ndim != 4 or mask.shape != (logits.shape[0],) + logits.shape[2:]:
        raise ShapeError(f"cross_entropy: logits {logits.shape} vs mask {mask.shape}")
    k = logits.shape[1]
    valid = mask != ignore_index
    if np.any(mask[valid] >= k) or np.any(mask[valid] < 0):
        raise ValidationError(f"labels outside [0, {k}) found in mask")
    z = logits.data
    shifted = z - z.max(axis=1, keepdims=True)
    log_norm = np.log(np.exp(shifted).sum(axis=1, keepdims=True))
    log_p = shifted - log_norm
    labels = np.where(valid, mask, 0)
    picked = np.take_along_axis(log_p, labels[:, None], axis=1)[:, 0]
    n_valid = int(valid.sum())
    loss = -(picked * valid).sum() / n_valid if n_valid else 0.0

    def backward(g):
        if not n_valid:
            return (np.zeros_like(z),)
        grad = np.exp(log_p)
        np.put_along_axis(grad, labels[:, None], np.take_along_axis(grad, labels[:, None], axis=1) - 1, axis=1)
        grad *= valid[:, None] / n_valid
        return (grad * g,)

    return from_op(np.asarray(loss, dtype=z.dtype), (logits,), backward)
