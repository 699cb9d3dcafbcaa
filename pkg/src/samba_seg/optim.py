"""AdamW with decoupled weight decay and a warmup + polynomial-decay schedule."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import TrainingError
from .tensor import Parameter


@dataclass
class TrainConfig:
    """Optimization settings.

    Reference schedules use 160k or 15k iterations at batch 16; the
    iteration count is left to the caller. ``grad_clip = 0`` disables
    clipping and ``checkpoint_every = 0`` writes only the final checkpoint.
    """

    total_iterations: int = 160_000
    batch_size: int = 16
    base_lr: float = 6e-4
    weight_decay: float = 0.01
    warmup_iterations: int = 1500
    warmup_ratio: float = 1e-3
    poly_power: float = 1.0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    grad_clip: float = 0.0
    seed: int = 0
    checkpoint_every: int = 0
    log_every: int = 1

    def __post_init__(self):
        if self.base_lr <= 0:
            raise ValueError("base_lr must be positive")
        if not 0 <= self.warmup_iterations <= self.total_iterations:
            raise ValueError("warmup_iterations must lie in [0, total_iterations]")
        if self.batch_size < 1 or self.total_iterations < 1:
            raise ValueError("batch_size and total_iterations must be positive")


def lr_at(iteration: int, cfg: TrainConfig) -> float:
    """Learning rate at ``iteration`` (0-based).

    Linear warmup from ``base_lr * warmup_ratio`` to ``base_lr``, then
    ``base_lr * (1 - progress) ** poly_power`` reaching 0 at ``total_iterations``.
    """
    base, warm, total = cfg.base_lr, cfg.warmup_iterations, cfg.total_iterations
    if warm and iteration < warm:
        r = cfg.warmup_ratio
        return base * (r + (1.0 - r) * iteration / warm)
    if total == warm:
        return base if iteration <= warm else 0.0
    progress = min(max((iteration - warm) / (total - warm), 0.0), 1.0)
    return max(base * (1.0 - progress) ** cfg.poly_power, 0.0)


@dataclass
class OptimizerState:
    m: list[np.ndarray] = field(default_factory=list)
    v: list[np.ndarray] = field(default_factory=list)
    step: int = 0

    @classmethod
    def for_params(cls, params) -> "OptimizerState":
        return cls([np.zeros_like(p.data) for p in params], [np.zeros_like(p.data) for p in params])


def adamw_step(params: list[Parameter], state: OptimizerState, lr: float, weight_decay: float = 0.01,
               betas: tuple[float, float] = (0.9, 0.999), eps: float = 1e-8) -> None:
    """One in-place AdamW update using each parameter's ``.grad``."""
    for p in params:
        if not np.all(np.isfinite(p.grad)):
            raise TrainingError(f"non-finite gradient in parameter {p.name or '<unnamed>'}")
    state.step += 1
    b1, b2 = betas
    c1 = 1.0 - b1 ** state.step
    c2 = 1.0 - b2 ** state.step
    for p, m, v in zip(params, state.m, state.v):
        g = p.grad
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * g * g
        if weight_decay:
            p.data *= 1.0 - lr * weight_decay
        p.data -= (lr * (m / c1) / (np.sqrt(v / c2) + eps)).astype(p.dtype, copy=False)


class AdamW:
    def __init__(self, params, cfg: TrainConfig):
        self.params = list(params)
        self.cfg = cfg
        self.state = OptimizerState.for_params(self.params)

    def zero_grad(self) -> None:
        for p in self.params:
            p.zero_grad()

    def clip_grad_norm(self, max_norm: float) -> float:
        total = float(np.sqrt(sum(float((p.grad.astype(np.float64) ** 2).sum()) for p in self.params)))
        if max_norm > 0 and total > max_norm:
            scale = max_norm / (total + 1e-6)
            for p in self.params:
                p.grad *= scale
        return total

    def step(self, lr: float) -> None:
        adamw_step(self.params, self.state, lr, self.cfg.weight_decay,
                   (self.cfg.beta1, self.cfg.beta2), self.cfg.eps)
