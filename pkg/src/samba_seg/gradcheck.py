"""Central finite-difference oracle for analytic gradients."""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

from .errors import ContractError, GradientCheckError
from .tensor import Tape, Tensor, no_grad


def _probe(f: Callable[[], Tensor]) -> float:
    with no_grad():
        value = float(np.asarray(f().data).reshape(-1)[0])
    if not np.isfinite(value):
        raise GradientCheckError(f"function returned non-finite value {value}")
    return value


def analytic_gradients(f: Callable[[], Tensor], params: Sequence[Tensor]) -> list[np.ndarray]:
    for p in params:
        p.grad = np.zeros_like(p.data)
    with Tape() as tape:
        loss = f()
        if loss.size != 1:
            raise ContractError(f"gradient check needs a scalar function, got shape {loss.shape}")
        tape.backward(loss)
    return [p.grad.copy() for p in params]


def finite_difference_check(
    f: Callable[[], Tensor],
    params: Sequence[Tensor],
    h: float = 1e-3,
    max_coords: int | None = None,
    rng: np.random.Generator | None = None,
) -> float:
    """Compare backpropagated gradients against central differences.

    Args:
        f: Zero-argument function returning a scalar Tensor. Must be pure:
            the only state it reads that changes is the data of ``params``.
        params: Leaf tensors with ``requires_grad=True``.
        h: Perturbation step.
        max_coords: If given, check at most this many randomly chosen
            coordinates per parameter instead of all of them.
        rng: Source for coordinate sampling.

    Returns:
        ``max |analytic - numeric| / max(1, |numeric|)`` over checked coordinates.
    """
    if h <= 0:
        raise ContractError("h must be positive")
    _probe(f)
    analytic = analytic_gradients(f, params)
    rng = rng or np.random.default_rng(0)
    worst = 0.0
    for p, grad in zip(params, analytic):
        flat = p.data.reshape(-1)
        coords = np.arange(flat.size)
        if max_coords is not None and flat.size > max_coords:
            coords = rng.choice(flat.size, size=max_coords, replace=False)
        for i in coords:
            orig = flat[i]
            flat[i] = orig + h
            f_plus = _probe(f)
            flat[i] = orig - h
            f_minus = _probe(f)
            flat[i] = orig
            numeric = (f_plus - f_minus) / (2 * h)
            err = abs(grad.reshape(-1)[i] - numeric) / max(1.0, abs(numeric))
            worst = max(worst, float(err))
    return worst
