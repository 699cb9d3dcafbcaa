"""Selective state-space kernel and the Mamba block.

Continuous lanes ``h' = A h + B x``, ``y = C h + D x`` (diagonal ``A``) are
discretized with a zero-order hold over a per-token timestep ``delta``::

    A_bar = exp(delta * A)
    B_bar = (exp(delta * A) - 1) / A * B = delta * B * expm1(z) / z,  z = delta * A

and then unrolled as ``h_k = A_bar_k h_{k-1} + B_bar_k x_k``,
``y_k = <C_k, h_k> + D x_k`` with ``h_{-1} = 0``.

Array layout throughout: ``x`` [B, L, d_inner], ``A`` [d_inner, d_state],
``B_t``/``C_t`` [B, L, d_state], ``delta`` [B, L, d_inner], and discretized
coefficients [B, L, d_inner, d_state].
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import nn, ops
from .errors import ContractError, ShapeError
from .tensor import Parameter, Tensor, as_tensor, from_op

# |z| below which expm1(z)/z switches to its Taylor series (z == 0 is 0/0)
_PHI_SERIES = 1e-5
# |z| below which the derivative of expm1(z)/z uses its Taylor series
_DPHI_SERIES = 0.5


@dataclass
class SsmLaneParams:
    """Continuous parameters of a bank of diagonal SSM lanes."""

    A: Tensor       # [d_inner, d_state], strictly negative
    D: Tensor       # [d_inner]
    B: Tensor       # [B, L, d_state]
    C: Tensor       # [B, L, d_state]
    delta: Tensor   # [B, L, d_inner], strictly positive


@dataclass
class DiscreteLaneParams:
    A_bar: Tensor   # [B, L, d_inner, d_state]
    B_bar: Tensor   # [B, L, d_inner, d_state]


def expm1_ratio(z: np.ndarray) -> np.ndarray:
    """``expm1(z) / z`` with the removable singularity at 0 filled in."""
    z = np.asarray(z)
    small = np.abs(z) < _PHI_SERIES
    safe = np.where(small, 1.0, z)
    direct = np.expm1(safe) / safe
    series = 1.0 + z / 2.0 + z * z / 6.0
    return np.where(small, series, direct).astype(z.dtype, copy=False)


def expm1_ratio_grad(z: np.ndarray) -> np.ndarray:
    """Derivative of :func:`expm1_ratio`, ``(z e^z - e^z + 1) / z^2``."""
    z = np.asarray(z)
    small = np.abs(z) < _DPHI_SERIES
    safe = np.where(small, 1.0, z)
    direct = (np.exp(safe) * (safe - 1.0) + 1.0) / (safe * safe)
    # sum_{n>=1} n z^(n-1) / (n+1)!
    series = np.zeros_like(z)
    term_pow = np.ones_like(z)
    for n in range(1, 16):
        series = series + n * term_pow / math.factorial(n + 1)
        term_pow = term_pow * z
    return np.where(small, series, direct).astype(z.dtype, copy=False)


def zoh_discretize(A, B_t, delta) -> DiscreteLaneParams:
    """Zero-order-hold discretization of diagonal lanes.

    Args:
        A: [d_inner, d_state] continuous evolution coefficients.
        B_t: [..., L, d_state] input projections per token.
        delta: [..., L, d_inner] positive timesteps.

    Returns:
        ``A_bar`` and ``B_bar``, each [..., L, d_inner, d_state].
    """
    A, B_t, delta = as_tensor(A), as_tensor(B_t), as_tensor(delta)
    if A.ndim != 2 or delta.shape[-1] != A.shape[0] or B_t.shape[-1] != A.shape[1] \
            or B_t.shape[:-1] != delta.shape[:-1]:
        raise ShapeError(f"zoh_discretize: A {A.shape}, B {B_t.shape}, delta {delta.shape} disagree")
    if not np.all(delta.data > 0):
        raise ContractError("zoh_discretize: delta must be strictly positive")
    d = delta.data[..., :, None]
    b = B_t.data[..., None, :]
    z = d * A.data
    a_bar = np.exp(z)
    phi = expm1_ratio(z)
    b_bar = d * b * phi
    lead = tuple(range(delta.ndim - 1))

    def backward_a(g):
        gA = (g * a_bar * d).sum(axis=lead) if A.requires_grad else None
        gd = (g * a_bar * A.data).sum(axis=-1) if delta.requires_grad else None
        return gA, None, gd

    def backward_b(g):
        dphi = expm1_ratio_grad(z)
        gA = gB = gd = None
        if A.requires_grad:
            gA = (g * d * b * dphi * d).sum(axis=lead)
        if B_t.requires_grad:
            gB = (g * d * phi).sum(axis=-2)
        if delta.requires_grad:
            gd = (g * b * (phi + z * dphi)).sum(axis=-1)
        return gA, gB, gd

    inputs = (A, B_t, delta)
    return DiscreteLaneParams(from_op(a_bar, inputs, backward_a), from_op(b_bar, inputs, backward_b))


# -- linear recurrence cores (plain numpy) -----------------------------------

def states_sequential(a: np.ndarray, u: np.ndarray) -> np.ndarray:
    """All states of ``h_k = a_k h_{k-1} + u_k`` along axis 1, ``h_{-1} = 0``."""
    h = np.empty_like(u)
    prev = np.zeros_like(u[:, 0])
    for k in range(u.shape[1]):
        prev = a[:, k] * prev + u[:, k]
        h[:, k] = prev
    return h


def states_chunked(a: np.ndarray, u: np.ndarray, chunk: int) -> np.ndarray:
    """Same recurrence as :func:`states_sequential`, evaluated chunk-parallel.

    Each chunk is first scanned from a zero state while its running product
    of ``a`` is materialized; the chunk-final states are then chained, and
    the carried-in state is injected via that running product.
    """
    if chunk < 1:
        raise ContractError(f"chunk must be >= 1, got {chunk}")
    n, length = u.shape[:2]
    lanes = u.shape[2:]
    nc = -(-length // chunk)
    pad = nc * chunk - length
    if pad:
        widths = [(0, 0), (0, pad)] + [(0, 0)] * len(lanes)
        a = np.pad(a, widths, constant_values=1.0)
        u = np.pad(u, widths)
    a = a.reshape(n, nc, chunk, *lanes)
    u = u.reshape(n, nc, chunk, *lanes)

    local = np.empty_like(u)
    prod = np.empty_like(a)
    h = np.zeros_like(u[:, :, 0])
    p = np.ones_like(a[:, :, 0])
    for t in range(chunk):
        h = a[:, :, t] * h + u[:, :, t]
        p = p * a[:, :, t]
        local[:, :, t] = h
        prod[:, :, t] = p

    carry = np.zeros_like(u[:, :, 0])
    prev = np.zeros_like(u[:, 0, 0])
    for c in range(1, nc):
        prev = local[:, c - 1, -1] + prod[:, c - 1, -1] * prev
        carry[:, c] = prev

    out = local + prod * carry[:, :, None]
    return out.reshape(n, nc * chunk, *lanes)[:, :length]


def _states(a, u, chunk):
    return states_sequential(a, u) if chunk is None else states_chunked(a, u, chunk)


def linear_scan(x, A_bar, B_bar, C, D, chunk: int | None = None) -> Tensor:
    """Run the discrete recurrence and read out ``y``.

    Args:
        x: [B, L, d_inner] inputs.
        A_bar, B_bar: [B, L, d_inner, d_state] discretized coefficients.
        C: [B, L, d_state] readout vectors.
        D: [d_inner] skip coefficients.
        chunk: ``None`` for the step-by-step recurrence, otherwise the chunk
            length of the chunk-parallel evaluation.

    Returns:
        [B, L, d_inner] outputs. Differentiable in all five operands; the
        backward pass runs the adjoint recurrence in reverse with the same
        evaluation strategy.
    """
    x, A_bar, B_bar, C, D = (as_tensor(t) for t in (x, A_bar, B_bar, C, D))
    n, length, di = x.shape
    ds = C.shape[-1]
    if A_bar.shape != (n, length, di, ds) or B_bar.shape != A_bar.shape \
            or C.shape != (n, length, ds) or D.shape != (di,):
        raise ShapeError(
            f"linear_scan: x {x.shape}, A_bar {A_bar.shape}, B_bar {B_bar.shape}, "
            f"C {C.shape}, D {D.shape} disagree")
    a, xd = A_bar.data, x.data
    u = B_bar.data * xd[..., None]
    h = _states(a, u, chunk)
    y = np.einsum("bldn,bln->bld", h, C.data) + D.data * xd
    ops.add_flops(2 * 6 * length * di * ds * n)

    def backward(g):
        gh = g[..., None] * C.data[:, :, None, :]
        a_next = np.concatenate([a[:, 1:], np.zeros_like(a[:, :1])], axis=1)
        lam = _states(a_next[:, ::-1], gh[:, ::-1], chunk)[:, ::-1]
        h_prev = np.concatenate([np.zeros_like(h[:, :1]), h[:, :-1]], axis=1)
        gx = np.einsum("bldn,bldn->bld", lam, B_bar.data) + g * D.data
        gA = lam * h_prev
        gB = lam * xd[..., None]
        gC = np.einsum("bld,bldn->bln", g, h)
        gD = (g * xd).sum(axis=(0, 1))
        return gx, gA, gB, gC, gD

    return from_op(y, (x, A_bar, B_bar, C, D), backward)


def selective_scan_sequential(x, params: SsmLaneParams) -> Tensor:
    """Discretize ``params`` and run the step-by-step recurrence."""
    disc = zoh_discretize(params.A, params.B, params.delta)
    return linear_scan(x, disc.A_bar, disc.B_bar, params.C, params.D)


def selective_scan_chunked(x, params: SsmLaneParams, chunk: int) -> Tensor:
    """Discretize ``params`` and run the chunk-parallel recurrence."""
    if chunk < 1:
        raise ContractError(f"chunk must be >= 1, got {chunk}")
    disc = zoh_discretize(params.A, params.B, params.delta)
    return linear_scan(x, disc.A_bar, disc.B_bar, params.C, params.D, chunk=chunk)


# -- the Mamba block ---------------------------------------------------------

@dataclass(frozen=True)
class MambaBlockConfig:
    dim: int
    d_state: int = 16
    expansion: int = 2
    conv_kernel: int = 4
    dt_rank: int | None = None
    scan_chunk: int | None = 16

    def __post_init__(self):
        for name in ("dim", "d_state", "expansion", "conv_kernel"):
            if getattr(self, name) < 1:
                raise ValueError(f"MambaBlockConfig.{name} must be a positive integer")
        if self.dt_rank is not None and self.dt_rank < 1:
            raise ValueError("MambaBlockConfig.dt_rank must be positive")

    @property
    def d_inner(self) -> int:
        return self.expansion * self.dim

    @property
    def rank(self) -> int:
        return self.dt_rank or math.ceil(self.dim / 16)


def selective_projection(x: Tensor, w_b: Tensor, w_c: Tensor, w_dt_down: Tensor,
                         w_dt_up: Tensor, dt_bias: Tensor) -> tuple[Tensor, Tensor, Tensor]:
    """Input-dependent ``B_t``, ``C_t`` and ``delta`` from the inner stream.

    ``B_t = x @ w_b`` and ``C_t = x @ w_c`` are linear in ``x``; the timestep
    goes through a low-rank bottleneck, ``delta = softplus(x @ w_dt_down @ w_dt_up + dt_bias)``.
    """
    b_t = ops.matmul(x, w_b)
    c_t = ops.matmul(x, w_c)
    delta = ops.softplus(ops.matmul(ops.matmul(x, w_dt_down), w_dt_up) + dt_bias)
    return b_t, c_t, delta


class SelectiveProjection(nn.Module):
    def __init__(self, d_inner: int, d_state: int, dt_rank: int, rng,
                 dt_min: float = 1e-3, dt_max: float = 1e-1):
        bound = 1.0 / math.sqrt(d_inner)
        self.w_b = Parameter(rng.uniform(-bound, bound, (d_inner, d_state)))
        self.w_c = Parameter(rng.uniform(-bound, bound, (d_inner, d_state)))
        self.w_dt_down = Parameter(rng.uniform(-bound, bound, (d_inner, dt_rank)))
        up = dt_rank ** -0.5
        self.w_dt_up = Parameter(rng.uniform(-up, up, (dt_rank, d_inner)))
        # softplus(bias) is log-uniform in [dt_min, dt_max]
        dt = np.exp(rng.uniform(math.log(dt_min), math.log(dt_max), d_inner))
        self.dt_bias = Parameter(dt + np.log(-np.expm1(-dt)))

    def forward(self, x: Tensor):
        return selective_projection(x, self.w_b, self.w_c, self.w_dt_down, self.w_dt_up, self.dt_bias)


class MambaBlock(nn.Module):
    """Token mixer: LN, gated selective-scan branch, output projection.

    Pipeline on [B, L, dim] tokens::

        n = LN(x); u = W_u n; g = W_g n
        u = silu(causal_depthwise_conv(u))
        y = scan(u; B_t, C_t, delta from u) * silu(g)
        out = W_o y
    """

    def __init__(self, cfg: MambaBlockConfig, rng=None):
        rng = rng if rng is not None else np.random.default_rng(0)
        self.cfg = cfg
        di, ds = cfg.d_inner, cfg.d_state
        self.norm = nn.LayerNorm(cfg.dim)
        self.in_proj_u = nn.Linear(cfg.dim, di, rng=rng)
        self.in_proj_g = nn.Linear(cfg.dim, di, rng=rng)
        bound = 1.0 / math.sqrt(cfg.conv_kernel)
        self.conv_weight = Parameter(rng.uniform(-bound, bound, (di, cfg.conv_kernel)))
        self.conv_bias = Parameter(rng.uniform(-bound, bound, di))
        self.proj = SelectiveProjection(di, ds, cfg.rank, rng)
        # A[n] = -(n + 1), stored as log-magnitude
        self.A_log = Parameter(np.log(np.tile(np.arange(1, ds + 1, dtype=np.float64), (di, 1))))
        self.D = Parameter(np.ones(di))
        self.out_proj = nn.Linear(di, cfg.dim, rng=rng)

    def lane_params(self, u: Tensor) -> SsmLaneParams:
        b_t, c_t, delta = self.proj(u)
        A = ops.mul(ops.exp(self.A_log), -1.0)
        return SsmLaneParams(A=A, D=self.D, B=b_t, C=c_t, delta=delta)

    def forward(self, x: Tensor) -> Tensor:
        if x.ndim != 3 or x.shape[-1] != self.cfg.dim:
            raise ShapeError(f"MambaBlock(dim={self.cfg.dim}) got input {x.shape}")
        n = self.norm(x)
        u = self.in_proj_u(n)
        g = self.in_proj_g(n)
        u = ops.transpose(u, (0, 2, 1))
        u = ops.depthwise_conv1d(u, self.conv_weight, self.conv_bias)
        u = ops.silu(ops.transpose(u, (0, 2, 1)))
        lanes = self.lane_params(u)
        chunk = self.cfg.scan_chunk
        if chunk is None or chunk >= u.shape[1]:
            y = selective_scan_sequential(u, lanes)
        else:
            y = selective_scan_chunked(u, lanes, chunk)
        y = ops.mul(y, ops.silu(g))
        return self.out_proj(y)


