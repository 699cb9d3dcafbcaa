"""Reference implementations for the selective scan, used as test oracles."""

import math

import numpy as np

from samba_seg.ssm import SsmLaneParams
from samba_seg.tensor import Tensor, default_dtype


def random_lanes(rng, batch=1, length=8, d_inner=3, d_state=2, dtype=np.float64):
    """Stable random lane parameters: A < 0, delta > 0."""
    with default_dtype(dtype):
        return (
            Tensor(rng.normal(size=(batch, length, d_inner))),
            SsmLaneParams(
                A=Tensor(-np.exp(rng.normal(size=(d_inner, d_state)))),
                D=Tensor(rng.normal(size=d_inner)),
                B=Tensor(rng.normal(size=(batch, length, d_state))),
                C=Tensor(rng.normal(size=(batch, length, d_state))),
                delta=Tensor(rng.uniform(1e-3, 0.5, size=(batch, length, d_inner))),
            ),
        )


def unrolled_scan(x, p: SsmLaneParams) -> np.ndarray:
    """Materialized sum form y_k = sum_j C_k (prod_{i=j+1..k} A_bar_i) B_bar_j x_j + D x_k."""
    A, D = p.A.data, p.D.data
    B, C, dt, xs = p.B.data, p.C.data, p.delta.data, x.data
    nb, length, di = xs.shape
    ds = A.shape[1]
    y = np.zeros_like(xs)
    for b in range(nb):
        for d in range(di):
            for n in range(ds):
                a = [math.exp(dt[b, t, d] * A[d, n]) for t in range(length)]
                bb = [B[b, t, n] * (a[t] - 1.0) / A[d, n] for t in range(length)]
                for k in range(length):
                    acc = 0.0
                    for j in range(k + 1):
                        prod = 1.0
                        for i in range(j + 1, k + 1):
                            prod *= a[i]
                        acc += prod * bb[j] * xs[b, j, d]
                    y[b, k, d] += C[b, k, n] * acc
            y[b, :, d] += D[d] * xs[b, :, d]
    return y
