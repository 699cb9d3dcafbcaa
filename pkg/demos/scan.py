"""Selective scan: discretize a bank of lanes and compare the two scan paths.

    python3 demos/scan.py
"""

import time

import numpy as np

from samba_seg import SsmLaneParams, Tensor, selective_scan_chunked, selective_scan_sequential, zoh_discretize


def main():
    rng = np.random.default_rng(0)
    batch, length, d_inner, d_state = 2, 1024, 16, 8
    x = Tensor(rng.normal(size=(batch, length, d_inner)))
    lanes = SsmLaneParams(
        A=Tensor(-np.exp(rng.normal(size=(d_inner, d_state)))),
        D=Tensor(np.ones(d_inner)),
        B=Tensor(rng.normal(size=(batch, length, d_state))),
        C=Tensor(rng.normal(size=(batch, length, d_state))),
        delta=Tensor(rng.uniform(1e-3, 0.1, size=(batch, length, d_inner))),
    )

    disc = zoh_discretize(lanes.A, lanes.B, lanes.delta)
    print(f"A_bar in ({disc.A_bar.data.min():.4f}, {disc.A_bar.data.max():.4f}), all inside (0, 1)")

    start = time.perf_counter()
    ref = selective_scan_sequential(x, lanes).data
    print(f"sequential        {1e3 * (time.perf_counter() - start):7.1f} ms")
    for chunk in (16, 64, 256):
        start = time.perf_counter()
        y = selective_scan_chunked(x, lanes, chunk).data
        err = np.abs(y - ref).max() / np.abs(ref).max()
        print(f"chunk {chunk:<4}        {1e3 * (time.perf_counter() - start):7.1f} ms   rel diff {err:.1e}")


if __name__ == "__main__":
    main()
