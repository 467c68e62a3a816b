"""Backend benchmark: times the hot kernels on numba and numpy.

Run with  python -m coevkm.benchmark  [--size N] [--cells M] [--repeats R].
The first numba call includes JIT compilation and is excluded from timing.
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from .backend import get_kernels
from ._kernels_numpy import fold_moments
from .model import FourierFunction


def _time(fn, repeats):
    fn()  # warm-up (JIT compile on the numba side)
    tic = time.perf_counter()
    for _ in range(repeats):
        fn()
    return (time.perf_counter() - tic) / repeats


def bench_coupled(N, repeats):
    rng = np.random.default_rng(0)
    phases = rng.uniform(0, 1, N)
    W = rng.uniform(0, 1, (N, N))
    omega = rng.uniform(0, 1, N)
    gc0, ga, gb = FourierFunction.sin().dense_coeffs()
    hc0, ha, hb = FourierFunction.neg_sin_squared().dense_coeffs()
    out = {}
    for name in ("numpy", "numba"):
        kern = get_kernels(name)
        out[name] = _time(
            lambda: kern.coupled_rhs(phases, W, omega, gc0, ga, gb, hc0, ha, hb, 1.0),
            repeats,
        )
    return out


def bench_fibered(m, n, repeats):
    rng = np.random.default_rng(1)
    A = m * n
    phases = rng.uniform(0, 1, A)
    cells = np.repeat(np.arange(m, dtype=np.int64), n)
    D = rng.uniform(0, 1, (A, m))
    mu = np.full(m, 1.0 / m)
    omega = rng.uniform(0, 1, m)
    atom_w = np.full(A, 1.0 / n)
    gc0, ga, gb = FourierFunction.sin().dense_coeffs()
    hc0, ha, hb = FourierFunction.sin().dense_coeffs()
    ptr = np.arange(m + 1, dtype=np.int64)
    q = rng.integers(0, m, m).astype(np.int64)
    y_w = rng.uniform(0, 1, m)
    out = {}
    for name in ("numpy", "numba"):
        kern = get_kernels(name)

        def run():
            mass, S, C = kern.cell_moments(phases, atom_w, cells, m, 1)
            gbase, gP, gQ = fold_moments(mass, S, C, gc0, ga, gb)
            hbase, hP, hQ = fold_moments(mass, S, C, hc0, ha, hb)
            kern.fibered_rhs(phases, cells, D, mu, omega, 0.9, ptr, q, y_w,
                             gbase, gP, gQ, hbase, hP, hQ, 1.0)

        out[name] = _time(run, repeats)
    return out


def main(argv=None) -> int:
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--size", type=int, default=512, help="oscillators for the coupled kernel")
    p.add_argument("--cells", type=int, default=32, help="cells (and atoms per cell) for the fibered kernel")
    p.add_argument("--repeats", type=int, default=20)
    args = p.parse_args(argv)

    print(f"coupled_rhs, N={args.size}")
    for name, sec in bench_coupled(args.size, args.repeats).items():
        print(f"  {name:6s} {sec * 1e3:9.3f} ms")
    print(f"fibered_rhs, m=n={args.cells}")
    for name, sec in bench_fibered(args.cells, args.cells, args.repeats).items():
        print(f"  {name:6s} {sec * 1e3:9.3f} ms")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
