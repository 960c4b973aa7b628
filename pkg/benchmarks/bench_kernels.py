#!/usr/bin/env python3
"""Benchmark: compiled kernels vs the pure NumPy fallback.

Times the operations that dominate Monte Carlo calibration and scanning:
batched prefix sums, the penalized-max reduction over the sparse collection,
per-block maxima, and the density-statistic reduction.

    python benchmarks/bench_kernels.py [--n 16384] [--reps 256] [--repeat 5]
"""

import argparse
import time

import numpy as np

from multiscan import build_collection_1d
from multiscan.kernels import available_backends, pure

BACKENDS = {"pure": pure}
if "ext" in available_backends():
    from multiscan.kernels import _ext
    BACKENDS["ext"] = _ext


def best_of(repeat, fn, *args):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn(*args)
        times.append(time.perf_counter() - t0)
    return min(times)


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--n", type=int, default=16384)
    ap.add_argument("--reps", type=int, default=256)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()

    rng = np.random.default_rng(0)
    data = rng.standard_normal((args.reps, args.n))
    pts = np.sort(rng.random((args.reps, args.n)), axis=1)
    coll = build_collection_1d(args.n)
    ps = pure.prefix_sums_batch(data)
    offsets = np.zeros(len(coll))
    dens = coll.width >= 2
    dj = (coll.j0[dens] + 1).copy()
    dk = coll.k[dens].copy()
    doff = np.zeros(dj.size)

    cases = {
        "prefix_sums_batch": lambda impl: impl.prefix_sums_batch(data),
        "max_excess": lambda impl: impl.max_excess(
            ps, coll.j0, coll.k, coll.inv_sqrt_width, offsets),
        "block_max": lambda impl: impl.block_max(
            ps, coll.j0, coll.k, coll.inv_sqrt_width, coll.block_bounds),
        "density_max_excess": lambda impl: impl.density_max_excess(
            pts, dj, dk, doff),
    }

    print(f"n={args.n} reps={args.reps} windows={len(coll)} "
          f"backends={sorted(BACKENDS)}")
    header = f"{'kernel':22s}" + "".join(f"{b:>12s}" for b in BACKENDS)
    if len(BACKENDS) > 1:
        header += f"{'speedup':>10s}"
    print(header)
    for name, call in cases.items():
        row = f"{name:22s}"
        times = {}
        for bname, impl in BACKENDS.items():
            times[bname] = best_of(args.repeat, call, impl)
            row += f"{times[bname] * 1e3:10.1f}ms"
        if len(times) > 1:
            row += f"{times['pure'] / times['ext']:9.1f}x"
        print(row)


if __name__ == "__main__":
    main()
