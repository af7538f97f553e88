#!/usr/bin/env python3
"""Benchmark the transport kernel: compiled backend vs. pure-numpy fallback.

Runs the backward-characteristic gather on a few grid sizes and prints a
timing table.  The compiled path is warmed once so compilation time is
reported separately from steady-state throughput.

Usage:  python benchmarks/bench_backends.py [--sizes 64,33 128,65 ...]
"""

import argparse
import time

import numpy as np

from ringkinetics.domain import AnnulusSpec, build_grid, gaussian_ring_ic
from ringkinetics.kernels import HAS_NUMBA, sl_transport


def bench_case(nr: int, np_pts: int, repeats: int = 5):
    ann = AnnulusSpec(1.0, 3.0, 0.5, 0.25)
    grid = build_grid(ann, nr, np_pts, 1.0)
    f = gaussian_ring_ic(grid, 2.0, 0.12, 0.18, 1.0, 0.5)
    rng = np.random.default_rng(7)
    er = 0.1 * rng.standard_normal(grid.r.size)
    eth = 0.1 * rng.standard_normal(grid.r.size)
    bav = 0.1 * rng.standard_normal(grid.r.size)
    r_fine = np.linspace(ann.r1, ann.r2, 8 * nr + 1)
    bext = 0.5 * np.sin(np.pi * (r_fine - ann.r1) / ann.width)
    dt = grid.dr

    results = {}
    backends = (["numba"] if HAS_NUMBA else []) + ["numpy"]
    for backend in backends:
        # warm-up (includes JIT compilation on the compiled path)
        t0 = time.perf_counter()
        sl_transport(f.values, grid.r, grid.p, dt, er, eth, bav, bext, backend)
        warm = time.perf_counter() - t0

        times = []
        for _ in range(repeats):
            t0 = time.perf_counter()
            sl_transport(f.values, grid.r, grid.p, dt, er, eth, bav, bext, backend)
            times.append(time.perf_counter() - t0)
        results[backend] = (warm, min(times))
    return results


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument(
        "--sizes", nargs="+", default=["64,33", "128,65", "256,65"],
        help="grid sizes as nr,np pairs",
    )
    parser.add_argument("--repeats", type=int, default=5)
    args = parser.parse_args()

    if not HAS_NUMBA:
        print("note: numba unavailable; timing the numpy fallback only")

    header = f"{'grid':>12} {'backend':>8} {'warm-up [s]':>12} {'best [s]':>10} {'speed-up':>9}"
    print(header)
    print("-" * len(header))
    for size in args.sizes:
        nr, np_pts = (int(s) for s in size.split(","))
        results = bench_case(nr, np_pts, args.repeats)
        base = results.get("numpy", (0.0, float("nan")))[1]
        for backend, (warm, best) in results.items():
            speedup = base / best if best > 0 else float("nan")
            print(
                f"{nr:>6}x{np_pts:<5} {backend:>8} {warm:>12.4f} {best:>10.4f} "
                f"{speedup:>8.1f}x"
            )
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
