#!/usr/bin/env python3
"""Benchmark the numba kernels against the pure-numpy fallback.

Runs the mean-loss grid scan (the package's only hot loop) on a mid-size
workload under both backends, reports timings and the worst relative
disagreement.  The backends are not expected to match bitwise (different
summation orders); agreement at ~1e-12 is the health check.

Usage: python benchmarks/bench_kernels.py [--grid 512] [--samples 200000]
"""

import argparse
import time

import numpy as np

from tonegap import backend, kernels


def run_case(name, fn, *arrays, repeats=3):
    fn(*arrays)  # warm-up (includes JIT compilation on the numba path)
    best = np.inf
    for _ in range(repeats):
        t0 = time.perf_counter()
        out = fn(*arrays)
        best = min(best, time.perf_counter() - t0)
    print(f"  {name:28s} {best * 1e3:10.2f} ms")
    return out, best


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--grid", type=int, default=512)
    ap.add_argument("--samples", type=int, default=200_000)
    args = ap.parse_args()

    rng = np.random.default_rng(0)
    targets = rng.gamma(2.0, 0.5, args.samples)
    weights = 1.0 / (targets + 0.01) ** 2
    grid = np.geomspace(1e-6, 1e6, args.grid)

    results = {}
    for name in ("numpy",) + (("numba",) if backend.HAS_NUMBA else ()):
        backend.set_backend(name)
        print(f"backend = {name}")
        sq, t_sq = run_case("mean_sq_on_grid", kernels.mean_sq_on_grid, grid, targets)
        wsq, t_w = run_case(
            "mean_sq_weighted_on_grid", kernels.mean_sq_weighted_on_grid,
            grid, targets, weights,
        )
        results[name] = (sq, wsq, t_sq, t_w)

    if "numba" in results:
        sq_np, wsq_np, t_sq_np, t_w_np = results["numpy"]
        sq_nb, wsq_nb, t_sq_nb, t_w_nb = results["numba"]
        rel_sq = np.max(np.abs(sq_np - sq_nb) / np.maximum(np.abs(sq_np), 1e-300))
        rel_w = np.max(np.abs(wsq_np - wsq_nb) / np.maximum(np.abs(wsq_np), 1e-300))
        print(f"speedup: sq {t_sq_np / t_sq_nb:.1f}x, weighted {t_w_np / t_w_nb:.1f}x")
        print(f"worst relative disagreement: sq {rel_sq:.2e}, weighted {rel_w:.2e}")
        assert rel_sq < 1e-10 and rel_w < 1e-10, "backends disagree"


if __name__ == "__main__":
    main()
