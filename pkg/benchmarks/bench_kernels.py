"""Benchmark the fused jitted iteration kernel against the numpy path.

Usage: python benchmarks/bench_kernels.py [--iters N] [--sizes n1,n2,...]

Times full optimizer runs on a random least-squares instance so the
comparison includes everything the inner loop pays for (classification,
both step kinds, weight commits), not just the arithmetic.
"""

import argparse
import time

import numpy as np

from prunadag import Variant, run
from prunadag._kernels import numba_enabled
from prunadag.problems import gen_least_squares


def time_run(problem, x0, T, iters, force_numpy):
    # warm-up compiles the kernel so jit time is not billed to the loop
    run(problem, x0, T=T, max_iters=5, record_objective=False,
        force_numpy=force_numpy)
    t0 = time.perf_counter()
    run(problem, x0, T=T, variant=Variant.V3, max_iters=iters,
        record_objective=False, force_numpy=force_numpy)
    return time.perf_counter() - t0


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--iters", type=int, default=2000)
    parser.add_argument("--sizes", default="100,200,500,1000",
                        help="comma-separated problem dimensions")
    args = parser.parse_args()

    sizes = [int(s) for s in args.sizes.split(",")]
    print(f"numba available and enabled: {numba_enabled()}")
    print(f"{'n':>6} {'T':>5} {'numpy (s)':>10} {'jit (s)':>10} {'speedup':>8}")
    for n in sizes:
        m = max(4, n // 10)
        T = max(2, n // 10)
        ls = gen_least_squares("A1", m, n, seed=0)
        problem = ls.problem()
        x0 = np.random.default_rng(0).standard_normal(n) * 0.1
        t_np = time_run(problem, x0, T, args.iters, force_numpy=True)
        t_jit = time_run(problem, x0, T, args.iters, force_numpy=False)
        speedup = t_np / t_jit if t_jit > 0 else float("inf")
        print(f"{n:>6} {T:>5} {t_np:>10.3f} {t_jit:>10.3f} {speedup:>7.1f}x")


if __name__ == "__main__":
    main()
