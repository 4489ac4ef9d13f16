#!/usr/bin/env python3
"""Benchmark the hot kernels: numba backend against the numpy fallback.

Times one-sided stable sampling, the fused Euler/weight kernel and the
spectral exponential-Euler recursion at estimator-representative sizes.

    python benchmarks/bench_kernels.py [--paths 4096] [--steps 2048] [--reps 3]

The same comparison is what STABLEGRAD_NO_UMBA=1 toggles at import time;
here both backends run in one process via kernels.set_backend.
"""

import argparse
import time

import numpy as np

from stablegrad import kernels


def time_call(fn, *args, reps=3):
    best = float("inf")
    for _ in range(reps):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def bench_cms(n, reps):
    rng = np.random.default_rng(0)
    u = rng.random(n) * np.pi
    e = rng.standard_exponential(n)
    return {"name": f"cms_stable (n={n:.0e})",
            "args": (u, e, 0.6),
            "fn": kernels.cms_stable,
            "reps": reps}


def bench_sde(paths, steps, reps):
    rng = np.random.default_rng(1)
    d = 3
    dW = rng.standard_normal((paths, steps, d)) * 0.02
    t = np.linspace(0.0, 1.0, steps + 1)
    A = -np.eye(d)
    sigma = np.eye(d)
    return {"name": f"sde_flow_stats (P={paths}, m={steps}, d={d})",
            "args": (kernels.DRIFT_LINEAR, A, 0.0, sigma, sigma,
                     np.zeros(d), np.ones(d), t, dW, kernels.WEIGHT_FLOW),
            "fn": kernels.sde_flow_stats,
            "reps": reps}


def bench_galerkin(paths, steps, reps):
    rng = np.random.default_rng(2)
    K = 50
    lam = np.pi ** 2 * np.arange(1, K + 1) ** 2.0
    dt = np.full(steps, 1.0 / steps)
    damp = np.exp(-np.outer(dt, lam))
    phidt = (1.0 - damp) / lam
    bdW = rng.standard_normal((paths, steps, K)) * 0.05
    return {"name": f"galerkin_paths (P={paths}, m={steps}, K={K})",
            "args": (damp, phidt, bdW, np.zeros(K), kernels.NL_ARCTAN, 0.5,
                     np.zeros(K)),
            "fn": kernels.galerkin_paths,
            "reps": reps}


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--paths", type=int, default=4096)
    ap.add_argument("--steps", type=int, default=2048)
    ap.add_argument("--reps", type=int, default=3)
    args = ap.parse_args()

    cases = [
        bench_cms(args.paths * args.steps, args.reps),
        bench_sde(args.paths, args.steps, args.reps),
        bench_galerkin(max(args.paths // 8, 1), max(args.steps // 8, 1),
                       args.reps),
    ]
    backends = kernels.available_backends()
    print(f"backends: {', '.join(backends)} (active: {kernels.get_backend()})")
    header = f"{'kernel':44s}" + "".join(f"{b:>12s}" for b in backends) \
        + f"{'speedup':>10s}"
    print(header)
    print("-" * len(header))
    for case in cases:
        times = {}
        for backend in backends:
            kernels.set_backend(backend)
            case["fn"](*case["args"])  # warm-up / jit compile
            times[backend] = time_call(case["fn"], *case["args"],
                                       reps=case["reps"])
        row = f"{case['name']:44s}" + "".join(
            f"{times[b] * 1e3:10.1f}ms" for b in backends)
        if "numba" in times and "numpy" in times:
            row += f"{times['numpy'] / times['numba']:9.1f}x"
        print(row)


if __name__ == "__main__":
    main()
