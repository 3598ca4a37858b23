#!/usr/bin/env python3
"""Benchmark the compiled SINR kernel against the NumPy fallback.

The per-slot tally (received power of every eligible device at every BS)
dominates simulation runtime, so this is the loop worth compiling.
Fading draws are excluded from the timed region: both kernels consume
identical pre-drawn arrays.

Usage: python benchmarks/bench_kernels.py [--repeats 5]
"""

import argparse
import time

import numpy as np

from rachsim.kernels import available_kernels
from rachsim.params import NetworkParams
from rachsim.sim import sample_deployment

CASES = [
    # (side_m, lambda_dp per km^2, eligible fraction)
    (3000.0, 100.0, 0.4),
    (5000.0, 100.0, 0.4),
    (5000.0, 100.0, 0.9),
    (5000.0, 500.0, 0.5),
]


def bench(repeats: int) -> None:
    kernels = available_kernels()
    print(f"kernels: {', '.join(kernels)}")
    header = f"{'case':>28} | " + " | ".join(f"{name:>12}" for name in kernels)
    print(header)
    print("-" * len(header))
    for side, dp_km2, frac in CASES:
        params = NetworkParams(
            lambda_b=1e-5, lambda_d=dp_km2 * 1e-6, xi=1, rho=1e-9, sigma2=1e-9,
            alpha=4.0, gamma_th=0.1,
        )
        rng = np.random.default_rng(1)
        dep = sample_deployment(params, side, rng)
        n_el = int(frac * dep.n_dev)
        eligible = np.sort(rng.choice(dep.n_dev, size=n_el, replace=False)).astype(np.intp)
        assoc = dep.assoc[eligible]
        h = rng.standard_exponential((dep.n_bs, n_el))

        label = f"B={dep.n_bs} E={n_el}"
        times = {}
        results = {}
        for name, fn in kernels.items():
            fn(params.rho, params.sigma2, dep.ratio_pow, eligible, assoc, h)  # warm up
            best = float("inf")
            for _ in range(repeats):
                t0 = time.perf_counter()
                out = fn(params.rho, params.sigma2, dep.ratio_pow, eligible, assoc, h)
                best = min(best, time.perf_counter() - t0)
            times[name] = best
            results[name] = out
        names = list(kernels)
        for other in names[1:]:
            np.testing.assert_allclose(results[other], results[names[0]], rtol=1e-9)
        cells = " | ".join(f"{times[name] * 1e3:9.2f} ms" for name in names)
        print(f"{label:>28} | {cells}")
    if len(kernels) > 1:
        print("\n(agreement between kernels verified to rtol=1e-9 on each case)")


if __name__ == "__main__":
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--repeats", type=int, default=5)
    bench(parser.parse_args().repeats)
