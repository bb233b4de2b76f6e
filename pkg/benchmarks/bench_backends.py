"""Benchmark the compiled MMD^2 kernels against the numpy fallback.

Usage: python benchmarks/bench_backends.py [--repeats N]

Covers the forward and gradient kernels for both the energy and Gaussian
variants across sample sizes bracketing the library's workloads (3-point
quantile vectors up to raw identity-query sample sets).
"""

import argparse
import time

import numpy as np

from elicit.backend import kernels_py

try:
    from elicit.backend import _kernels
except ImportError:
    _kernels = None

CASES = [
    (64, 3, 3),
    (128, 3, 3),
    (16, 50, 50),
    (64, 200, 200),
    (8, 1000, 1000),
]


def _time(fn, repeats):
    fn()  # warm up
    t0 = time.perf_counter()
    for _ in range(repeats):
        fn()
    return (time.perf_counter() - t0) / repeats


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--repeats", type=int, default=5)
    args = parser.parse_args()

    if _kernels is None:
        print("compiled extension not available; benchmarking numpy fallback only")
    backends = [("numpy", kernels_py)] + ([("compiled", _kernels)] if _kernels else [])

    rng = np.random.default_rng(0)
    header = f"{'case':<22}{'kernel':<16}" + "".join(f"{name:>12}" for name, _ in backends)
    if _kernels is not None:
        header += f"{'speedup':>10}"
    print(header)
    print("-" * len(header))
    for batch, n, m in CASES:
        x = np.ascontiguousarray(rng.normal(size=(batch, n)))
        y = np.ascontiguousarray(rng.normal(size=m))
        up = np.ascontiguousarray(rng.normal(size=batch))
        jobs = {
            "energy": lambda impl: impl.mmd2_energy(x, y),
            "energy_grad": lambda impl: impl.mmd2_energy_grad(x, y, up),
            "gaussian": lambda impl: impl.mmd2_gaussian(x, y, 1.0),
            "gaussian_grad": lambda impl: impl.mmd2_gaussian_grad(x, y, 1.0, up),
        }
        for kernel, job in jobs.items():
            times = [_time(lambda impl=impl: job(impl), args.repeats) for _, impl in backends]
            line = f"B={batch} n={n} m={m:<8}{kernel:<16}"
            line += "".join(f"{t * 1e3:>10.3f}ms" for t in times)
            if len(times) == 2:
                line += f"{times[0] / times[1]:>9.1f}x"
            print(line)


if __name__ == "__main__":
    main()
