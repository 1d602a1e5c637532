"""Time the numba kernels against their numpy fallbacks.

    python3 benchmarks/bench_kernels.py [--repeat 5]

Compilation is triggered once before timing, so the numbers are steady-state.
"""

import argparse
import timeit

import numpy as np

from opialiter._kernels import NUMBA_KERNELS, NUMPY_KERNELS, warmup


def cases(rng):
    a = rng.normal(size=(200_000, 3))
    b = rng.normal(size=(200_000, 3))
    z = rng.normal(size=3)
    dist = np.abs(rng.normal(size=1_000_000))
    dist.sort()
    dist = dist[::-1].copy()
    eta = np.zeros(dist.size)
    m = rng.normal(size=(2, 2))
    m *= 0.99 / np.linalg.norm(m, 2)
    x0 = rng.normal(size=2)
    return [
        ("diff_norms 2e5x3", "diff_norms", (a, b)),
        ("dist_to_point 2e5x3", "dist_to_point", (a, z)),
        ("step_norms 2e5x3", "step_norms", (a,)),
        ("fejer_first_violation 1e6", "fejer_first_violation", (dist, eta, 1e-12)),
        ("max_ratio 2e5x3", "max_ratio", (a, b, 0.5 * a, 0.5 * b, 1e-12)),
        ("linear_iterate mann 1e5 steps", "linear_iterate", (m, np.zeros(2), x0, 0.5, 100_000, 0.0)),
        ("linear_iterate picard 1e5 steps", "linear_iterate", (m, np.zeros(2), x0, -1.0, 100_000, 0.0)),
    ]


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    if not NUMBA_KERNELS:
        raise SystemExit("numba is not installed")
    warmup(NUMBA_KERNELS)
    rng = np.random.default_rng(0)
    print(f"{'kernel':34s} {'numpy ms':>10s} {'numba ms':>10s} {'speedup':>8s}")
    for label, name, inputs in cases(rng):
        t_np = min(timeit.repeat(lambda: NUMPY_KERNELS[name](*inputs), number=1, repeat=args.repeat))
        t_nb = min(timeit.repeat(lambda: NUMBA_KERNELS[name](*inputs), number=1, repeat=args.repeat))
        print(f"{label:34s} {t_np * 1e3:10.2f} {t_nb * 1e3:10.2f} {t_np / t_nb:7.1f}x")


if __name__ == "__main__":
    main()
