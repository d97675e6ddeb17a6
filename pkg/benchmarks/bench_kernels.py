"""Compare the numba and numpy Monte Carlo kernels.

    python3 benchmarks/bench_kernels.py [--samples 20000] [--repeat 3]

Both backends see the same Gaussian draws; the entropies they return are
checked against each other and against numpy.linalg.eigvalsh before timing.
The first numba call (JIT compile or cache load) is timed separately.
"""
import argparse
import time

import numpy as np

from qent import _kernels
from qent.ensemble import complex_gaussian

SIZES = ((2, 2), (4, 4), (8, 8), (4, 16))


def reference_entropy(x):
    w = x @ np.conj(np.swapaxes(x, 1, 2))
    lam = np.linalg.eigvalsh(w)
    p = lam / lam.sum(axis=1, keepdims=True)
    with np.errstate(divide="ignore", invalid="ignore"):
        return -np.where(p > 0, p * np.log(p), 0.0).sum(axis=1)


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t)
    return min(times)


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--samples", type=int, default=20000)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()

    rng = np.random.default_rng(7)
    backends = ["numpy"] + (["numba"] if _kernels.HAVE_NUMBA else [])
    if not _kernels.HAVE_NUMBA:
        print("numba unavailable or disabled; timing the numpy backend only")

    print(f"{'m x n':>7} {'backend':>7} {'first s':>9} {'best s':>9} {'draws/s':>11} {'max |dS|':>10}")
    for m, n in SIZES:
        x = complex_gaussian(rng, (args.samples, m, n))
        ref = reference_entropy(x)
        for b in backends:
            t0 = time.perf_counter()
            _, s, _, _, fails = _kernels.entropy_batch(x, backend=b)
            first = time.perf_counter() - t0
            err = float(np.max(np.abs(s - ref)))
            best = best_of(lambda: _kernels.entropy_batch(x, backend=b), args.repeat)
            print(f"{m:>3}x{n:<3} {b:>7} {first:9.4f} {best:9.4f} {args.samples / best:11.0f} "
                  f"{err:10.2e}" + (f"  failures={fails}" if fails else ""))


if __name__ == "__main__":
    main()
