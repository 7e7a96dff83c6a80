"""Wall-clock comparison of the numba and numpy kernel backends.

    python benchmarks/bench_kernels.py [--repeat 5] [--size 1000000]

The first numba call (JIT compile or cache load) is timed separately.
"""
import argparse
import time

import numpy as np

from urllc_lab import _kernels


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--size", type=int, default=1_000_000)
    ap.add_argument("--branches", type=int, default=4)
    args = ap.parse_args()

    rng = np.random.default_rng(0)
    gaps = rng.exponential(0.5, args.size)
    w = rng.standard_normal((2, args.size, args.branches)) * np.sqrt(0.5)
    corr = 0.5 ** np.abs(np.subtract.outer(np.arange(args.branches), np.arange(args.branches)))
    chol = np.linalg.cholesky(corr)

    cases = {
        "lindley_sojourn": lambda b: _kernels.lindley_sojourn(gaps, 0.4, b),
        "mrc_combined_gain": lambda b: _kernels.mrc_combined_gain(w[0], w[1], chol, b),
    }
    backends = ["numpy"] + (["numba"] if _kernels.HAVE_NUMBA else [])
    print(f"size={args.size} branches={args.branches} repeat={args.repeat}")
    print(f"{'kernel':20s} {'backend':8s} {'first (s)':>10s} {'best (s)':>10s} {'speedup':>8s}")
    for name, fn in cases.items():
        base = None
        ref = fn("numpy")
        for b in backends:
            t0 = time.perf_counter()
            out = fn(b)
            first = time.perf_counter() - t0
            err = np.max(np.abs(out - ref) / np.maximum(np.abs(ref), 1e-300))
            if err > 1e-9:
                raise SystemExit(f"{name}: backends disagree (max rel err {err:.3g})")
            best = best_of(lambda: fn(b), args.repeat)
            base = base or best
            print(f"{name:20s} {b:8s} {first:10.4f} {best:10.4f} {base / best:8.2f}x")


if __name__ == "__main__":
    main()
