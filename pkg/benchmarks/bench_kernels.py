"""Time the compiled and numpy scoring kernels on the same ensembles.

    python3 benchmarks/bench_kernels.py [--sizes 10000 50000 100000] [--M 50]

Prints one row per (kernel, n) with the best-of-repeats wall time for each
backend and the speed-up of the compiled one.
"""

import argparse
import time

import numpy as np

from hdlse import _fallback

try:
    from hdlse import _kernels
except ImportError:  # pragma: no cover
    _kernels = None


def best_of(fn, repeats):
    fn()
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sizes", type=int, nargs="+", default=[10_000, 50_000, 100_000])
    ap.add_argument("--M", type=int, default=50)
    ap.add_argument("--repeats", type=int, default=5)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)

    if _kernels is None:
        print("compiled extension not built; only the numpy backend is available")
    rng = np.random.default_rng(args.seed)
    print(f"{'kernel':<16}{'n':>9}{'numpy [ms]':>13}{'cython [ms]':>13}{'speed-up':>10}")
    for n in args.sizes:
        passes = rng.normal(size=(args.M, n))
        mu = passes.mean(axis=0)
        cases = {
            "explicit_counts": lambda b: b.explicit_counts(passes, 0.3),
            "implicit_q": lambda b: b.implicit_q(passes, mu, 0.9),
            "implicit_scores": lambda b: b.implicit_scores(passes, mu, 0.9),
        }
        for name, call in cases.items():
            t_py = best_of(lambda: call(_fallback), args.repeats)
            if _kernels is None:
                print(f"{name:<16}{n:>9}{1e3 * t_py:>13.2f}{'-':>13}{'-':>10}")
                continue
            t_cy = best_of(lambda: call(_kernels), args.repeats)
            print(f"{name:<16}{n:>9}{1e3 * t_py:>13.2f}{1e3 * t_cy:>13.2f}{t_py / t_cy:>9.1f}x")


if __name__ == "__main__":
    main()
