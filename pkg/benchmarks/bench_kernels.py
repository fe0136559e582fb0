"""Time the numba kernels against their numpy fallbacks.

Run with ``python3 benchmarks/bench_kernels.py``.  The first numba call of
each kernel is excluded so compilation does not count.
"""

import argparse
import timeit

import numpy as np

from mpicsel import _kernels as K


def _cases(rng, n, p):
    S = rng.standard_normal((n, p))
    sigma = S.T @ S / n
    floor = np.full(p, 1e-24)
    Y = rng.standard_normal((n, p))
    return {
        "cholesky_lower": ((sigma, floor), K.cholesky_lower_numba, K.cholesky_lower_numpy),
        "ar1_filter": ((Y, 0.6), K.ar1_filter_numba, K.ar1_filter_numpy),
        "lag1_sums": ((Y,), K.lag1_sums_numba, K.lag1_sums_numpy),
    }


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=2000)
    ap.add_argument("--p", type=int, default=50)
    ap.add_argument("--number", type=int, default=200)
    args = ap.parse_args(argv)
    if not K.HAVE_NUMBA:
        print("numba is not importable; only the numpy path is available")
        return
    rng = np.random.default_rng(0)
    print(f"n={args.n} p={args.p} calls={args.number}")
    print(f"{'kernel':<16}{'numba us':>12}{'numpy us':>12}{'speedup':>10}")
    for name, (call_args, fast, slow) in _cases(rng, args.n, args.p).items():
        fast(*call_args)  # compile
        t_fast = min(timeit.repeat(lambda: fast(*call_args), number=args.number, repeat=3))
        t_slow = min(timeit.repeat(lambda: slow(*call_args), number=args.number, repeat=3))
        us = 1e6 / args.number
        print(f"{name:<16}{t_fast * us:>12.1f}{t_slow * us:>12.1f}{t_slow / t_fast:>10.2f}")


if __name__ == "__main__":
    main()
