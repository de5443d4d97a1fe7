"""Time the direct pair loop for every available backend and thread count.

Usage::

    python3 benchmarks/bench_pair_loop.py [--sizes 256 1024 4096] [--threads 1 2 4 8]
"""

import argparse

from fracdensity import backend
from fracdensity.bench import run_bench


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sizes", type=int, nargs="+", default=[256, 1024, 4096])
    ap.add_argument("--threads", type=int, nargs="+", default=[1, 2, 4, 8])
    ap.add_argument("--repeats", type=int, default=3)
    ap.add_argument("--dim", type=int, default=1)
    args = ap.parse_args()
    print(f"backends available: {', '.join(backend.available())}")
    print(f"{'backend':>9} {'threads':>7} {'cells':>7} {'seconds':>10} {'Mpairs/s':>10} {'max diff':>9}")
    for b, t, N, sec, rate, diff in run_bench(args.sizes, args.threads, n=args.dim,
                                              repeats=args.repeats):
        print(f"{b:>9} {t:>7} {N:>7} {sec:>10.4g} {rate / 1e6:>10.1f} {diff:>9.1e}")


if __name__ == "__main__":
    main()
