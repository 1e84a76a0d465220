"""Wall time of the two-excitation march: numba kernel versus numpy fallback.

    python benchmarks/bench_volterra.py [--steps 200 400 800] [--repeat 3]

The numba column excludes compilation (one warm-up call is made first).
Both kernels must agree to round-off; the script exits non-zero otherwise.
"""
import argparse
import sys
import time

import numpy as np

from duodecay import _accel
from duodecay.volterra import kernel_tables, march


def tables(h, N, J=1.0):
    sig = np.array([1.0, -1.0])
    tabs = [kernel_tables(h, N, s, J) for s in sig]
    return np.array([t[0] for t in tabs]), np.array([t[1] for t in tabs]), sig


def best_of(fn, repeat):
    best = np.inf
    out = None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--steps", type=int, nargs="+", default=[200, 400, 800])
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--g", type=float, default=0.5)
    ap.add_argument("--delta", type=float, default=0.3)
    ap.add_argument("--h", type=float, default=0.05)
    args = ap.parse_args(argv)
    if not _accel.HAVE_NUMBA:
        print("numba unavailable; nothing to compare")
        return 1
    K, Kint, sig = tables(args.h, 8)
    march(K, Kint, sig, args.g, args.delta, args.h, 8, engine="numba")  # compile
    print(f"{'steps':>6} {'numpy [s]':>10} {'numba [s]':>10} {'speedup':>8} {'max |diff|':>11}")
    worst = 0.0
    for N in args.steps:
        K, Kint, sig = tables(args.h, N)
        tn, a = best_of(lambda: march(K, Kint, sig, args.g, args.delta, args.h, N, engine="numpy"), args.repeat)
        tb, b = best_of(lambda: march(K, Kint, sig, args.g, args.delta, args.h, N, engine="numba"), args.repeat)
        diff = max(np.abs(a[0] - b[0]).max(), np.abs(a[1] - b[1]).max())
        worst = max(worst, diff)
        print(f"{N:>6} {tn:>10.3f} {tb:>10.3f} {tn / tb:>8.2f} {diff:>11.2e}")
    return 0 if worst < 1e-12 else 2


if __name__ == "__main__":
    sys.exit(main())
