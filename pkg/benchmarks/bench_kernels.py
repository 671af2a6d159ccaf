"""Compare the compiled and pure-Python kernels.

Usage: ``python3 benchmarks/bench_kernels.py [--repeat R]``.  Prints the
best wall time per kernel and backend and the speed-up; also checks that
both backends agree.
"""
from __future__ import annotations

import argparse
import time

import numpy as np

from simulwave import _backend
from simulwave.numerics import JACOBI_SWEEPS, JACOBI_TOL


def best_of(fn, repeat):
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def cases(rng):
    def spd(n):
        a = rng.standard_normal((n, n))
        return a @ a.T / n + np.eye(n)

    a64, a128 = spd(64), spd(128)
    rect = rng.standard_normal((60, 120))
    n = 2047
    d = 2.0 + rng.random(n)
    e = -0.5 * rng.random(n - 1)
    return [
        ("jacobi_eigh 64", lambda k: k.jacobi_eigh(a64.copy(), JACOBI_TOL, JACOBI_SWEEPS)[0]),
        ("jacobi_eigh 128", lambda k: k.jacobi_eigh(a128.copy(), JACOBI_TOL, JACOBI_SWEEPS)[0]),
        ("jacobi_svd 60x120", lambda k: k.jacobi_svd(rect.copy(), JACOBI_TOL, JACOBI_SWEEPS)[0]),
        ("sturm 2047, 10 lowest", lambda k: k.tridiag_lowest(d, e, 10)),
    ]


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--repeat", type=int, default=3)
    args = p.parse_args(argv)
    backends = _backend.available()
    print(f"backends: {', '.join(backends)}")
    for name, fn in cases(np.random.default_rng(0)):
        times, outs = {}, {}
        for b in backends:
            k = _backend.get(b)
            times[b], outs[b] = best_of(lambda: fn(k), args.repeat)
        row = "  ".join(f"{b}={times[b] * 1e3:9.2f} ms" for b in backends)
        if len(backends) == 2:
            a, b = (np.sort(np.asarray(o)) for o in outs.values())
            agree = np.max(np.abs(a - b)) / max(np.max(np.abs(a)), 1e-300)
            row += f"  speed-up={times['python'] / times['compiled']:7.1f}x  rel diff={agree:.1e}"
        print(f"{name:24s} {row}")


if __name__ == "__main__":
    main()
