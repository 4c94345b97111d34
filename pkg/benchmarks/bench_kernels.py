"""Benchmark the numba and numpy kernels of the truncated Taylor arithmetic.

Run with ``python3 benchmarks/bench_kernels.py [--points N] [--repeat R]``.
Each kernel is timed on the same random series for a few (nvars, order)
shapes; the first numba call (compilation) is excluded.  The two results
are also compared, so a speedup never hides a disagreement.
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from lcx import _kernels
from lcx.core.series import algebra

SHAPES = ((1, 6), (1, 12), (2, 6), (3, 4))


def _series(alg, npts, rng, positive=False):
    a = rng.normal(size=(alg.size, npts)) * 0.3
    a[0] = rng.uniform(0.5, 1.5, size=npts) if positive else rng.uniform(-0.7, 0.7, size=npts)
    return a


def _time(fn, repeat):
    best = float("inf")
    for _ in range(repeat):
        t = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t)
    return best


def run(npts: int, repeat: int, seed: int = 0) -> list[dict]:
    if _kernels.NUMBA_KERNELS is None:
        raise SystemExit("numba is not installed; nothing to compare")
    rng = np.random.default_rng(seed)
    rows = []
    for nvars, order in SHAPES:
        alg = algebra(nvars, order)
        a = _series(alg, npts, rng)
        b = _series(alg, npts, rng, positive=True)
        calls = {
            "mul": lambda k: k.mul(a, b, alg.ptr, alg.left, alg.right),
            "div": lambda k: k.div(a, b, alg.ptr, alg.left, alg.right),
            "exp": lambda k: k.exp(a, alg.ptr, alg.left, alg.right, alg.deg),
            "tan": lambda k: k.tan(a, alg.ptr, alg.left, alg.right, alg.deg),
            "atan": lambda k: k.atan(a, alg.ptr, alg.left, alg.right, alg.deg),
        }
        for name, call in calls.items():
            ref = call(_kernels.NUMPY_KERNELS)
            got = call(_kernels.NUMBA_KERNELS)  # compiles on first use
            diff = float(np.max(np.abs(ref - got)) / max(1.0, np.max(np.abs(ref))))
            t_np = _time(lambda: call(_kernels.NUMPY_KERNELS), repeat)
            t_nb = _time(lambda: call(_kernels.NUMBA_KERNELS), repeat)
            rows.append(dict(kernel=name, nvars=nvars, order=order, coefs=alg.size,
                             numpy=t_np, numba=t_nb, speedup=t_np / t_nb, rel_diff=diff))
    return rows


def main(argv=None) -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--points", type=int, default=4096)
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)
    rows = run(args.points, args.repeat, args.seed)
    print(f"{'kernel':6} {'d':>2} {'r':>3} {'coefs':>5} {'numpy ms':>10} {'numba ms':>10} {'speedup':>8} {'rel diff':>9}")
    for r in rows:
        print(f"{r['kernel']:6} {r['nvars']:2d} {r['order']:3d} {r['coefs']:5d} {1e3 * r['numpy']:10.3f} "
              f"{1e3 * r['numba']:10.3f} {r['speedup']:8.1f} {r['rel_diff']:9.1e}")


if __name__ == "__main__":
    main()
