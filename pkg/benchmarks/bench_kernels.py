"""Benchmark the compiled kernels against the numpy fallback.

Usage: python benchmarks/bench_kernels.py [--n 4000] [--dim 5] [--repeats 3]

Each kernel runs on identical inputs through both backends; the table
reports wall times, speedup, and the largest numerical deviation between
the two results (which should be at rounding level).
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from sca._kernels import _fallback

try:
    from sca._kernels import _core
except ImportError:
    _core = None


def timed(fn, *args, repeats=3):
    best = float("inf")
    result = None
    for _ in range(repeats):
        start = time.perf_counter()
        result = fn(*args)
        best = min(best, time.perf_counter() - start)
    return best, result


def bench_prim(n, dim, repeats, rng):
    points = rng.standard_normal((n, dim))
    core = np.abs(rng.standard_normal(n)) * 0.2
    t_np, (h1, t1, w1) = timed(_fallback.prim_mst, points, core, repeats=repeats)
    t_cy, (h2, t2, w2) = timed(_core.prim_mst, points, core, repeats=repeats)
    deviation = float(np.abs(np.sort(w1) - np.sort(w2)).max())
    return "prim_mst", t_np, t_cy, deviation


def bench_linkage(n, dim, repeats, rng):
    points = rng.standard_normal((n, dim))
    core = np.zeros(n)
    heads, tails, weights = _fallback.prim_mst(points, core)
    order = np.argsort(weights, kind="stable")
    args = (heads[order], tails[order], weights[order], n)
    t_np, a = timed(_fallback.union_find_linkage, *args, repeats=repeats)
    t_cy, b = timed(_core.union_find_linkage, *args, repeats=repeats)
    deviation = float(np.abs(a - b).max())
    return "union_find_linkage", t_np, t_cy, deviation


def bench_layout(n, dim, repeats, rng):
    m = n * 15
    heads = rng.integers(0, n, m)
    tails = rng.integers(0, n, m)
    applied = np.flatnonzero(rng.random(m) < 0.6).astype(np.int64)
    negatives = rng.integers(0, n, (applied.size, 5)).astype(np.int64)
    pos = rng.uniform(-5, 5, (n, 2))

    def run(impl, start):
        out = start.copy()
        for _ in range(10):
            impl.layout_epoch(out, heads, tails, applied, negatives, 0.8, 1.0, 4.0)
        return out

    t_np, a = timed(run, _fallback, pos, repeats=repeats)
    t_cy, b = timed(run, _core, pos, repeats=repeats)
    deviation = float(np.abs(a - b).max())
    return "layout_epoch x10", t_np, t_cy, deviation


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--n", type=int, default=4000)
    parser.add_argument("--dim", type=int, default=5)
    parser.add_argument("--repeats", type=int, default=3)
    args = parser.parse_args()

    if _core is None:
        print("compiled kernels are not built; nothing to compare "
              "(pip install -e . --no-build-isolation)")
        return 1

    rng = np.random.default_rng(0)
    rows = [
        bench_prim(args.n, args.dim, args.repeats, rng),
        bench_linkage(args.n, args.dim, args.repeats, rng),
        bench_layout(args.n, args.dim, args.repeats, rng),
    ]
    print(f"n={args.n}, dim={args.dim}, best of {args.repeats}\n")
    header = f"{'kernel':<20} {'numpy':>10} {'cython':>10} {'speedup':>8} {'max dev':>10}"
    print(header)
    print("-" * len(header))
    for name, t_np, t_cy, deviation in rows:
        print(
            f"{name:<20} {t_np * 1e3:>8.1f}ms {t_cy * 1e3:>8.1f}ms "
            f"{t_np / t_cy:>7.1f}x {deviation:>10.2e}"
        )
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
