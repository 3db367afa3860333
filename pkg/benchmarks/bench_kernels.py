"""Benchmark the numba kernels against their pure-numpy fallbacks.

Run: python benchmarks/bench_kernels.py [--repeats N]
The same comparison is what SURREVAL_NUMBA=0 switches at import time.
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from surreval import _kernels


def timed(fn, repeats, warmup=2):
    for _ in range(warmup):
        fn()
    times = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def bench_tree_growth(repeats):
    rng = np.random.default_rng(0)
    n, d = 20_000, 64
    x = rng.normal(size=(n, d))
    grad = x[:, 0] - np.abs(x[:, 1]) + 0.3 * rng.normal(size=n)
    binned = np.clip(x * 8 + 32, 0, 63).astype(np.uint8)
    rows = np.arange(n, dtype=np.int64)
    args = (binned, grad, rows, 5, 1, 64)
    t_np = timed(lambda: _kernels._grow_tree_numpy(*args), repeats)
    t_nb = timed(lambda: _kernels._grow_tree_numba(*args), repeats) if _kernels.HAS_NUMBA else None
    return "tree growth (20k x 64)", t_np, t_nb


def bench_forest_predict(repeats):
    rng = np.random.default_rng(1)
    n, d, trees, depth = 50_000, 32, 100, 4
    n_nodes = 2 ** (depth + 1) - 1
    x = rng.normal(size=(n, d))
    feat = rng.integers(0, d, (trees, n_nodes)).astype(np.int32)
    feat[:, n_nodes // 2 :] = -1
    thr = rng.normal(size=(trees, n_nodes))
    value = rng.normal(size=(trees, n_nodes))
    out = np.empty(n)
    t_np = timed(lambda: _kernels._predict_forest_raw_numpy(x, feat, thr, value, 0.1, 0.0, out), repeats)
    t_nb = (
        timed(lambda: _kernels._predict_forest_raw_numba(x, feat, thr, value, 0.1, 0.0, out), repeats)
        if _kernels.HAS_NUMBA
        else None
    )
    return "forest predict (50k rows, 100 trees)", t_np, t_nb


def bench_slot_sim(repeats):
    rng = np.random.default_rng(2)
    n_stocks, n_days = 500, 120
    open_eff = 20.0 * np.exp(np.cumsum(0.01 * rng.normal(size=(n_stocks, n_days)), axis=1))
    limit_up = rng.random((n_stocks, n_days)) < 0.02
    limit_down = rng.random((n_stocks, n_days)) < 0.02
    decisions = rng.integers(0, 3, (n_stocks, n_days))
    starts = np.arange(11, 100, dtype=np.int64)
    args = (open_eff, limit_up, limit_down, decisions, starts, 10, 100.0)
    t_np = timed(lambda: _kernels._simulate_slots_numpy(*args), repeats)
    t_nb = (
        timed(
            lambda: _kernels._simulate_slots_numba(
                open_eff, limit_up.astype(np.bool_), limit_down.astype(np.bool_),
                decisions.astype(np.int64), starts, 10, 100.0,
            ),
            repeats,
        )
        if _kernels.HAS_NUMBA
        else None
    )
    return "slot simulation (500 stocks x 89 starts)", t_np, t_nb


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--repeats", type=int, default=5)
    args = parser.parse_args()
    print(f"numba available: {_kernels.HAS_NUMBA} (flag SURREVAL_NUMBA controls dispatch)")
    print(f"{'kernel':<42} {'numpy':>10} {'numba':>10} {'speedup':>9}")
    for bench in (bench_tree_growth, bench_forest_predict, bench_slot_sim):
        name, t_np, t_nb = bench(args.repeats)
        if t_nb is None:
            print(f"{name:<42} {t_np * 1e3:>8.1f}ms {'n/a':>10} {'n/a':>9}")
        else:
            print(f"{name:<42} {t_np * 1e3:>8.1f}ms {t_nb * 1e3:>8.1f}ms {t_np / t_nb:>8.1f}x")


if __name__ == "__main__":
    main()
