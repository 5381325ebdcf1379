"""Benchmark the numba-compiled kernels against the pure-numpy fallback.

Run from the repo root::

    python benchmarks/bench_kernels.py

The same kernels power window statistics, consolidation group-bys, and
counter-to-rate conversion; this script times both implementations on
fixture-sized and 10x-sized inputs. Set NETWATCH_DISABLE_NUMBA=1 to confirm
the package itself falls back cleanly (the benchmark always imports both
paths explicitly).
"""

from __future__ import annotations

import time

import numpy as np

from netwatch import kernels


def timeit(fn, *args, repeat=5, warmup=2):
    for _ in range(warmup):
        fn(*args)
    best = float("inf")
    for _ in range(repeat):
        start = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - start)
    return best


def row(name, numpy_s, jit_s):
    speedup = numpy_s / jit_s if jit_s > 0 else float("inf")
    print(f"{name:<28} numpy {numpy_s * 1e3:9.3f} ms   numba {jit_s * 1e3:9.3f} ms   x{speedup:5.1f}")


def main():
    if not kernels.HAVE_NUMBA:
        print("numba unavailable or disabled; benchmarking the numpy path against itself")
    rng = np.random.default_rng(7)

    for n in (216_000, 2_160_000):
        print(f"\n--- n = {n:,} samples ---")
        values = rng.normal(100.0, 12.0, size=n)
        ts = np.sort(rng.integers(0, 3 * 86400, size=n)).astype(np.int64)
        groups = rng.integers(0, 4000, size=n).astype(np.int64)
        # counter_rates requires strictly increasing poll timestamps
        poll_ts = np.arange(n, dtype=np.int64) * 60 + 60
        counters = np.cumsum(rng.integers(0, 10_000, size=(n, 6)), axis=0).astype(np.float64)

        row(
            "median_mad",
            timeit(kernels.median_mad_numpy, values),
            timeit(kernels.median_mad_jit, values),
        )
        row(
            "window_sums (72 windows)",
            timeit(kernels.window_sums_numpy, ts, values, 0, 3600, 72),
            timeit(kernels.window_sums_jit, ts, values, 0, 3600, 72),
        )
        row(
            "group_stats (4k groups)",
            timeit(kernels.group_stats_numpy, groups, values, 4000),
            timeit(kernels.group_stats_jit, groups, values, 4000),
        )
        row(
            "counter_rates (6 cols)",
            timeit(kernels.counter_rates_numpy, poll_ts, counters),
            timeit(kernels.counter_rates_jit, poll_ts, counters),
        )


if __name__ == "__main__":
    main()
