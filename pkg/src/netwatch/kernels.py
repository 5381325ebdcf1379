"""Hot numeric kernels: robust statistics, window bucketing, group reductions.

Every kernel has a pure-numpy implementation and, when numba is importable,
an ``@njit``-compiled twin. The compiled path is the default; set
``NETWATCH_DISABLE_NUMBA=1`` to force the numpy path (useful for debugging
and for the benchmark in ``benchmarks/bench_kernels.py``, which compares
both). Both paths accumulate in input order so results agree to float64
rounding; tests pin them together at 1e-12 relative.

All kernels are pure functions over plain numpy arrays. Counter arrays are
float64: integer counters below 2**53 are represented exactly, which covers
realistic interface counters; the scalar conversion in ``rates.py`` stays
exact over the full 64-bit range.
"""

from __future__ import annotations

import os

import numpy as np

NUMBA_DISABLED = os.environ.get("NETWATCH_DISABLE_NUMBA", "").strip().lower() in (
    "1",
    "true",
    "yes",
)

try:
    if NUMBA_DISABLED:
        raise ImportError("disabled via NETWATCH_DISABLE_NUMBA")
    from numba import njit

    HAVE_NUMBA = True
except ImportError:
    HAVE_NUMBA = False

    def njit(*args, **kwargs):
        # identity decorator so the _jit names still exist
        if args and callable(args[0]):
            return args[0]

        def wrap(fn):
            return fn

        return wrap


def median_mad_numpy(values: np.ndarray) -> tuple[float, float]:
    """Exact median and median absolute deviation of a nonempty 1-d array."""
    med = float(np.median(values))
    mad = float(np.median(np.abs(values - med)))
    return med, mad


@njit(cache=True)
def median_mad_jit(values: np.ndarray) -> tuple[float, float]:
    med = np.median(values)
    mad = np.median(np.abs(values - med))
    return med, mad


def window_sums_numpy(
    ts: np.ndarray, values: np.ndarray, t0: int, window_s: int, n_windows: int
) -> tuple[np.ndarray, np.ndarray]:
    """Per-window value sums and counts over aligned windows.

    Window k is [t0 + k*window_s, t0 + (k+1)*window_s); samples outside
    [t0, t0 + n_windows*window_s) are ignored.
    """
    idx = (ts - t0) // window_s
    valid = (idx >= 0) & (idx < n_windows)
    idx = idx[valid].astype(np.int64)
    sums = np.bincount(idx, weights=values[valid], minlength=n_windows)
    counts = np.bincount(idx, minlength=n_windows).astype(np.int64)
    return sums, counts


@njit(cache=True)
def window_sums_jit(ts, values, t0, window_s, n_windows):
    sums = np.zeros(n_windows, dtype=np.float64)
    counts = np.zeros(n_windows, dtype=np.int64)
    for i in range(ts.shape[0]):
        k = (ts[i] - t0) // window_s
        if 0 <= k < n_windows:
            sums[k] += values[i]
            counts[k] += 1
    return sums, counts


def group_stats_numpy(
    group_ids: np.ndarray, values: np.ndarray, n_groups: int
) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Per-group (sum, count, min, max) for int group ids in [0, n_groups)."""
    sums = np.bincount(group_ids, weights=values, minlength=n_groups)
    counts = np.bincount(group_ids, minlength=n_groups).astype(np.int64)
    mins = np.full(n_groups, np.inf)
    maxs = np.full(n_groups, -np.inf)
    np.minimum.at(mins, group_ids, values)
    np.maximum.at(maxs, group_ids, values)
    return sums, counts, mins, maxs


@njit(cache=True)
def group_stats_jit(group_ids, values, n_groups):
    sums = np.zeros(n_groups, dtype=np.float64)
    counts = np.zeros(n_groups, dtype=np.int64)
    mins = np.full(n_groups, np.inf)
    maxs = np.full(n_groups, -np.inf)
    for i in range(group_ids.shape[0]):
        g = group_ids[i]
        v = values[i]
        sums[g] += v
        counts[g] += 1
        if v < mins[g]:
            mins[g] = v
        if v > maxs[g]:
            maxs[g] = v
    return sums, counts, mins, maxs


def counter_rates_numpy(
    ts: np.ndarray, counters: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Rates for consecutive samples of one entity.

    ``ts`` is sorted int64 (n,); ``counters`` is float64 (n, m) of cumulative
    columns. Returns (rates (n-1, m), reset (n-1,) bool). A negative delta in
    any column marks the step as a reset with all-zero rates.
    """
    dt = (ts[1:] - ts[:-1]).astype(np.float64)
    deltas = counters[1:, :] - counters[:-1, :]
    reset = (deltas < 0).any(axis=1)
    rates = deltas / dt[:, None]
    rates[reset, :] = 0.0
    return rates, reset


@njit(cache=True)
def counter_rates_jit(ts, counters):
    n = ts.shape[0] - 1
    m = counters.shape[1]
    rates = np.zeros((n, m), dtype=np.float64)
    reset = np.zeros(n, dtype=np.bool_)
    for i in range(n):
        dt = float(ts[i + 1] - ts[i])
        bad = False
        for j in range(m):
            if counters[i + 1, j] - counters[i, j] < 0:
                bad = True
                break
        if bad:
            reset[i] = True
            continue
        for j in range(m):
            rates[i, j] = (counters[i + 1, j] - counters[i, j]) / dt
    return rates, reset


if HAVE_NUMBA:
    median_mad = median_mad_jit
    window_sums = window_sums_jit
    group_stats = group_stats_jit
    counter_rates = counter_rates_jit
else:
    median_mad = median_mad_numpy
    window_sums = window_sums_numpy
    group_stats = group_stats_numpy
    counter_rates = counter_rates_numpy

ACTIVE_PATH = "numba" if HAVE_NUMBA else "numpy"
