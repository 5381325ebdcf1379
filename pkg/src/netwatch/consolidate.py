"""Consolidation of rate streams into a bounded number of window buckets.

Buckets are aligned fixed windows (epoch-aligned, half-open). When the
bucket count for the requested window would exceed the budget, the window is
doubled until it fits; each doubling at most halves the count, so the result
lands in (budget/2, budget] whenever the input exceeded the budget.
"""

from __future__ import annotations

from collections import defaultdict

import numpy as np

from . import kernels
from .records import RATE_METRICS, ConsolidatedBucket, RateSample, TelemetryError


class UnsortedInput(TelemetryError):
    """Rate stream was not ordered by timestamp within an entity."""


class BudgetInfeasible(TelemetryError):
    """budget < number of distinct entities; one bucket per entity is the floor."""


def consolidate(
    rates: list[RateSample], window_s: int, budget: int
) -> list[ConsolidatedBucket]:
    """Aggregate a per-entity-ordered rate stream into aligned window buckets.

    Returns buckets sorted by (bucket_start, entity_id), one per
    (entity, window) pair, carrying sum/mean/max/min/count for each rate
    metric. Sums are conserved: per entity and metric the bucket sums add up
    to the raw stream's sum.
    """
    if window_s <= 0:
        raise ValueError(f"window_s={window_s} must be > 0")
    by_entity: dict[str, list[RateSample]] = defaultdict(list)
    last_ts: dict[str, int] = {}
    for sample in rates:
        prev = last_ts.get(sample.interface_id)
        if prev is not None and sample.timestamp < prev:
            raise UnsortedInput(
                f"{sample.interface_id}: timestamp {sample.timestamp} after {prev}"
            )
        last_ts[sample.interface_id] = sample.timestamp
        by_entity[sample.interface_id].append(sample)

    if not by_entity:
        return []
    if budget < len(by_entity):
        raise BudgetInfeasible(f"budget={budget} < {len(by_entity)} entities")

    arrays = {}
    for entity, samples in by_entity.items():
        ts = np.array([s.timestamp for s in samples], dtype=np.int64)
        cols = np.array(
            [[getattr(s, m) for m in RATE_METRICS] for s in samples], dtype=np.float64
        )
        arrays[entity] = (ts, cols)

    w = int(window_s)
    while _bucket_count(arrays, w) > budget:
        w *= 2

    buckets: list[ConsolidatedBucket] = []
    for entity, (ts, cols) in arrays.items():
        window_idx = ts // w
        starts, inverse = np.unique(window_idx, return_inverse=True)
        n_groups = len(starts)
        per_metric = {}
        for j, metric in enumerate(RATE_METRICS):
            sums, counts, mins, maxs = kernels.group_stats(
                inverse.astype(np.int64), np.ascontiguousarray(cols[:, j]), n_groups
            )
            per_metric[metric] = (sums, counts, mins, maxs)
        counts = per_metric[RATE_METRICS[0]][1]
        for g in range(n_groups):
            buckets.append(
                ConsolidatedBucket(
                    bucket_start=int(starts[g]) * w,
                    entity_id=entity,
                    window_s=w,
                    count=int(counts[g]),
                    sums={m: float(per_metric[m][0][g]) for m in RATE_METRICS},
                    means={m: float(per_metric[m][0][g] / counts[g]) for m in RATE_METRICS},
                    mins={m: float(per_metric[m][2][g]) for m in RATE_METRICS},
                    maxs={m: float(per_metric[m][3][g]) for m in RATE_METRICS},
                )
            )
    buckets.sort(key=lambda b: (b.bucket_start, b.entity_id))
    return buckets


def _bucket_count(arrays: dict[str, tuple[np.ndarray, np.ndarray]], w: int) -> int:
    total = 0
    for ts, _ in arrays.values():
        total += len(np.unique(ts // w))
    return total
