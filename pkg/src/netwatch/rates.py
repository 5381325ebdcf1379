"""Counter-to-rate conversion with wrap/reset handling.

A cumulative counter that goes backwards (64-bit wrap or a device restart)
cannot be told apart from a wrap at normal polling cadences, so any
negative delta yields a reset-marked sample with all rates zeroed rather
than a guessed wrap correction.
"""

from __future__ import annotations

import numpy as np

from . import kernels
from .records import RateSample, TelemetrySample, TelemetryError

COUNTER_COLUMNS = ("pkts_in", "pkts_out", "octets_in", "octets_out", "errs_in", "errs_out")


class NonMonotonicTime(TelemetryError):
    """curr.timestamp <= prev.timestamp."""


class MismatchedEntity(TelemetryError):
    """Rate conversion across two different interfaces."""


def counters_to_rate(prev: TelemetrySample, curr: TelemetrySample) -> RateSample:
    """Per-second rates between two consecutive polls of one interface.

    Exact over the full unsigned 64-bit counter range. Byte counters are
    converted to bits/s (octets * 8 / interval).
    """
    if curr.interface_id != prev.interface_id:
        raise MismatchedEntity(f"{prev.interface_id!r} vs {curr.interface_id!r}")
    if curr.timestamp <= prev.timestamp:
        raise NonMonotonicTime(f"{curr.timestamp} <= {prev.timestamp}")
    interval = curr.timestamp - prev.timestamp
    deltas = {name: getattr(curr, name) - getattr(prev, name) for name in COUNTER_COLUMNS}
    if any(d < 0 for d in deltas.values()):
        return RateSample(
            timestamp=curr.timestamp,
            interface_id=curr.interface_id,
            pps_in=0.0,
            pps_out=0.0,
            bps_in=0.0,
            bps_out=0.0,
            eps_in=0.0,
            eps_out=0.0,
            interval_s=float(interval),
            reset=True,
        )
    return RateSample(
        timestamp=curr.timestamp,
        interface_id=curr.interface_id,
        pps_in=deltas["pkts_in"] / interval,
        pps_out=deltas["pkts_out"] / interval,
        bps_in=deltas["octets_in"] * 8 / interval,
        bps_out=deltas["octets_out"] * 8 / interval,
        eps_in=deltas["errs_in"] / interval,
        eps_out=deltas["errs_out"] / interval,
        interval_s=float(interval),
        reset=False,
    )


def rate_series(samples: list[TelemetrySample]) -> list[RateSample]:
    """Rates for a time-sorted, single-interface sample list (kernel path).

    Columns are carried as float64, so counters below 2**53 convert exactly;
    use :func:`counters_to_rate` when full 64-bit exactness matters.
    """
    if len(samples) < 2:
        return []
    deduped = []
    last_ts = None
    for s in samples:  # duplicate poll timestamps would make zero-length intervals
        if s.timestamp != last_ts:
            deduped.append(s)
            last_ts = s.timestamp
    samples = deduped
    if len(samples) < 2:
        return []
    ts = np.array([s.timestamp for s in samples], dtype=np.int64)
    counters = np.array(
        [[float(getattr(s, c)) for c in COUNTER_COLUMNS] for s in samples], dtype=np.float64
    )
    rates, reset = kernels.counter_rates(ts, counters)
    out = []
    iface = samples[0].interface_id
    for i in range(len(samples) - 1):
        out.append(
            RateSample(
                timestamp=int(ts[i + 1]),
                interface_id=iface,
                pps_in=float(rates[i, 0]),
                pps_out=float(rates[i, 1]),
                bps_in=float(rates[i, 2]) * 8,
                bps_out=float(rates[i, 3]) * 8,
                eps_in=float(rates[i, 4]),
                eps_out=float(rates[i, 5]),
                interval_s=float(ts[i + 1] - ts[i]),
                reset=bool(reset[i]),
            )
        )
    return out
