"""Windowed robust statistics, modified z-score detection, and forecasting.

Detection compares the evaluated window's mean against the trailing
baseline windows' means using the modified z-score
``0.6745 * (x - median) / MAD`` with the conventional 3.5 warn threshold.
The baseline is trailing-only, so nothing leaks from the future. Error-rate
metrics (``eps_in``/``eps_out``) bypass the z-score and use an absolute
errors-per-second threshold instead: a baseline that is already errorful
must not excuse new errors.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .records import KIND_FLOW, KIND_INTERFACE, KIND_OPTICAL, TelemetryError

MODIFIED_Z_SCALE = 0.6745

SEVERITY_WARN = "warn"
SEVERITY_CRITICAL = "critical"
DIRECTION_HIGH = "high"
DIRECTION_LOW = "low"

ERROR_RATE_METRICS = ("eps_in", "eps_out")

# Metrics each database kind is scanned on. Raw cumulative counters are
# excluded: a monotone counter is always "anomalous" against its past.
DETECTION_METRICS = {
    KIND_INTERFACE: ("pps_in", "pps_out", "bps_in", "bps_out", "eps_in", "eps_out"),
    KIND_FLOW: ("bytes", "packets"),
    KIND_OPTICAL: ("tx_power_dbm", "rx_power_dbm"),
}


class DetectError(TelemetryError):
    pass


class EmptyWindow(DetectError):
    pass


class InsufficientBaseline(DetectError):
    pass


class InsufficientHistory(DetectError):
    pass


@dataclass(frozen=True)
class DetectorConfig:
    """Detector thresholds. ``mad_floor`` is a relative floor: the effective
    MAD substitute is ``mad_floor * max(1, |median|)``, so a flat baseline
    still yields finite, scale-free scores."""

    window_s: int = 3600
    baseline_windows: int = 24
    z_warn: float = 3.5
    z_critical: float = 7.0
    mad_floor: float = 1e-9
    error_eps_threshold: float = 1.0

    def __post_init__(self) -> None:
        if not self.z_critical > self.z_warn > 0:
            raise ValueError("need z_critical > z_warn > 0")
        if self.baseline_windows < 3:
            raise ValueError("baseline_windows must be >= 3")
        if self.window_s <= 0 or self.mad_floor <= 0 or self.error_eps_threshold <= 0:
            raise ValueError("window_s, mad_floor, error_eps_threshold must be > 0")


@dataclass(frozen=True)
class WindowStats:
    window_start: int
    window_end: int
    entity_id: str
    metric: str
    count: int
    mean: float
    median: float
    mad: float
    max: float
    min: float

    def __post_init__(self) -> None:
        if self.count < 1:
            raise ValueError("count must be >= 1")
        if self.mad < 0:
            raise ValueError("mad must be >= 0")
        if not self.min <= self.median <= self.max:
            raise ValueError("min <= median <= max violated")


@dataclass(frozen=True)
class AnomalyEvent:
    entity_id: str
    metric: str
    window_start: int
    window_end: int
    observed: float
    score: float
    severity: str
    direction: str

    def is_error_spike(self) -> bool:
        return self.metric in ERROR_RATE_METRICS


def _as_arrays(series) -> tuple[np.ndarray, np.ndarray]:
    if isinstance(series, tuple) and len(series) == 2 and isinstance(series[0], np.ndarray):
        return series[0].astype(np.int64, copy=False), series[1].astype(np.float64, copy=False)
    ts = np.array([p[0] for p in series], dtype=np.int64)
    values = np.array([p[1] for p in series], dtype=np.float64)
    return ts, values


def window_stats(series, window: tuple[int, int], entity_id: str = "", metric: str = "") -> WindowStats:
    """Exact stats (count/mean/median/MAD/min/max) of values in [start, end)."""
    start, end = window
    ts, values = _as_arrays(series)
    mask = (ts >= start) & (ts < end)
    inside = values[mask]
    if inside.size == 0:
        raise EmptyWindow(f"no samples in [{start}, {end})")
    med, mad = kernels.median_mad(inside)
    return WindowStats(
        window_start=start,
        window_end=end,
        entity_id=entity_id,
        metric=metric,
        count=int(inside.size),
        mean=float(inside.mean()),
        median=float(med),
        mad=float(mad),
        max=float(inside.max()),
        min=float(inside.min()),
    )


def modified_zscore(x: float, median: float, mad: float, mad_floor: float) -> float:
    """0.6745 * (x - median) / max(mad, mad_floor). Total for mad_floor > 0."""
    return MODIFIED_Z_SCALE * (x - median) / max(mad, mad_floor)


def effective_mad_floor(cfg: DetectorConfig, median: float) -> float:
    return cfg.mad_floor * max(1.0, abs(median))


def window_means(series, t0: int, window_s: int, n_windows: int) -> tuple[np.ndarray, np.ndarray]:
    """Means and counts of aligned windows [t0 + k*w, t0 + (k+1)*w)."""
    ts, values = _as_arrays(series)
    sums, counts = kernels.window_sums(ts, values, t0, window_s, n_windows)
    means = np.full(n_windows, np.nan)
    nonzero = counts > 0
    means[nonzero] = sums[nonzero] / counts[nonzero]
    return means, counts


def detect(
    series,
    cfg: DetectorConfig,
    eval_window: tuple[int, int],
    entity_id: str = "",
    metric: str = "",
) -> list[AnomalyEvent]:
    """Events for one (entity, metric) series in one evaluation window.

    Rate-style metrics score the eval-window mean against the trailing
    ``baseline_windows`` window means; error-rate metrics fire when the
    eval-window mean reaches ``error_eps_threshold`` errors/s, with the
    score scaled onto the z-threshold axis (threshold -> z_warn) so the
    severity invariant holds for every emitted event.
    """
    start, end = eval_window
    w = cfg.window_s
    ts, values = _as_arrays(series)
    t0 = start - cfg.baseline_windows * w
    means, counts = window_means((ts, values), t0, w, cfg.baseline_windows)
    if (counts == 0).any():
        missing = int((counts == 0).sum())
        raise InsufficientBaseline(
            f"{missing} of {cfg.baseline_windows} baseline windows empty before {start}"
        )
    eval_means, eval_counts = window_means((ts, values), start, end - start, 1)
    if eval_counts[0] == 0:
        return []
    event = _score_window(
        float(eval_means[0]), means, cfg, (start, end), entity_id, metric
    )
    return [event] if event is not None else []


def _score_window(
    eval_mean: float,
    baseline_means: np.ndarray,
    cfg: DetectorConfig,
    window: tuple[int, int],
    entity_id: str,
    metric: str,
) -> AnomalyEvent | None:
    start, end = window
    if metric in ERROR_RATE_METRICS:
        if eval_mean < cfg.error_eps_threshold:
            return None
        score = cfg.z_warn * (eval_mean / cfg.error_eps_threshold)
        return AnomalyEvent(
            entity_id=entity_id,
            metric=metric,
            window_start=start,
            window_end=end,
            observed=eval_mean,
            score=score,
            severity=SEVERITY_CRITICAL if score >= cfg.z_critical else SEVERITY_WARN,
            direction=DIRECTION_HIGH,
        )
    med, mad = kernels.median_mad(baseline_means)
    score = modified_zscore(eval_mean, float(med), float(mad), effective_mad_floor(cfg, float(med)))
    if abs(score) < cfg.z_warn:
        return None
    return AnomalyEvent(
        entity_id=entity_id,
        metric=metric,
        window_start=start,
        window_end=end,
        observed=eval_mean,
        score=score,
        severity=SEVERITY_CRITICAL if abs(score) >= cfg.z_critical else SEVERITY_WARN,
        direction=DIRECTION_HIGH if score > 0 else DIRECTION_LOW,
    )


def detect_series_range(
    series,
    cfg: DetectorConfig,
    end: int,
    n_eval: int,
    entity_id: str = "",
    metric: str = "",
) -> list[AnomalyEvent]:
    """Sweep the ``n_eval`` aligned windows ending at ``end``.

    Same arithmetic as calling :func:`detect` per window (events are
    bit-identical); window means are computed once for the whole span.
    Windows whose trailing baseline is incomplete are skipped, as are empty
    eval windows.
    """
    w = cfg.window_s
    b = cfg.baseline_windows
    ts, values = _as_arrays(series)
    t0 = end - (n_eval + b) * w
    means, counts = window_means((ts, values), t0, w, n_eval + b)
    events: list[AnomalyEvent] = []
    for k in range(n_eval):
        eval_idx = b + k
        if counts[eval_idx] == 0:
            continue
        baseline = means[eval_idx - b : eval_idx]
        if (counts[eval_idx - b : eval_idx] == 0).any():
            continue
        start = t0 + eval_idx * w
        event = _score_window(
            float(means[eval_idx]), baseline, cfg, (start, start + w), entity_id, metric
        )
        if event is not None:
            events.append(event)
    return events


def detect_store(store, cfg: DetectorConfig, eval_window: tuple[int, int]) -> list[AnomalyEvent]:
    """Run :func:`detect` over every entity and detection metric of a store.

    Entities or metrics lacking a full baseline are skipped, not fatal.
    Event order is (entity, metric) lexicographic, so output is deterministic.
    """
    from .store import WindowQuery

    events: list[AnomalyEvent] = []
    baseline_start = eval_window[0] - cfg.baseline_windows * cfg.window_s
    for entity in store.list_entities():
        for metric in DETECTION_METRICS[store.db_kind]:
            series = store.query_window(
                WindowQuery(
                    metric=metric,
                    t_start=baseline_start,
                    t_end=eval_window[1],
                    entity_id=entity,
                )
            )
            try:
                events.extend(detect(series, cfg, eval_window, entity_id=entity, metric=metric))
            except InsufficientBaseline:
                continue
    return events


def detect_store_range(
    store, cfg: DetectorConfig, end: int, n_eval: int
) -> list[AnomalyEvent]:
    """Range sweep of :func:`detect_series_range` over a whole store."""
    from .store import WindowQuery

    events: list[AnomalyEvent] = []
    t0 = end - (n_eval + cfg.baseline_windows) * cfg.window_s
    for entity in store.list_entities():
        for metric in DETECTION_METRICS[store.db_kind]:
            series = store.query_window(
                WindowQuery(metric=metric, t_start=t0, t_end=end, entity_id=entity)
            )
            events.extend(
                detect_series_range(series, cfg, end, n_eval, entity_id=entity, metric=metric)
            )
    return events


def forecast_next(
    series, cfg: DetectorConfig, t_next: int | None = None
) -> tuple[float, float]:
    """Predict the mean of the window starting at ``t_next``.

    Seasonal-naive (the window 24 steps back) once >= 25 consecutive
    history windows exist; otherwise an exponentially weighted mean of the
    window means with weight 0.3 on the newest. The uncertainty is the MAD
    of the last ``baseline_windows`` window means.
    """
    ts, values = _as_arrays(series)
    if ts.size == 0:
        raise InsufficientHistory("empty series")
    w = cfg.window_s
    if t_next is None:
        t_next = (int(ts.max()) // w + 1) * w
    # consecutive nonempty aligned windows immediately before t_next
    span = int(t_next - ts.min())
    max_back = max(span // w + 1, 1)
    t0 = t_next - max_back * w
    means, counts = window_means((ts, values), t0, w, max_back)
    run = 0
    for k in range(max_back - 1, -1, -1):
        if counts[k] == 0:
            break
        run += 1
    if run < 2:
        raise InsufficientHistory(f"{run} complete windows before {t_next}, need >= 2")
    history = means[max_back - run :]
    if run >= 25:
        predicted = float(history[-24])
    else:
        s = float(history[0])
        for x in history[1:]:
            s = 0.3 * float(x) + 0.7 * s
        predicted = s
    tail = history[-min(cfg.baseline_windows, run) :]
    _, mad = kernels.median_mad(np.asarray(tail, dtype=np.float64))
    return predicted, float(mad)
