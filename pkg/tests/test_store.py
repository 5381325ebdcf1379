from __future__ import annotations

import numpy as np
import pytest

from netwatch.rates import counters_to_rate
from netwatch.store import (
    CorruptFile,
    KindMismatch,
    TelemetryStore,
    UnknownEntity,
    UnknownMetric,
    VersionMismatch,
    WindowQuery,
)

from conftest import make_flow, make_iface, make_optical


def linear_scan_oracle(points, t_start, t_end):
    """Reference result: filter then sort, nothing shared with the store."""
    hits = [(ts, v, e) for ts, v, e in points if t_start <= ts < t_end]
    hits.sort(key=lambda p: (p[0], p[2]))
    return [(ts, v) for ts, v, _ in hits]


def build_random_optical_store(rng, n=500):
    store = TelemetryStore("optical", "optical-main")
    points = []
    order = list(range(n))
    rng.shuffle(order)
    for i in order:  # appends arrive out of order on purpose
        ts = 1000 + i * 13
        port = f"opt{i % 7:02d}"
        rx = float(np.round(rng.uniform(-10, 0), 6))
        store.append(make_optical(ts=ts, port=port, rx=rx))
        points.append((ts, rx, port))
    return store, points


def test_append_counts_and_kind_mismatch():
    store = TelemetryStore("interface", "iface-main")
    assert store.record_count == 0
    store.append(make_iface())
    assert store.record_count == 1
    with pytest.raises(KindMismatch):
        store.append(make_flow())
    assert store.record_count == 1


def test_empty_store_queries():
    store = TelemetryStore("interface")
    assert store.list_entities() == []
    assert store.query_window(WindowQuery(metric="pkts_in", t_start=0, t_end=10**10)) == []
    assert store.time_coverage() is None


def test_window_bounds_are_half_open():
    store = TelemetryStore("optical")
    store.append(make_optical(ts=100, rx=-3.0))
    q = lambda a, b: store.query_window(WindowQuery(metric="rx_power_dbm", t_start=a, t_end=b))
    assert q(100, 101) == [(100, -3.0)]
    assert q(50, 100) == []
    assert q(100, 200) == [(100, -3.0)]


def test_list_entities_dedup_sorted():
    store = TelemetryStore("interface")
    for name in ("b", "a", "a"):
        store.append(make_iface(iface=name))
    assert store.list_entities() == ["a", "b"]


def test_random_windows_match_linear_scan(rng):
    store, points = build_random_optical_store(rng)
    for _ in range(50):
        a = int(rng.integers(900, 8000))
        b = a + int(rng.integers(1, 4000))
        got = store.query_window(WindowQuery(metric="rx_power_dbm", t_start=a, t_end=b))
        assert got == linear_scan_oracle(points, a, b)
    # entity-filtered windows
    for port in ("opt00", "opt03"):
        got = store.query_window(
            WindowQuery(metric="rx_power_dbm", t_start=900, t_end=9000, entity_id=port)
        )
        want = linear_scan_oracle([p for p in points if p[2] == port], 900, 9000)
        assert got == want


def test_unknown_metric_and_entity():
    store = TelemetryStore("optical")
    store.append(make_optical())
    with pytest.raises(UnknownMetric):
        store.query_window(WindowQuery(metric="pps_in", t_start=0, t_end=10))
    with pytest.raises(UnknownEntity):
        store.query_window(
            WindowQuery(metric="rx_power_dbm", t_start=0, t_end=10, entity_id="nope")
        )
    # known entity with empty window is an empty result, not an error
    assert store.query_window(
        WindowQuery(metric="rx_power_dbm", t_start=1, t_end=2, entity_id="opt01")
    ) == []


def test_derived_rate_metrics_match_scalar_conversion(rng):
    store = TelemetryStore("interface")
    samples = []
    counters = dict(pkts_in=0, octets_in=0)
    for i in range(100):
        counters["pkts_in"] += int(rng.integers(0, 10**5))
        counters["octets_in"] += int(rng.integers(0, 10**7))
        samples.append(make_iface(ts=60 + i * 60, **counters))
    for s in samples:
        store.append(s)
    got = store.query_window(
        WindowQuery(metric="pps_in", t_start=0, t_end=10**10, entity_id="booth01-eth0")
    )
    want = [
        (samples[i + 1].timestamp, counters_to_rate(samples[i], samples[i + 1]).pps_in)
        for i in range(99)
    ]
    assert got == want


def test_resample_mean_conservation(rng):
    store, points = build_random_optical_store(rng, n=300)
    t_start, t_end = 1000, 1000 + 300 * 13
    raw = store.query_window(WindowQuery(metric="rx_power_dbm", t_start=t_start, t_end=t_end))
    stepped = store.query_window(
        WindowQuery(metric="rx_power_dbm", t_start=t_start, t_end=t_end, step_s=120)
    )
    # count-weighted mean of the resampled values equals the raw mean
    weights = []
    for ts, _ in stepped:
        n_in = sum(1 for rts, _ in raw if ts <= rts < ts + 120)
        weights.append(n_in)
    weighted = sum(v * w for (_, v), w in zip(stepped, weights)) / sum(weights)
    raw_mean = sum(v for _, v in raw) / len(raw)
    assert weighted == pytest.approx(raw_mean, rel=1e-9)


def test_persist_open_roundtrip(tmp_path, rng):
    store, points = build_random_optical_store(rng)
    path = str(tmp_path / "optical.nwts")
    store.persist(path)
    reopened = TelemetryStore.open(path)
    assert reopened.db_kind == "optical"
    assert reopened.record_count == store.record_count
    assert reopened.list_entities() == store.list_entities()
    for _ in range(20):
        a = int(rng.integers(900, 8000))
        b = a + int(rng.integers(1, 4000))
        q = WindowQuery(metric="rx_power_dbm", t_start=a, t_end=b)
        assert reopened.query_window(q) == store.query_window(q)


def test_persist_empty_store(tmp_path):
    store = TelemetryStore("flow", "flows")
    path = str(tmp_path / "flow.nwts")
    store.persist(path)
    reopened = TelemetryStore.open(path)
    assert reopened.record_count == 0
    assert reopened.db_kind == "flow"


def test_corrupt_file_detected(tmp_path):
    store = TelemetryStore("optical")
    store.append(make_optical())
    path = str(tmp_path / "optical.nwts")
    store.persist(path)
    blob = bytearray(open(path, "rb").read())
    blob[10] ^= 0xFF
    open(path, "wb").write(bytes(blob))
    with pytest.raises(CorruptFile):
        TelemetryStore.open(path)


def test_version_mismatch_detected(tmp_path):
    store = TelemetryStore("optical")
    path = str(tmp_path / "optical.nwts")
    store.persist(path)
    blob = bytearray(open(path, "rb").read())
    blob[4] = 99
    open(path, "wb").write(bytes(blob))
    with pytest.raises(VersionMismatch):
        TelemetryStore.open(path)


def test_bad_magic_detected(tmp_path):
    path = str(tmp_path / "junk.nwts")
    open(path, "wb").write(b"JUNKXXXXXXXXXXXX")
    with pytest.raises(CorruptFile):
        TelemetryStore.open(path)


def test_flow_entity_is_conversation_pair():
    store = TelemetryStore("flow")
    store.append(make_flow(src="10.0.1.1", dst="10.0.2.1"))
    assert store.list_entities() == ["10.0.1.1->10.0.2.1"]
    got = store.query_window(WindowQuery(metric="bytes", t_start=0, t_end=10**10))
    assert got == [(160, 1400.0)]
