from __future__ import annotations

import math

import numpy as np
import pytest

from netwatch.records import FlowRecord, OpticalSample, TelemetrySample
from netwatch.store import TelemetryStore
from netwatch.topology import TopologyMap

T_START = 1712001600  # hour-aligned
HOUR = 3600


def make_iface(ts=60, iface="booth01-eth0", pkts_in=0, pkts_out=0, octets_in=0,
               octets_out=0, errs_in=0, errs_out=0, speed=10_000_000_000, descr="Booth01-Uplink"):
    return TelemetrySample(
        timestamp=ts, interface_id=iface, pkts_in=pkts_in, pkts_out=pkts_out,
        octets_in=octets_in, octets_out=octets_out, errs_in=errs_in, errs_out=errs_out,
        speed_bps=speed, descr=descr,
    )


def make_flow(start=100, end=160, src="10.0.1.1", dst="10.0.2.1", sport=4000,
              dport=443, proto=6, nbytes=1400, pkts=3):
    return FlowRecord(
        start_ts=start, end_ts=end, src_addr=src, dst_addr=dst, src_port=sport,
        dst_port=dport, proto=proto, bytes=nbytes, packets=pkts,
    )


def make_optical(ts=60, port="opt01", tx=1.5, rx=-2.25):
    return OpticalSample(timestamp=ts, port_id=port, tx_power_dbm=tx, rx_power_dbm=rx)


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


def build_interface_store(hours=26, error_storm_last_hour=True, entities=("booth01-eth0", "booth02-eth0")):
    """Per-minute counters for a few interfaces; optional 2 errs/s storm on
    the first entity during the final hour."""
    gen = np.random.default_rng(99)
    store = TelemetryStore("interface", "interface")
    n = hours * 60
    storm_start = T_START + (hours - 1) * HOUR
    for e_idx, entity in enumerate(entities):
        base = 6000.0 + 500.0 * e_idx
        counters = dict(pkts_in=0, pkts_out=0, octets_in=0, octets_out=0, errs_in=0, errs_out=0)
        for k in range(n):
            ts = T_START + k * 60
            rate = base * (1.0 + 0.05 * math.sin(2 * math.pi * ts / 86400)) * (
                1.0 + 0.01 * float(gen.standard_normal())
            )
            counters["pkts_in"] += int(round(rate * 60))
            counters["pkts_out"] += int(round(rate * 0.8 * 60))
            counters["octets_in"] += int(round(rate * 700 * 60))
            counters["octets_out"] += int(round(rate * 0.8 * 700 * 60))
            if error_storm_last_hour and e_idx == 0 and ts >= storm_start:
                counters["errs_in"] += 120  # 2 errors/s at 60 s cadence
            store.append(make_iface(ts=ts, iface=entity, **counters))
    return store


def build_optical_store(hours=26, drop_last_hour=True, ports=("opt01", "opt02")):
    """300 s cadence optical power; optional -10 dBm rx step on the first
    port during the final hour."""
    gen = np.random.default_rng(77)
    store = TelemetryStore("optical", "optical")
    n = hours * 12
    drop_start = T_START + (hours - 1) * HOUR
    for p_idx, port in enumerate(ports):
        for k in range(n):
            ts = T_START + k * 300
            tx = 1.0 + 0.05 * float(gen.standard_normal())
            rx = -4.0 + 0.05 * float(gen.standard_normal())
            if drop_last_hour and p_idx == 0 and ts >= drop_start:
                rx -= 10.0
            store.append(make_optical(ts=ts, port=port, tx=round(tx, 4), rx=round(rx, 4)))
    return store


def demo_topology() -> TopologyMap:
    return TopologyMap.from_lines(
        [
            "link iface=booth01-eth0 port=opt01",
            "link iface=booth01-eth0 booth=booth01",
            "link iface=booth02-eth0 port=opt02",
            "link iface=booth02-eth0 booth=booth02",
        ]
    )
