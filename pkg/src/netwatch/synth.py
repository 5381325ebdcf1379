"""Synthetic conference-network datasets with injectable ground-truth faults.

Traffic per interface follows a diurnal sinusoid (24 h period) times a
weekday factor plus seeded noise; optical power per port is stable with
small noise. Fault scenarios are superimposed on the clean signals after
generation, so the manifest's ground-truth windows are exact.

Interface samples outnumber optical samples roughly 21:1 (a quarter of the
interfaces carry an optical port, polled at a fifth of the cadence), the
ratio observed on real conference telemetry.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import asdict, dataclass

import numpy as np

from .lineformat import format_record
from .records import FlowRecord, OpticalSample, TelemetrySample, TelemetryError

FAULT_KINDS = ("optical_degradation", "error_storm", "traffic_flood", "interface_flap")

DEFAULT_START_TS = 1712001600  # hour-aligned
WEEKDAY_FACTORS = (1.0, 1.02, 1.04, 1.03, 1.0, 0.9, 0.85)
DIURNAL_AMPLITUDE = 0.2
NOISE_SIGMA = 0.02
OPTICAL_NOISE_DB = 0.05
OPTICAL_PORT_FRACTION = 0.24
OPTICAL_CADENCE_FACTOR = 5
FLOW_CADENCE_FACTOR = 5
FLOW_PAIRS = 10


class ScenarioTargetMissing(TelemetryError):
    pass


@dataclass(frozen=True)
class FaultScenario:
    kind: str
    target: str
    onset_ts: int
    duration_s: int
    magnitude: float

    def __post_init__(self) -> None:
        if self.kind not in FAULT_KINDS:
            raise ValueError(f"unknown fault kind {self.kind!r}")
        if self.duration_s <= 0:
            raise ValueError("duration_s must be > 0")
        if self.magnitude <= 0:
            raise ValueError("magnitude must be > 0")


def iface_name(i: int) -> str:
    return f"booth{i + 1:02d}-eth0"


def booth_name(i: int) -> str:
    return f"booth{i + 1:02d}"


def port_name(p: int) -> str:
    return f"opt{p + 1:02d}"


def synth_dataset(
    out_dir: str,
    n_interfaces: int = 50,
    days: float = 3,
    cadence_s: int = 60,
    scenarios: tuple[FaultScenario, ...] = (),
    seed: int = 0,
    start_ts: int = DEFAULT_START_TS,
) -> dict:
    """Generate telemetry files, a topology file, and a ground-truth manifest.

    Returns the manifest dict (also written to ``manifest.json``). Identical
    arguments and seed produce byte-identical files.
    """
    os.makedirs(out_dir, exist_ok=True)
    n_ports = max(1, round(n_interfaces * OPTICAL_PORT_FRACTION))
    n_samples = int(days * 86400 // cadence_s)
    optical_cadence = cadence_s * OPTICAL_CADENCE_FACTOR
    n_optical = int(days * 86400 // optical_cadence)
    end_ts = start_ts + int(days * 86400)

    iface_ids = [iface_name(i) for i in range(n_interfaces)]
    port_ids = [port_name(p) for p in range(n_ports)]
    for sc in scenarios:
        if sc.kind == "optical_degradation":
            if sc.target not in port_ids:
                raise ScenarioTargetMissing(f"{sc.target} not a generated port")
        elif sc.target not in iface_ids:
            raise ScenarioTargetMissing(f"{sc.target} not a generated interface")

    seeds = np.random.SeedSequence(seed).spawn(3)
    iface_rng = np.random.default_rng(seeds[0])
    optical_rng = np.random.default_rng(seeds[1])
    flow_rng = np.random.default_rng(seeds[2])

    manifest_scenarios = []
    for sc in scenarios:
        effect_end = sc.onset_ts + sc.duration_s
        if sc.kind == "interface_flap":
            effect_end += cadence_s  # the recovery reset sample
        manifest_scenarios.append(
            {**asdict(sc), "effect_window": [sc.onset_ts, effect_end],
             "metrics": _affected_metrics(sc.kind)}
        )

    ts_grid = start_ts + np.arange(n_samples, dtype=np.int64) * cadence_s
    iface_lines = []
    for i, iface in enumerate(iface_ids):
        base_pps = float(np.exp(iface_rng.uniform(np.log(2000), np.log(20000))))
        phase = float(iface_rng.uniform(0, 86400))
        bytes_per_pkt = float(iface_rng.uniform(400, 1200))
        out_factor = float(iface_rng.uniform(0.6, 0.95))
        noise_in = iface_rng.normal(0.0, NOISE_SIGMA, size=n_samples)
        noise_out = iface_rng.normal(0.0, NOISE_SIGMA, size=n_samples)

        diurnal = 1.0 + DIURNAL_AMPLITUDE * np.sin(
            2 * math.pi * (ts_grid - phase) / 86400.0
        )
        dow = (ts_grid // 86400) % 7
        weekday = np.array(WEEKDAY_FACTORS, dtype=np.float64)[dow]
        pps_in = np.clip(base_pps * diurnal * weekday * (1.0 + noise_in), 0, None)
        pps_out = np.clip(base_pps * out_factor * diurnal * weekday * (1.0 + noise_out), 0, None)
        eps_in = np.zeros(n_samples)
        eps_out = np.zeros(n_samples)
        flap = np.zeros(n_samples, dtype=bool)

        for sc in scenarios:
            if sc.target != iface:
                continue
            window = (ts_grid >= sc.onset_ts) & (ts_grid < sc.onset_ts + sc.duration_s)
            if sc.kind == "traffic_flood":
                pps_in[window] *= sc.magnitude
                pps_out[window] *= sc.magnitude
            elif sc.kind == "error_storm":
                eps_in[window] = sc.magnitude
                eps_out[window] = sc.magnitude / 2.0
            elif sc.kind == "interface_flap":
                pps_in[window] = 0.0
                pps_out[window] = 0.0
                eps_in[window] = 0.0
                eps_out[window] = 0.0
                flap[window] = True

        counters = {name: 0 for name in
                    ("pkts_in", "pkts_out", "octets_in", "octets_out", "errs_in", "errs_out")}
        was_down = False
        for k in range(n_samples):
            if was_down and not flap[k]:
                counters = {name: 0 for name in counters}  # device restarted
            was_down = bool(flap[k])
            if not flap[k]:
                counters["pkts_in"] += int(round(pps_in[k] * cadence_s))
                counters["pkts_out"] += int(round(pps_out[k] * cadence_s))
                counters["octets_in"] += int(round(pps_in[k] * bytes_per_pkt * cadence_s))
                counters["octets_out"] += int(round(pps_out[k] * bytes_per_pkt * cadence_s))
                counters["errs_in"] += int(round(eps_in[k] * cadence_s))
                counters["errs_out"] += int(round(eps_out[k] * cadence_s))
            iface_lines.append(
                format_record(
                    TelemetrySample(
                        timestamp=int(ts_grid[k]),
                        interface_id=iface,
                        speed_bps=10_000_000_000,
                        descr=f"Booth{i + 1:02d}-Uplink",
                        **counters,
                    )
                )
            )

    optical_ts = start_ts + np.arange(n_optical, dtype=np.int64) * optical_cadence
    optical_lines = []
    for p, port in enumerate(port_ids):
        base_tx = float(optical_rng.uniform(-1.0, 2.0))
        loss_db = float(optical_rng.uniform(2.0, 6.0))
        tx = base_tx + optical_rng.normal(0.0, OPTICAL_NOISE_DB, size=n_optical)
        rx = (base_tx - loss_db) + optical_rng.normal(0.0, OPTICAL_NOISE_DB, size=n_optical)
        for sc in scenarios:
            if sc.kind == "optical_degradation" and sc.target == port:
                window = (optical_ts >= sc.onset_ts) & (optical_ts < sc.onset_ts + sc.duration_s)
                rx[window] -= sc.magnitude
        for k in range(n_optical):
            optical_lines.append(
                format_record(
                    OpticalSample(
                        timestamp=int(optical_ts[k]),
                        port_id=port,
                        tx_power_dbm=round(float(tx[k]), 4),
                        rx_power_dbm=round(float(rx[k]), 4),
                    )
                )
            )

    flow_cadence = cadence_s * FLOW_CADENCE_FACTOR
    n_flow_steps = int(days * 86400 // flow_cadence)
    pair_count = min(FLOW_PAIRS, max(1, n_interfaces // 2))
    flow_lines = []
    for k in range(n_flow_steps):
        t = start_ts + (k + 1) * flow_cadence - 1
        for pair in range(pair_count):
            src_booth = pair
            dst_booth = (pair + pair_count) % max(n_interfaces, 1)
            nbytes = int(np.exp(flow_rng.normal(10.5, 0.3)))
            flow_lines.append(
                format_record(
                    FlowRecord(
                        start_ts=t - flow_cadence + 1,
                        end_ts=t,
                        src_addr=f"10.0.{src_booth + 1}.10",
                        dst_addr=f"10.0.{dst_booth + 1}.10",
                        src_port=int(flow_rng.integers(1024, 65536)),
                        dst_port=443,
                        proto=6,
                        bytes=max(1, nbytes),
                        packets=max(1, nbytes // 800),
                    )
                )
            )

    topo_lines = []
    for p in range(n_ports):
        topo_lines.append(f"link iface={iface_name(p)} port={port_name(p)}")
    for i in range(n_interfaces):
        topo_lines.append(f"link iface={iface_name(i)} booth={booth_name(i)}")

    files = {
        "interface": "interface.ntl",
        "optical": "optical.ntl",
        "flow": "flow.ntl",
        "topology": "topology.txt",
    }
    _write_lines(os.path.join(out_dir, files["interface"]), iface_lines)
    _write_lines(os.path.join(out_dir, files["optical"]), optical_lines)
    _write_lines(os.path.join(out_dir, files["flow"]), flow_lines)
    _write_lines(os.path.join(out_dir, files["topology"]), topo_lines)

    manifest = {
        "seed": seed,
        "params": {
            "n_interfaces": n_interfaces,
            "n_optical_ports": n_ports,
            "days": days,
            "cadence_s": cadence_s,
            "optical_cadence_s": optical_cadence,
            "start_ts": start_ts,
            "end_ts": end_ts,
            "diurnal_amplitude": DIURNAL_AMPLITUDE,
            "noise_sigma": NOISE_SIGMA,
            "weekday_factors": list(WEEKDAY_FACTORS),
        },
        "counts": {
            "interface": len(iface_lines),
            "optical": len(optical_lines),
            "flow": len(flow_lines),
        },
        "files": files,
        "scenarios": manifest_scenarios,
    }
    with open(os.path.join(out_dir, "manifest.json"), "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return manifest


def _affected_metrics(kind: str) -> list[str]:
    if kind == "optical_degradation":
        return ["rx_power_dbm"]
    if kind == "error_storm":
        return ["eps_in", "eps_out"]
    if kind == "traffic_flood":
        return ["pps_in", "pps_out", "bps_in", "bps_out"]
    return ["pps_in", "pps_out", "bps_in", "bps_out"]  # interface_flap: rates collapse


def _write_lines(path: str, lines: list[str]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for line in lines:
            fh.write(line)
            fh.write("\n")


def load_manifest(path: str) -> dict:
    with open(path, "r", encoding="utf-8") as fh:
        return json.load(fh)


def default_demo_scenarios(
    n_interfaces: int = 50,
    start_ts: int = DEFAULT_START_TS,
    cadence_s: int = 60,
) -> tuple[FaultScenario, ...]:
    """Twelve faults covering all four kinds, placed on day 2 and 3 so a
    full day of clean baseline precedes every onset. Five of them are
    correlated optical+interface pairs on port-bearing interfaces."""
    h = 3600
    day2 = start_ts + 86400
    day3 = start_ts + 2 * 86400
    scenarios = [
        # five correlated pairs: optical drop, then an error storm on the mapped interface
        FaultScenario("optical_degradation", port_name(0), day2 + 2 * h, 2 * h, 10.0),
        FaultScenario("error_storm", iface_name(0), day2 + 2 * h + 600, 2 * h - 600, 3.0),
        FaultScenario("optical_degradation", port_name(1), day2 + 6 * h, 2 * h, 8.0),
        FaultScenario("error_storm", iface_name(1), day2 + 6 * h + 600, 2 * h - 600, 2.5),
        FaultScenario("optical_degradation", port_name(2), day2 + 10 * h, 2 * h, 12.0),
        FaultScenario("error_storm", iface_name(2), day2 + 10 * h + 600, 2 * h - 600, 4.0),
        FaultScenario("optical_degradation", port_name(3), day3 + 2 * h, 2 * h, 9.0),
        FaultScenario("error_storm", iface_name(3), day3 + 2 * h + 600, 2 * h - 600, 2.0),
        FaultScenario("optical_degradation", port_name(4), day3 + 6 * h, 2 * h, 11.0),
        FaultScenario("error_storm", iface_name(4), day3 + 6 * h + 600, 2 * h - 600, 3.5),
        # uncorrelated singles on portless interfaces
        FaultScenario("traffic_flood", iface_name(20), day2 + 14 * h, 2 * h, 5.0),
        FaultScenario("interface_flap", iface_name(30), day3 + 10 * h, 2 * h, 1.0),
    ]
    return tuple(scenarios)
