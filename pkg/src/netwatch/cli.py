"""Operator command line: synthesize datasets, ingest, replay, report, serve."""

from __future__ import annotations

import argparse
import json
import os
import sys
import time

from .detect import DetectorConfig, detect_store
from .lineformat import parse_lines, read_telemetry_file
from .records import DB_KINDS, record_kind
from .store import TelemetryStore
from .synth import FaultScenario, default_demo_scenarios, synth_dataset

DEMO_SCRIPT = """\
# Deterministic demo rules for the scripted backend.
# Tool-result rules come first so multi-step loops terminate.
"rows": -> say:Interface summary: {last_result}
"events":\\[\\] -> say:No anomalies found in this scope for the queried window.
"events": -> say:Anomaly report: {last_result}
# Coordinator planning rules (one per canned question).
Decompose the operator question.*summarize all interfaces -> call:plan_steps({"steps": [{"agent": "agent-interface", "question": "summarize all interfaces"}]})
# Scoped-agent rules.
^summarize all interfaces$ -> call:summarize_scope()
.* -> call:detect_anomalies()
"""


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="netwatch",
        description="Self-hosted multi-agent network monitoring assistant.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_synth = sub.add_parser("synth", help="generate a synthetic conference dataset")
    p_synth.add_argument("--out", required=True, help="output directory")
    p_synth.add_argument("--interfaces", type=int, default=50)
    p_synth.add_argument("--days", type=float, default=3.0)
    p_synth.add_argument("--cadence", type=int, default=60, help="interface poll cadence (s)")
    p_synth.add_argument("--seed", type=int, default=0)
    p_synth.add_argument("--start-ts", type=int, default=None, help="hour-aligned epoch start")
    p_synth.add_argument("--scenarios", help="JSON file with fault scenarios")
    p_synth.add_argument(
        "--fault", action="append", default=[],
        help="inline fault kind=...,target=...,onset=...,duration=...,magnitude=...",
    )
    p_synth.add_argument(
        "--demo-faults", action="store_true",
        help="inject the canonical 12-fault demo set",
    )
    p_synth.add_argument(
        "--with-config", action="store_true",
        help="also write a gateway config.json and scripted-backend rules",
    )

    p_ingest = sub.add_parser("ingest", help="load telemetry files into persistent stores")
    p_ingest.add_argument("--store-dir", required=True)
    p_ingest.add_argument("files", nargs="+", help="telemetry line files")

    p_replay = sub.add_parser("replay", help="stream telemetry files into a running gateway")
    p_replay.add_argument("--gateway", required=True, help="gateway base url")
    p_replay.add_argument("--speedup", type=float, default=3600.0)
    p_replay.add_argument("--batch-window", type=int, default=60,
                          help="records within this many seconds share one request")
    p_replay.add_argument("files", nargs="+")

    p_report = sub.add_parser("report", help="one-shot detection report over stored data")
    p_report.add_argument("--store-dir", required=True)
    p_report.add_argument("--window-start", type=int, default=None)
    p_report.add_argument("--window-end", type=int, default=None)
    p_report.add_argument("--json", action="store_true", dest="as_json")

    p_serve = sub.add_parser("serve", help="run the HTTP gateway")
    p_serve.add_argument("--config", required=True)
    p_serve.add_argument("--listen", default=None, help="addr:port override")

    args = parser.parse_args(argv)
    if args.command == "synth":
        return cmd_synth(args)
    if args.command == "ingest":
        return cmd_ingest(args)
    if args.command == "replay":
        return cmd_replay(args)
    if args.command == "report":
        return cmd_report(args)
    return cmd_serve(args)


def _parse_fault_flag(text: str) -> FaultScenario:
    fields = {}
    for part in text.split(","):
        key, sep, value = part.partition("=")
        if not sep:
            raise SystemExit(f"bad --fault token {part!r}")
        fields[key.strip()] = value.strip()
    try:
        return FaultScenario(
            kind=fields["kind"],
            target=fields["target"],
            onset_ts=int(fields["onset"]),
            duration_s=int(fields["duration"]),
            magnitude=float(fields["magnitude"]),
        )
    except KeyError as exc:
        raise SystemExit(f"--fault missing field {exc}")


def cmd_synth(args) -> int:
    from .synth import DEFAULT_START_TS

    start_ts = args.start_ts if args.start_ts is not None else DEFAULT_START_TS
    scenarios: list[FaultScenario] = []
    if args.scenarios:
        with open(args.scenarios, "r", encoding="utf-8") as fh:
            for raw in json.load(fh):
                scenarios.append(FaultScenario(**raw))
    for flag in args.fault:
        scenarios.append(_parse_fault_flag(flag))
    if args.demo_faults:
        scenarios.extend(
            default_demo_scenarios(args.interfaces, start_ts, args.cadence)
        )
    manifest = synth_dataset(
        out_dir=args.out,
        n_interfaces=args.interfaces,
        days=args.days,
        cadence_s=args.cadence,
        scenarios=tuple(scenarios),
        seed=args.seed,
        start_ts=start_ts,
    )
    for kind in ("interface", "optical", "flow"):
        print(f"{kind}: {manifest['counts'][kind]} records -> {manifest['files'][kind]}")
    print(f"topology: {manifest['files']['topology']}")
    print(f"scenarios: {len(manifest['scenarios'])} (manifest.json)")
    if args.with_config:
        _write_demo_config(args.out)
        print("gateway config: config.json, script.rules")
    return 0


def _write_demo_config(out_dir: str) -> None:
    with open(os.path.join(out_dir, "script.rules"), "w", encoding="utf-8") as fh:
        fh.write(DEMO_SCRIPT)
    config = {
        "listen": "127.0.0.1:8080",
        "stores": {
            "interface": "stores/interface.nwts",
            "flow": "stores/flow.nwts",
            "optical": "stores/optical.nwts",
        },
        "backend": {"kind": "scripted", "script_path": "script.rules"},
        "topology": "topology.txt",
        "tick_interval_s": 3600,
        "session_log": "sessions.log",
        "audit_log": "audit.log",
    }
    with open(os.path.join(out_dir, "config.json"), "w", encoding="utf-8") as fh:
        json.dump(config, fh, indent=2)
        fh.write("\n")


def cmd_ingest(args) -> int:
    os.makedirs(args.store_dir, exist_ok=True)
    stores = {kind: TelemetryStore(kind, db_name=kind) for kind in DB_KINDS}
    total_errors = 0
    for path in args.files:
        records, errors = parse_lines(read_telemetry_file(path))
        for record in records:
            stores[record_kind(record)].append(record)
        for err in errors:
            print(f"{path}:{err.line_no}: {err.message}", file=sys.stderr)
        total_errors += len(errors)
    for kind, store in stores.items():
        if store.record_count == 0:
            continue
        path = os.path.join(args.store_dir, f"{kind}.nwts")
        store.persist(path)
        print(f"{kind}: {store.record_count} records -> {path}")
    if total_errors:
        print(f"{total_errors} bad line(s) skipped", file=sys.stderr)
    return 0 if total_errors == 0 else 1


def cmd_replay(args) -> int:
    import requests

    from .store import _ts_of

    timed = []
    for path in args.files:
        records, errors = parse_lines(read_telemetry_file(path))
        for err in errors:
            print(f"{path}:{err.line_no}: {err.message}", file=sys.stderr)
        for record in records:
            timed.append((_ts_of(record), record))
    timed.sort(key=lambda p: p[0])
    if not timed:
        print("nothing to replay")
        return 0

    url = args.gateway.rstrip("/") + "/api/ingest"
    sent = 0
    batch: list[str] = []
    batch_start = timed[0][0]
    prev_ts = timed[0][0]
    from .lineformat import format_record

    def flush():
        nonlocal sent, batch
        if not batch:
            return
        response = requests.post(url, json={"lines": batch}, timeout=30)
        response.raise_for_status()
        sent += len(batch)
        batch = []

    for ts, record in timed:
        if ts - batch_start >= args.batch_window:
            flush()
            wait = (ts - prev_ts) / args.speedup
            if wait > 0:
                time.sleep(min(wait, 30.0))
            batch_start = ts
        batch.append(format_record(record))
        prev_ts = ts
    flush()
    print(f"replayed {sent} records to {url} at {args.speedup:.0f}x")
    return 0


def cmd_report(args) -> int:
    stores = {}
    for kind in DB_KINDS:
        path = os.path.join(args.store_dir, f"{kind}.nwts")
        if os.path.exists(path):
            stores[kind] = TelemetryStore.open(path, db_name=kind)
    if not stores:
        print(f"no stores under {args.store_dir}", file=sys.stderr)
        return 1

    all_events = []
    for kind in sorted(stores):
        store = stores[kind]
        cfg = DetectorConfig()
        cov = store.time_coverage()
        if cov is None:
            continue
        if args.window_start is not None and args.window_end is not None:
            window = (args.window_start, args.window_end)
        else:
            start = (cov[1] // cfg.window_s) * cfg.window_s
            window = (start, start + cfg.window_s)
        events = detect_store(store, cfg, window)
        all_events.extend((kind, e) for e in events)
        if not args.as_json:
            print(f"scope {kind}: window [{window[0]}, {window[1]}): {len(events)} event(s)")
            for e in events:
                print(
                    f"  {e.entity_id} {e.metric} {e.severity} {e.direction} "
                    f"score={e.score:.3f} observed={e.observed:.3f}"
                )
    if args.as_json:
        import dataclasses

        print(json.dumps(
            [{"scope": kind, **dataclasses.asdict(e)} for kind, e in all_events],
            indent=2, sort_keys=True,
        ))
    return 0


def cmd_serve(args) -> int:
    from .gateway import load_config, serve

    cfg = load_config(args.config, flags={"listen": args.listen})
    serve(cfg)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
