"""HTTP gateway: chat sessions, interface views, incident feed, ticks.

Wires stores, detector ticks, agents, the correlator, and the model backend
together under one config file. A manual ``POST /api/tick`` exists so
time-driven behavior is testable deterministically; the background loop
drives the same code path on a wall-clock interval.
"""

from __future__ import annotations

import dataclasses
import json
import os
import threading
import time
from dataclasses import dataclass, field, replace

from . import __version__
from .agents import AgentRuntime, AuditLog, CoordinatorResult
from .correlate import (
    Incident,
    STATUS_ACKNOWLEDGED,
    STATUS_OPEN,
    correlate,
)
from .detect import (
    DetectorConfig,
    InsufficientHistory,
    detect_store_range,
    forecast_next,
)
from .lineformat import parse_record
from .llm import (
    BACKEND_SCRIPTED,
    BackendConfig,
    BackendUnreachable,
    ChatTurn,
    ROLE_ASSISTANT,
    ROLE_TOOL,
    ROLE_USER,
    make_backend,
)
from .records import DB_KINDS, TelemetryError
from .store import TelemetryStore, WindowQuery
from .topology import TopologyMap

DEFAULT_LISTEN = "127.0.0.1:8080"
ENV_PREFIX = "NETWATCH_"


class ConfigError(Exception):
    pass


@dataclass(frozen=True)
class ServiceConfig:
    """Gateway configuration. Precedence: CLI flags > environment > file.

    Environment overrides: NETWATCH_LISTEN, NETWATCH_TICK_INTERVAL_S,
    NETWATCH_SESSION_IDLE_EXPIRY_S, NETWATCH_BACKEND_KIND,
    NETWATCH_BACKEND_URL, NETWATCH_BACKEND_SCRIPT, NETWATCH_TOPOLOGY,
    NETWATCH_BEARER_TOKEN.
    """

    listen: str = DEFAULT_LISTEN
    store_paths: dict = field(default_factory=dict)  # db kind -> file path
    detector: dict = field(default_factory=dict)  # db kind -> DetectorConfig
    backend: BackendConfig = field(default_factory=lambda: BackendConfig(
        kind=BACKEND_SCRIPTED, script_path="script.rules"))
    topology_path: str = "topology.txt"
    tick_interval_s: int = 3600
    session_idle_expiry_s: int = 86400
    session_log: str = "sessions.log"
    audit_log: str = "audit.log"
    bearer_token: str | None = None
    static_dir: str | None = None

    def __post_init__(self) -> None:
        if self.tick_interval_s < 60:
            raise ConfigError("tick_interval_s must be >= 60")

    def validate_paths(self) -> None:
        for kind, path in self.store_paths.items():
            if kind not in DB_KINDS:
                raise ConfigError(f"unknown store kind {kind!r}")
            if not os.path.exists(path):
                raise ConfigError(f"store path does not exist: {path}")
        if not os.path.exists(self.topology_path):
            raise ConfigError(f"topology path does not exist: {self.topology_path}")
        if self.backend.kind == BACKEND_SCRIPTED and not os.path.exists(self.backend.script_path):
            raise ConfigError(f"script path does not exist: {self.backend.script_path}")


def load_config(path: str, env: dict | None = None, flags: dict | None = None) -> ServiceConfig:
    """Load the JSON config file and apply env and flag overrides."""
    env = os.environ if env is None else env
    flags = flags or {}
    try:
        with open(path, "r", encoding="utf-8") as fh:
            raw = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from None

    base = os.path.dirname(os.path.abspath(path))
    rel = lambda p: p if os.path.isabs(p) else os.path.join(base, p)

    store_paths = {k: rel(v) for k, v in raw.get("stores", {}).items()}
    detector = {}
    for kind, overrides in raw.get("detector", {}).items():
        detector[kind] = DetectorConfig(**overrides)

    backend_raw = dict(raw.get("backend", {}))
    if env.get(ENV_PREFIX + "BACKEND_KIND"):
        backend_raw["kind"] = env[ENV_PREFIX + "BACKEND_KIND"]
    if env.get(ENV_PREFIX + "BACKEND_URL"):
        backend_raw["endpoint_url"] = env[ENV_PREFIX + "BACKEND_URL"]
    if env.get(ENV_PREFIX + "BACKEND_SCRIPT"):
        backend_raw["script_path"] = env[ENV_PREFIX + "BACKEND_SCRIPT"]
    if backend_raw.get("script_path"):
        backend_raw["script_path"] = rel(backend_raw["script_path"])
    backend = BackendConfig(**backend_raw)

    def pick(flag_key, env_key, file_key, default, convert=lambda x: x):
        if flags.get(flag_key) is not None:
            return flags[flag_key]
        if env.get(ENV_PREFIX + env_key):
            return convert(env[ENV_PREFIX + env_key])
        if file_key in raw:
            return raw[file_key]
        return default

    topology_path = pick("topology", "TOPOLOGY", "topology", "topology.txt")
    return ServiceConfig(
        listen=pick("listen", "LISTEN", "listen", DEFAULT_LISTEN),
        store_paths=store_paths,
        detector=detector,
        backend=backend,
        topology_path=rel(topology_path),
        tick_interval_s=int(pick(None, "TICK_INTERVAL_S", "tick_interval_s", 3600, int)),
        session_idle_expiry_s=int(
            pick(None, "SESSION_IDLE_EXPIRY_S", "session_idle_expiry_s", 86400, int)
        ),
        session_log=rel(pick(None, "SESSION_LOG", "session_log", "sessions.log")),
        audit_log=rel(pick(None, "AUDIT_LOG", "audit_log", "audit.log")),
        bearer_token=pick(None, "BEARER_TOKEN", "bearer_token", None),
        static_dir=raw.get("static_dir") and rel(raw["static_dir"]),
    )


# --- sessions -------------------------------------------------------------------

@dataclass
class Session:
    session_id: str
    created_ts: int
    turns: list[ChatTurn] = field(default_factory=list)
    last_activity_ts: int = 0
    unanswered: list[int] = field(default_factory=list)
    plan_cache: dict = field(default_factory=dict)


def _turn_to_json(turn: ChatTurn) -> dict:
    out = {"role": turn.role, "content": turn.content}
    if turn.tool_result is not None:
        out["tool_result"] = turn.tool_result
    if turn.tool_call_id:
        out["tool_call_id"] = turn.tool_call_id
    if turn.tool_calls:
        out["tool_calls"] = [
            {"call_id": c.call_id, "tool_name": c.tool_name, "arguments": c.arguments}
            for c in turn.tool_calls
        ]
    return out


def _turn_from_json(raw: dict) -> ChatTurn:
    from .llm import ToolCall

    return ChatTurn(
        role=raw["role"],
        content=raw.get("content", ""),
        tool_calls=tuple(
            ToolCall(call_id=c["call_id"], tool_name=c["tool_name"], arguments=c["arguments"])
            for c in raw.get("tool_calls", [])
        ),
        tool_result=raw.get("tool_result"),
        tool_call_id=raw.get("tool_call_id"),
    )


class SessionStore:
    """Sessions persisted to an append-only JSON-lines log."""

    def __init__(self, log_path: str | None, clock=None):
        self.log_path = log_path
        self.clock = clock or (lambda: int(time.time()))
        self.sessions: dict[str, Session] = {}
        self._created = 0
        self._lock = threading.RLock()
        if log_path and os.path.exists(log_path):
            self._replay(log_path)

    def _replay(self, path: str) -> None:
        with open(path, "r", encoding="utf-8") as fh:
            for line in fh:
                if not line.strip():
                    continue
                event = json.loads(line)
                if event["event"] == "created":
                    self._created += 1
                    self.sessions[event["session_id"]] = Session(
                        session_id=event["session_id"],
                        created_ts=event["ts"],
                        last_activity_ts=event["ts"],
                    )
                elif event["event"] == "turn":
                    session = self.sessions.get(event["session_id"])
                    if session is not None:
                        session.turns.append(_turn_from_json(event["turn"]))
                        session.last_activity_ts = event["ts"]
                elif event["event"] == "unanswered":
                    session = self.sessions.get(event["session_id"])
                    if session is not None:
                        session.unanswered.append(event["turn_index"])

    def _write(self, event: dict) -> None:
        if self.log_path:
            with open(self.log_path, "a", encoding="utf-8") as fh:
                fh.write(json.dumps(event, sort_keys=True) + "\n")

    def create(self) -> Session:
        with self._lock:
            self._created += 1
            session = Session(
                session_id=f"s{self._created:06d}",
                created_ts=self.clock(),
                last_activity_ts=self.clock(),
            )
            self.sessions[session.session_id] = session
            self._write({"event": "created", "session_id": session.session_id,
                         "ts": session.created_ts})
            return session

    def get(self, session_id: str) -> Session | None:
        with self._lock:
            return self.sessions.get(session_id)

    def append_turn(self, session: Session, turn: ChatTurn) -> int:
        with self._lock:
            session.turns.append(turn)
            session.last_activity_ts = self.clock()
            index = len(session.turns) - 1
            self._write({"event": "turn", "session_id": session.session_id,
                         "turn": _turn_to_json(turn), "ts": session.last_activity_ts})
            return index

    def mark_unanswered(self, session: Session, turn_index: int) -> None:
        with self._lock:
            session.unanswered.append(turn_index)
            self._write({"event": "unanswered", "session_id": session.session_id,
                         "turn_index": turn_index, "ts": self.clock()})

    def expire_idle(self, max_idle_s: int) -> int:
        with self._lock:
            now = self.clock()
            stale = [sid for sid, s in self.sessions.items()
                     if now - s.last_activity_ts > max_idle_s]
            for sid in stale:
                del self.sessions[sid]
            return len(stale)


# --- HTTP error -------------------------------------------------------------------

class ApiError(Exception):
    def __init__(self, status: int, detail: str):
        self.status = status
        self.detail = detail
        super().__init__(detail)


# --- the service ------------------------------------------------------------------

class GatewayService:
    """Application core behind the HTTP layer; usable directly in tests."""

    def __init__(self, cfg: ServiceConfig, clock=None, validate_paths: bool = True):
        if validate_paths:
            cfg.validate_paths()
        self.cfg = cfg
        self.clock = clock or (lambda: int(time.time()))
        self.stores: dict[str, TelemetryStore] = {}
        for kind, path in sorted(cfg.store_paths.items()):
            self.stores[kind] = TelemetryStore.open(path, db_name=kind)
        self.topology = TopologyMap.load(cfg.topology_path)
        self.backend = make_backend(cfg.backend)
        self.audit = AuditLog(cfg.audit_log)
        self.runtime = AgentRuntime(
            stores=self.stores,
            detector_cfgs={k: cfg.detector.get(k, DetectorConfig()) for k in self.stores},
            topology=self.topology,
            backend=self.backend,
            backend_cfg=cfg.backend,
            audit=self.audit,
            clock=self.clock,
        )
        self.sessions = SessionStore(cfg.session_log, clock=self.clock)
        self.incidents: dict[str, Incident] = {}
        self._incident_seq = 0
        self._lock = threading.RLock()
        self._tick_thread: threading.Thread | None = None
        self._stop = threading.Event()
        self.started_ts = self.clock()

    def detector_cfg(self, kind: str) -> DetectorConfig:
        return self.cfg.detector.get(kind, DetectorConfig())

    # -- ticks and incidents --

    def run_tick(self) -> dict:
        """One monitoring pass: agent ticks, correlation, incident update."""
        reports = self.runtime.tick()
        with self._lock:
            fresh = correlate(self.runtime.recent_reports, self.topology)
            self._merge_incidents(fresh)
            self.sessions.expire_idle(self.cfg.session_idle_expiry_s)
            return {
                "reports": len(reports),
                "incidents_total": len(self.incidents),
                "incidents_open": sum(
                    1 for i in self.incidents.values() if i.status == STATUS_OPEN
                ),
            }

    def _merge_incidents(self, fresh: list[Incident]) -> None:
        """Map the fresh correlation partition onto the persistent registry,
        keeping ids and ack status of incidents that share a member event."""
        def member_keys(incident):
            return {
                (e.entity_id, e.metric, e.window_start)
                for e in incident.all_events()
            }

        existing_by_key: dict[tuple, str] = {}
        for iid, incident in self.incidents.items():
            for key in member_keys(incident):
                existing_by_key[key] = iid

        for incident in sorted(fresh, key=lambda i: (i.window_start, i.incident_id)):
            matches = {existing_by_key.get(k) for k in member_keys(incident)}
            matches.discard(None)
            if matches:
                iid = sorted(matches)[0]
                status = self.incidents[iid].status
                self.incidents[iid] = replace(incident, incident_id=iid, status=status)
            else:
                self._incident_seq += 1
                iid = f"inc-{self._incident_seq:06d}"
                self.incidents[iid] = replace(incident, incident_id=iid)

    def start_tick_loop(self) -> None:
        if self._tick_thread is not None:
            return

        def loop():
            while not self._stop.wait(self.cfg.tick_interval_s):
                try:
                    self.run_tick()
                except Exception as exc:
                    self.audit.log("tick_loop_error", error=str(exc))

        self._tick_thread = threading.Thread(target=loop, daemon=True, name="netwatch-tick")
        self._tick_thread.start()

    def stop(self) -> None:
        self._stop.set()

    # -- chat --

    def chat(self, message: str, session_id: str | None = None) -> dict:
        if not message or not message.strip():
            raise ApiError(400, "message must be nonempty")
        with self._lock:
            if session_id is None:
                session = self.sessions.create()
            else:
                session = self.sessions.get(session_id)
                if session is None:
                    raise ApiError(404, f"unknown session {session_id!r}")
            history = list(session.turns)
            user_index = self.sessions.append_turn(
                session, ChatTurn(role=ROLE_USER, content=message)
            )
            try:
                result: CoordinatorResult = self.runtime.ask(
                    message, history, plan_cache=session.plan_cache
                )
            except BackendUnreachable as exc:
                self.sessions.mark_unanswered(session, user_index)
                raise ApiError(503, f"backend unreachable: {exc}") from None
            evidence = [e for e in result.transcript if e.get("type") != "answer"]
            self.sessions.append_turn(
                session,
                ChatTurn(
                    role=ROLE_TOOL,
                    tool_result=json.dumps(evidence, sort_keys=True, default=str),
                    tool_call_id="evidence",
                ),
            )
            self.sessions.append_turn(session, ChatTurn(role=ROLE_ASSISTANT, content=result.answer))
            return {
                "session_id": session.session_id,
                "answer": result.answer,
                "partial": result.partial,
                "evidence": evidence,
            }

    # -- interface views --

    def interfaces_summary(self) -> list[dict]:
        store = self.stores.get("interface")
        if store is None:
            return []
        cfg = self.detector_cfg("interface")
        window = self._newest_window(store, cfg)
        events = self._events_24h(store, cfg)
        rows = []
        for entity in store.list_entities():
            rows.append(self._summary_row(store, cfg, entity, window, events))
        return rows

    def interface_detail(self, entity: str) -> dict:
        store = self.stores.get("interface")
        if store is None or entity not in store.list_entities():
            raise ApiError(404, f"unknown interface {entity!r}")
        cfg = self.detector_cfg("interface")
        window = self._newest_window(store, cfg)
        events = self._events_24h(store, cfg)
        row = self._summary_row(store, cfg, entity, window, events)
        series = {}
        if window is not None:
            t0 = window[1] - 24 * cfg.window_s
            for metric in ("pps_in", "pps_out", "bps_in", "bps_out", "eps_in", "eps_out"):
                points = store.query_window(
                    WindowQuery(metric=metric, t_start=t0, t_end=window[1],
                                entity_id=entity, step_s=cfg.window_s)
                )
                series[metric] = [[int(ts), float(v)] for ts, v in points]
        touching = [
            iid for iid, inc in sorted(self.incidents.items())
            if entity in inc.entities() and inc.status != "resolved"
        ]
        return {
            **row,
            "series": series,
            "events": [dataclasses.asdict(e) for e in events if e.entity_id == entity],
            "incidents": touching,
        }

    def _newest_window(self, store, cfg) -> tuple[int, int] | None:
        cov = store.time_coverage()
        if cov is None:
            return None
        start = (cov[1] // cfg.window_s) * cfg.window_s
        return start, start + cfg.window_s

    def _events_24h(self, store, cfg) -> list:
        window = self._newest_window(store, cfg)
        if window is None:
            return []
        return detect_store_range(store, cfg, window[1], 24)

    def _summary_row(self, store, cfg, entity, window, events) -> dict:
        row = {"entity": entity, "window": list(window) if window else None}
        for metric in ("pps_in", "pps_out", "bps_in", "bps_out", "eps_in", "eps_out"):
            value = None
            if window is not None:
                points = store.query_window(
                    WindowQuery(metric=metric, t_start=window[0], t_end=window[1],
                                entity_id=entity)
                )
                if points:
                    value = sum(v for _, v in points) / len(points)
            row[metric] = value
        row["anomaly_count_24h"] = sum(1 for e in events if e.entity_id == entity)
        forecast = None
        if window is not None:
            series = store.query_window(
                WindowQuery(metric="pps_in", t_start=0, t_end=window[1], entity_id=entity)
            )
            try:
                predicted, uncertainty = forecast_next(series, cfg, t_next=window[1])
                forecast = {"predicted_mean": predicted, "uncertainty": uncertainty}
            except InsufficientHistory:
                forecast = None
        row["forecast_pps_in"] = forecast
        return row

    # -- incidents --

    def incidents_list(self, since: int | None = None) -> list[dict]:
        with self._lock:
            out = []
            for iid in sorted(self.incidents):
                incident = self.incidents[iid]
                if since is not None and incident.window_end <= since:
                    continue
                out.append(self._incident_to_json(incident))
            return out

    def ack_incident(self, incident_id: str) -> dict:
        with self._lock:
            incident = self.incidents.get(incident_id)
            if incident is None:
                raise ApiError(404, f"unknown incident {incident_id!r}")
            if incident.status != STATUS_OPEN:
                raise ApiError(409, f"incident {incident_id} is {incident.status}, not open")
            self.incidents[incident_id] = incident.with_status(STATUS_ACKNOWLEDGED)
            return self._incident_to_json(self.incidents[incident_id])

    @staticmethod
    def _incident_to_json(incident: Incident) -> dict:
        return {
            "incident_id": incident.incident_id,
            "window": [incident.window_start, incident.window_end],
            "status": incident.status,
            "members": {
                kind: [dataclasses.asdict(e) for e in events]
                for kind, events in incident.members.items()
            },
            "hypotheses": [
                {"cause": label, "score": score} for label, score in incident.hypotheses
            ],
            "entities": incident.entities(),
        }

    # -- ingest / persist / health --

    def ingest_lines(self, lines: list[str]) -> dict:
        counts = {kind: 0 for kind in self.stores}
        errors = []
        for line_no, line in enumerate(lines, start=1):
            if not line.strip() or line.lstrip().startswith("#"):
                continue
            try:
                record = parse_record(line, line_no=line_no)
            except TelemetryError as exc:
                errors.append(str(exc))
                continue
            from .records import record_kind

            kind = record_kind(record)
            store = self.stores.get(kind)
            if store is None:
                errors.append(f"line {line_no}: no {kind} store configured")
                continue
            store.append(record)
            counts[kind] += 1
        return {"appended": counts, "errors": errors}

    def persist_stores(self) -> dict:
        out = {}
        for kind, store in self.stores.items():
            path = self.cfg.store_paths[kind]
            store.persist(path)
            out[kind] = store.record_count
        return out

    def health(self) -> dict:
        backend_ok = True
        backend_info = self.cfg.backend.kind
        if self.cfg.backend.kind == "http":
            import requests

            try:
                requests.head(self.cfg.backend.endpoint_url, timeout=2)
            except requests.RequestException:
                backend_ok = False
        return {
            "version": __version__,
            "started_ts": self.started_ts,
            "stores": {k: s.record_count for k, s in self.stores.items()},
            "backend": {"kind": backend_info, "reachable": backend_ok},
            "incidents_open": sum(
                1 for i in self.incidents.values() if i.status == STATUS_OPEN
            ),
            "sessions": len(self.sessions.sessions),
        }


# --- FastAPI wiring -----------------------------------------------------------------

def create_app(service: GatewayService):
    from fastapi import FastAPI, Request
    from fastapi.responses import JSONResponse

    app = FastAPI(title="netwatch gateway", version=__version__)

    @app.exception_handler(ApiError)
    async def api_error_handler(request: Request, exc: ApiError):
        return JSONResponse(status_code=exc.status, content={"detail": exc.detail})

    if service.cfg.bearer_token:
        @app.middleware("http")
        async def bearer_auth(request: Request, call_next):
            if request.url.path.startswith("/api/") and request.url.path != "/api/health":
                header = request.headers.get("authorization", "")
                if header != f"Bearer {service.cfg.bearer_token}":
                    return JSONResponse(status_code=401, content={"detail": "unauthorized"})
            return await call_next(request)

    @app.get("/api/health")
    def health():
        return service.health()

    @app.post("/api/chat")
    def chat(body: dict):
        message = body.get("message", "")
        session_id = body.get("session_id")
        return service.chat(message, session_id)

    @app.get("/api/interfaces")
    def interfaces():
        return service.interfaces_summary()

    @app.get("/api/interfaces/{entity}")
    def interface_detail(entity: str):
        return service.interface_detail(entity)

    @app.get("/api/incidents")
    def incidents(since: int | None = None):
        return service.incidents_list(since)

    @app.post("/api/incidents/{incident_id}/ack")
    def ack(incident_id: str):
        return service.ack_incident(incident_id)

    @app.post("/api/tick")
    def tick():
        return service.run_tick()

    @app.post("/api/ingest")
    def ingest(body: dict):
        lines = body.get("lines", [])
        if not isinstance(lines, list):
            raise ApiError(400, "lines must be a list of telemetry lines")
        return service.ingest_lines(lines)

    @app.post("/api/persist")
    def persist():
        return service.persist_stores()

    if service.cfg.static_dir and os.path.isdir(service.cfg.static_dir):
        from fastapi.staticfiles import StaticFiles

        app.mount("/", StaticFiles(directory=service.cfg.static_dir, html=True), name="ui")

    return app


def serve(cfg: ServiceConfig) -> None:
    """Run the gateway under uvicorn until interrupted."""
    import uvicorn

    service = GatewayService(cfg)
    app = create_app(service)
    service.start_tick_loop()
    host, _, port = cfg.listen.rpartition(":")
    try:
        uvicorn.run(app, host=host or "127.0.0.1", port=int(port), log_level="info")
    finally:
        service.stop()
        service.persist_stores()
