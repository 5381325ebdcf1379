"""Scoped reasoning agents, the inter-agent bus, and database isolation.

One agent owns one database scope and may only read it; the coordinator
owns no scope and only talks to agents. On ticks each agent runs the
monitoring chain (detect -> classify -> escalate) and broadcasts a
sanitized pattern report. On operator questions an agent runs the
four-phase loop: interpret the question into a prompt, let the model plan,
execute whitelisted tools, feed outcomes back until a final answer or the
step budget.

Raw telemetry never crosses agents: every bus message passes an isolation
check that rejects reachable raw records (as objects, mappings, or
embedded telemetry lines) and any evidence of out-of-scope store reads.
All traffic lands in an append-only audit log with monotonic sequence
numbers.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import re
import threading
import time
from collections import defaultdict
from dataclasses import dataclass, field

from .detect import AnomalyEvent, DetectorConfig, detect_store, forecast_next
from .llm import (
    BackendConfig,
    BackendError,
    BackendUnreachable,
    ChatTurn,
    NoScriptMatch,
    ROLE_ASSISTANT,
    ROLE_TOOL,
    ROLE_USER,
    ToolCall,
    assemble_prompt,
    serialize_tool_result,
)
from .records import RAW_FIELD_SETS, RAW_RECORD_TYPES
from .store import TelemetryStore, WindowQuery
from .topology import TopologyMap

BROADCAST = "*"

KIND_REPORT = "report"
KIND_ASK = "ask"
KIND_ANSWER = "answer"
KIND_PLAN = "plan"
KIND_RESULT = "result"

STEP_PENDING = "pending"
STEP_DONE = "done"
STEP_FAILED = "failed"

DEFAULT_STEP_BUDGET = 8
MAX_SUMMARY_CHARS = 2000

_TELEMETRY_LINE_RE = re.compile(r"(?:^|\s)kind=(?:iface|flow|optical)\s+\w+=")


class AgentError(Exception):
    pass


class EmptyQuestion(AgentError):
    pass


class NoAgents(AgentError):
    pass


class UnknownAgent(AgentError):
    pass


@dataclass(frozen=True)
class AgentSpec:
    """Identity and permissions of one agent. The coordinator has an empty
    scope and may not touch any store."""

    agent_id: str
    scope: str
    tool_whitelist: tuple[str, ...]
    role_prompt: str


@dataclass(frozen=True)
class PatternReport:
    """Sanitized cross-agent summary: events, aggregates, and keys only."""

    report_id: str
    agent_id: str
    window_start: int
    window_end: int
    events: tuple[AnomalyEvent, ...]
    summary: str
    correlation_keys: tuple[str, ...]

    def __post_init__(self) -> None:
        if len(self.summary) > MAX_SUMMARY_CHARS:
            raise ValueError(f"summary exceeds {MAX_SUMMARY_CHARS} chars")
        if not all(isinstance(e, AnomalyEvent) for e in self.events):
            raise ValueError("report events must be AnomalyEvent instances")


_PAYLOAD_TYPES = {
    KIND_REPORT: PatternReport,
    KIND_ASK: str,
    KIND_ANSWER: str,
    KIND_RESULT: str,
}


@dataclass(frozen=True)
class PlanStep:
    target: str
    question: str
    status: str = STEP_PENDING
    answer: str = ""
    error: str = ""


@dataclass(frozen=True)
class AgentPlan:
    plan_id: str
    query: str
    steps: tuple[PlanStep, ...]

    def complete(self) -> bool:
        return all(s.status in (STEP_DONE, STEP_FAILED) for s in self.steps)


@dataclass(frozen=True)
class AgentMessage:
    msg_id: str
    sender: str
    recipient: str
    kind: str
    payload: object
    ts: int
    evidence: tuple[dict, ...] = ()

    def __post_init__(self) -> None:
        if self.recipient != BROADCAST and self.sender == self.recipient:
            raise ValueError("directed messages require sender != recipient")
        if self.kind == KIND_PLAN:
            if not isinstance(self.payload, AgentPlan):
                raise ValueError("plan messages carry an AgentPlan")
        elif self.kind in _PAYLOAD_TYPES:
            if not isinstance(self.payload, _PAYLOAD_TYPES[self.kind]):
                raise ValueError(f"{self.kind} messages carry {_PAYLOAD_TYPES[self.kind].__name__}")
        else:
            raise ValueError(f"unknown message kind {self.kind!r}")


# --- isolation ------------------------------------------------------------------

def contains_raw_record(obj, _depth: int = 0) -> bool:
    """True when a raw telemetry record is reachable from ``obj``: as a
    record object, as a mapping carrying a record's full field set, or as
    an embedded telemetry line inside a string."""
    if _depth > 12:
        return True  # suspiciously deep payloads are not worth trusting
    if isinstance(obj, RAW_RECORD_TYPES):
        return True
    if isinstance(obj, str):
        return _TELEMETRY_LINE_RE.search(obj) is not None
    if isinstance(obj, dict):
        keys = {k for k in obj.keys() if isinstance(k, str)}
        for field_set in RAW_FIELD_SETS.values():
            if field_set <= keys:
                return True
        return any(contains_raw_record(v, _depth + 1) for v in obj.values())
    if isinstance(obj, (list, tuple, set, frozenset)):
        return any(contains_raw_record(v, _depth + 1) for v in obj)
    if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        return any(
            contains_raw_record(getattr(obj, f.name), _depth + 1)
            for f in dataclasses.fields(obj)
        )
    return False


@dataclass(frozen=True)
class IsolationVerdict:
    ok: bool
    reason: str = ""


def enforce_isolation(msg: AgentMessage, scopes: dict[str, str]) -> IsolationVerdict:
    """Pass iff the payload carries no raw-record content and every store
    read in the attached evidence targets the sender's own scope."""
    if contains_raw_record(msg.payload):
        return IsolationVerdict(False, "raw record content reachable from payload")
    sender_scope = scopes.get(msg.sender, "")
    for item in msg.evidence:
        db = item.get("db_name", "")
        if db and db != sender_scope:
            return IsolationVerdict(
                False, f"evidence read on {db!r} outside sender scope {sender_scope!r}"
            )
    return IsolationVerdict(True)


# --- audit log -------------------------------------------------------------------

class AuditLog:
    """Append-only forensic trail with monotonic sequence numbers."""

    def __init__(self, path: str | None = None):
        self.path = path
        self.entries: list[dict] = []
        self._lock = threading.Lock()
        self._seq = 0
        if path:
            try:
                with open(path, "r", encoding="utf-8") as fh:
                    self._seq = sum(1 for _ in fh)
            except FileNotFoundError:
                pass

    def log(self, kind: str, **fields) -> dict:
        with self._lock:
            self._seq += 1
            entry = {"seq": self._seq, "kind": kind, **fields}
            self.entries.append(entry)
            if self.path:
                with open(self.path, "a", encoding="utf-8") as fh:
                    fh.write(json.dumps(entry, sort_keys=True, default=str) + "\n")
            return entry


class MessageBus:
    """Per-sender FIFO delivery with isolation enforcement on every send.

    Violating messages are dropped and audited, never delivered.
    """

    def __init__(self, audit: AuditLog, clock=None):
        self.audit = audit
        self.clock = clock or (lambda: int(time.time()))
        self.scopes: dict[str, str] = {}
        self.inboxes: dict[str, list[AgentMessage]] = defaultdict(list)
        self.delivered: list[AgentMessage] = []
        self._count = 0

    def register(self, agent_id: str, scope: str) -> None:
        self.scopes[agent_id] = scope
        self.inboxes.setdefault(agent_id, [])

    def next_msg_id(self) -> str:
        self._count += 1
        return f"msg-{self._count:06d}"

    def send(
        self, sender: str, recipient: str, kind: str, payload, evidence: tuple[dict, ...] = ()
    ) -> tuple[AgentMessage, IsolationVerdict]:
        msg = AgentMessage(
            msg_id=self.next_msg_id(),
            sender=sender,
            recipient=recipient,
            kind=kind,
            payload=payload,
            ts=self.clock(),
            evidence=evidence,
        )
        verdict = enforce_isolation(msg, self.scopes)
        self.audit.log(
            "message",
            msg_id=msg.msg_id,
            sender=sender,
            recipient=recipient,
            msg_kind=kind,
            verdict="pass" if verdict.ok else "violation",
            reason=verdict.reason,
        )
        if not verdict.ok:
            return msg, verdict
        self.delivered.append(msg)
        if recipient == BROADCAST:
            for agent_id in self.inboxes:
                if agent_id != sender:
                    self.inboxes[agent_id].append(msg)
        else:
            self.inboxes[recipient].append(msg)
        return msg, verdict


# --- scope tools -------------------------------------------------------------------

class ScopeTools:
    """Tool registry bound to exactly one store; each run is audited as a
    read on that scope."""

    def __init__(self, store: TelemetryStore, cfg: DetectorConfig, audit: AuditLog, agent_id: str):
        self.store = store
        self.cfg = cfg
        self.audit = audit
        self.agent_id = agent_id

    def names(self) -> tuple[str, ...]:
        return (
            "list_entities",
            "store_info",
            "query_window",
            "window_stats",
            "detect_anomalies",
            "forecast",
            "summarize_scope",
        )

    def schemas(self) -> list[dict]:
        mk = lambda name, desc, props, req: {
            "name": name,
            "description": desc,
            "parameters": {"type": "object", "properties": props, "required": req},
        }
        ts_props = {
            "entity_id": {"type": "string"},
            "metric": {"type": "string"},
            "t_start": {"type": "integer"},
            "t_end": {"type": "integer"},
        }
        return [
            mk("list_entities", "List entity ids present in this database.", {}, []),
            mk("store_info", "Record count, metrics, and time coverage.", {}, []),
            mk(
                "query_window",
                "Windowed (timestamp, value) series for one entity and metric.",
                {**ts_props, "step_s": {"type": "integer"}},
                ["entity_id", "metric", "t_start", "t_end"],
            ),
            mk("window_stats", "Robust stats of one entity/metric window.", ts_props,
               ["entity_id", "metric", "t_start", "t_end"]),
            mk(
                "detect_anomalies",
                "Anomaly events over all entities for a window (defaults to the newest complete window).",
                {"window_start": {"type": "integer"}, "window_end": {"type": "integer"}},
                [],
            ),
            mk("forecast", "Next-window mean prediction with uncertainty.",
               {"entity_id": {"type": "string"}, "metric": {"type": "string"}},
               ["entity_id", "metric"]),
            mk("summarize_scope", "Per-entity means over the newest complete window.", {}, []),
        ]

    def newest_window(self) -> tuple[int, int] | None:
        cov = self.store.time_coverage()
        if cov is None:
            return None
        w = self.cfg.window_s
        start = (cov[1] // w) * w
        return start, start + w

    def run(self, call: ToolCall) -> dict:
        handler = getattr(self, f"_tool_{call.tool_name}", None)
        if handler is None:
            raise AgentError(f"unknown tool {call.tool_name!r}")
        result = handler(**call.arguments)
        self.audit.log(
            "tool_call",
            agent=self.agent_id,
            tool=call.tool_name,
            db_name=self.store.db_name,
            arguments=call.arguments,
        )
        return result

    def _tool_list_entities(self) -> dict:
        entities = self.store.list_entities()
        return {"entities": entities, "count": len(entities)}

    def _tool_store_info(self) -> dict:
        cov = self.store.time_coverage()
        return {
            "db_name": self.store.db_name,
            "db_kind": self.store.db_kind,
            "record_count": self.store.record_count,
            "metrics": list(self.store.metrics()),
            "coverage": list(cov) if cov else None,
        }

    def _tool_query_window(self, entity_id, metric, t_start, t_end, step_s=None) -> dict:
        series = self.store.query_window(
            WindowQuery(metric=metric, t_start=int(t_start), t_end=int(t_end),
                        entity_id=entity_id, step_s=step_s)
        )
        return {"entity_id": entity_id, "metric": metric,
                "series": [[int(ts), float(v)] for ts, v in series]}

    def _tool_window_stats(self, entity_id, metric, t_start, t_end) -> dict:
        from .detect import window_stats

        series = self.store.query_window(
            WindowQuery(metric=metric, t_start=int(t_start), t_end=int(t_end), entity_id=entity_id)
        )
        stats = window_stats(series, (int(t_start), int(t_end)), entity_id=entity_id, metric=metric)
        return dataclasses.asdict(stats)

    def _tool_detect_anomalies(self, window_start=None, window_end=None) -> dict:
        if window_start is None or window_end is None:
            window = self.newest_window()
            if window is None:
                return {"window": None, "events": []}
        else:
            window = (int(window_start), int(window_end))
        events = detect_store(self.store, self.cfg, window)
        return {"window": list(window), "events": [dataclasses.asdict(e) for e in events]}

    def _tool_forecast(self, entity_id, metric) -> dict:
        metric_series = self.store.query_window(
            WindowQuery(metric=metric, t_start=0, t_end=2**62, entity_id=entity_id)
        )
        predicted, uncertainty = forecast_next(metric_series, self.cfg)
        return {"entity_id": entity_id, "metric": metric,
                "predicted_mean": predicted, "uncertainty": uncertainty}

    def _tool_summarize_scope(self) -> dict:
        window = self.newest_window()
        if window is None:
            return {"window": None, "rows": [], "count": 0}
        from .detect import DETECTION_METRICS

        rows = []
        for entity in self.store.list_entities():
            row = {"entity": entity}
            for metric in DETECTION_METRICS[self.store.db_kind]:
                series = self.store.query_window(
                    WindowQuery(metric=metric, t_start=window[0], t_end=window[1], entity_id=entity)
                )
                if series:
                    row[metric] = round(sum(v for _, v in series) / len(series), 3)
                else:
                    row[metric] = None
            rows.append(row)
        return {"window": list(window), "rows": rows, "count": len(rows)}


# --- query results ------------------------------------------------------------------

@dataclass(frozen=True)
class QueryResult:
    answer: str
    transcript: tuple[dict, ...]
    partial: bool
    evidence: tuple[dict, ...]


@dataclass(frozen=True)
class CoordinatorResult:
    answer: str
    plan: AgentPlan
    transcript: tuple[dict, ...]
    partial: bool


def _digest(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()[:12]


# --- agents -------------------------------------------------------------------------

class ScopedAgent:
    """One agent, one database. Ticks watch the scope; queries answer from it."""

    def __init__(
        self,
        spec: AgentSpec,
        store: TelemetryStore,
        detector_cfg: DetectorConfig,
        backend,
        backend_cfg: BackendConfig | None,
        bus: MessageBus,
        topology: TopologyMap,
        step_budget: int = DEFAULT_STEP_BUDGET,
    ):
        self.spec = spec
        self.store = store
        self.detector_cfg = detector_cfg
        self.backend = backend
        self.backend_cfg = backend_cfg
        self.bus = bus
        self.topology = topology
        self.step_budget = step_budget
        self.tools = ScopeTools(store, detector_cfg, bus.audit, spec.agent_id)
        self._report_count = 0

    # -- monitoring tick --

    def tick(self, window: tuple[int, int]) -> PatternReport | None:
        """Monitoring -> Identification -> escalation for one window.

        Emits a broadcast report when any critical event exists or one
        entity accumulates three warnings; lesser noise stays local.
        """
        events = detect_store(self.store, self.detector_cfg, window)
        if not events:
            return None
        warn_per_entity = defaultdict(int)
        escalate = False
        for event in events:
            if event.severity == "critical":
                escalate = True
            else:
                warn_per_entity[event.entity_id] += 1
        if not escalate and not any(n >= 3 for n in warn_per_entity.values()):
            return None
        keys = set()
        for event in events:
            keys.add(event.entity_id)
            keys.update(self.topology.neighbors(event.entity_id))
        self._report_count += 1
        report = PatternReport(
            report_id=f"{self.spec.agent_id}-rep-{self._report_count:04d}",
            agent_id=self.spec.agent_id,
            window_start=window[0],
            window_end=window[1],
            events=tuple(events),
            summary=self._summary(events, window),
            correlation_keys=tuple(sorted(keys)),
        )
        self.bus.send(self.spec.agent_id, BROADCAST, KIND_REPORT, report)
        return report

    def _summary(self, events: list[AnomalyEvent], window: tuple[int, int]) -> str:
        n_crit = sum(1 for e in events if e.severity == "critical")
        n_warn = len(events) - n_crit
        head = (
            f"scope {self.store.db_name}: {len(events)} event(s) in window "
            f"[{window[0]}, {window[1]}): {n_crit} critical, {n_warn} warn."
        )
        details = "; ".join(
            f"{e.entity_id} {e.metric} {e.severity} {e.direction} score={e.score:.2f}"
            for e in events[:12]
        )
        return (head + " " + details)[:MAX_SUMMARY_CHARS]

    # -- interactive query --

    def scope_schema(self) -> str:
        cov = self.store.time_coverage()
        entities = self.store.list_entities()
        shown = ", ".join(entities[:10]) + (", ..." if len(entities) > 10 else "")
        return (
            f"Scope: {self.store.db_name} ({self.store.db_kind}); "
            f"{self.store.record_count} records; entities ({len(entities)}): {shown}; "
            f"metrics: {', '.join(self.store.metrics())}; "
            f"coverage: {list(cov) if cov else 'empty'}"
        )

    def handle_query(self, question: str, history: list[ChatTurn] | None = None) -> QueryResult:
        """Four-phase loop: interpret, plan, act, evaluate — bounded steps.

        Non-whitelisted tool requests become error observations (the loop
        continues); hitting the step budget returns a partial answer.
        """
        if not question or not question.strip():
            raise EmptyQuestion("question must be nonempty")
        turns = assemble_prompt(self.spec.role_prompt, self.scope_schema(),
                                list(history or []), question)
        transcript: list[dict] = []
        evidence: list[dict] = []
        last_text = ""
        for _ in range(self.step_budget):
            turn = self.backend.complete(turns, self.tools.schemas(), self.backend_cfg)
            if not turn.tool_calls:
                transcript.append({"type": "answer", "text": turn.content})
                return QueryResult(turn.content, tuple(transcript), False, tuple(evidence))
            turns.append(turn)
            if turn.content:
                last_text = turn.content
            for call in turn.tool_calls:
                if call.tool_name not in self.spec.tool_whitelist:
                    self.bus.audit.log(
                        "tool_denied", agent=self.spec.agent_id, tool=call.tool_name
                    )
                    observation = serialize_tool_result(
                        {"error": f"tool {call.tool_name} denied: outside scope whitelist"}
                    )
                    transcript.append({"type": "tool_denied", "tool": call.tool_name})
                else:
                    try:
                        result = self.tools.run(call)
                        observation = serialize_tool_result(result)
                        entry = {
                            "type": "tool_call",
                            "tool": call.tool_name,
                            "arguments": call.arguments,
                            "db_name": self.store.db_name,
                            "result": observation,
                            "result_digest": _digest(observation),
                        }
                        transcript.append(entry)
                        evidence.append(
                            {
                                "tool": call.tool_name,
                                "db_name": self.store.db_name,
                                "result_digest": entry["result_digest"],
                            }
                        )
                    except Exception as exc:  # tool errors are observations, not crashes
                        observation = serialize_tool_result({"error": str(exc)})
                        transcript.append(
                            {"type": "tool_error", "tool": call.tool_name, "error": str(exc)}
                        )
                turns.append(
                    ChatTurn(role=ROLE_TOOL, tool_result=observation, tool_call_id=call.call_id)
                )
        answer = f"[partial: step budget exhausted] {last_text}".strip()
        transcript.append({"type": "partial", "text": answer})
        return QueryResult(answer, tuple(transcript), True, tuple(evidence))


_NO_FINDINGS_RE = re.compile(r"no anomal|no findings|nothing unusual", re.I)

_KIND_KEYWORDS = {
    "interface": {
        "interface", "interfaces", "iface", "error", "errors", "traffic", "packet",
        "packets", "rate", "rates", "bandwidth", "counter", "counters", "uplink",
    },
    "flow": {"flow", "flows", "netflow", "conversation", "conversations", "talker", "talkers"},
    "optical": {"optical", "power", "fiber", "light", "dbm", "port", "ports", "transceiver"},
}


class Coordinator:
    """Decomposes operator questions across scoped agents and synthesizes
    the answers, citing which agent supplied which finding."""

    def __init__(
        self,
        spec: AgentSpec,
        agents: dict[str, ScopedAgent],
        backend,
        backend_cfg: BackendConfig | None,
        bus: MessageBus,
        topology: TopologyMap,
        recent_reports: list[PatternReport],
        step_budget: int = DEFAULT_STEP_BUDGET,
    ):
        self.spec = spec
        self.agents = agents
        self.backend = backend
        self.backend_cfg = backend_cfg
        self.bus = bus
        self.topology = topology
        self.recent_reports = recent_reports
        self.step_budget = step_budget
        self._plan_count = 0

    def coordinate(
        self,
        question: str,
        history: list[ChatTurn] | None = None,
        plan_cache: dict | None = None,
    ) -> CoordinatorResult:
        if not question or not question.strip():
            raise EmptyQuestion("question must be nonempty")
        if not self.agents:
            raise NoAgents("no scoped agents registered")
        transcript: list[dict] = []

        cache_key = " ".join(question.lower().split())
        cached = plan_cache.get(cache_key) if plan_cache is not None else None
        if cached is not None:
            steps = [PlanStep(target=t, question=q) for t, q in cached]
            transcript.append({"type": "plan_cache", "hit": True})
        else:
            steps, how = self._decompose(question, history or [])
            transcript.append(
                {
                    "type": "plan",
                    "method": how,
                    "steps": [{"target": s.target, "question": s.question} for s in steps],
                }
            )
            if plan_cache is not None:
                plan_cache[cache_key] = [(s.target, s.question) for s in steps]

        self._plan_count += 1
        plan = AgentPlan(
            plan_id=f"plan-{self._plan_count:04d}", query=question, steps=tuple(steps)
        )
        self.bus.send(self.spec.agent_id, BROADCAST, KIND_PLAN, plan)

        done_steps: list[PlanStep] = []
        for step in plan.steps:
            self.bus.send(self.spec.agent_id, step.target, KIND_ASK, step.question)
            agent = self.agents[step.target]
            try:
                result = agent.handle_query(step.question, history)
                self.bus.send(
                    step.target, self.spec.agent_id, KIND_ANSWER, result.answer,
                    evidence=result.evidence,
                )
            except BackendUnreachable:
                raise  # infrastructure failure: surface it, do not degrade
            except Exception as exc:
                done_steps.append(
                    dataclasses.replace(step, status=STEP_FAILED, error=str(exc))
                )
                transcript.append(
                    {"type": "step", "target": step.target, "status": STEP_FAILED,
                     "error": str(exc)}
                )
            else:
                done_steps.append(
                    dataclasses.replace(step, status=STEP_DONE, answer=result.answer)
                )
                transcript.append(
                    {
                        "type": "step",
                        "target": step.target,
                        "status": STEP_DONE,
                        "answer": result.answer,
                        "agent_transcript": list(result.transcript),
                    }
                )
        plan = dataclasses.replace(plan, steps=tuple(done_steps))
        answer, partial = self._synthesize(plan)
        transcript.append({"type": "answer", "text": answer})
        return CoordinatorResult(answer, plan, tuple(transcript), partial)

    def _decompose(self, question: str, history: list[ChatTurn]) -> tuple[list[PlanStep], str]:
        """Model-driven planning with a deterministic keyword-routing fallback."""
        roster = "; ".join(
            f"{a.spec.agent_id} -> scope {a.store.db_name} ({a.store.db_kind})"
            for a in self._sorted_agents()
        )
        prompt = (
            f"Decompose the operator question into per-agent sub-questions using the "
            f"plan_steps tool. Agents: {roster}. Question: {question}"
        )
        schema = [
            {
                "name": "plan_steps",
                "description": "Ordered plan of (agent, sub-question) steps.",
                "parameters": {
                    "type": "object",
                    "properties": {"steps": {"type": "array"}},
                    "required": ["steps"],
                },
            }
        ]
        try:
            turns = assemble_prompt(self.spec.role_prompt, f"Agents: {roster}", [], prompt)
            turn = self.backend.complete(turns, schema, self.backend_cfg)
            for call in turn.tool_calls:
                if call.tool_name != "plan_steps":
                    continue
                steps = []
                for raw in call.arguments.get("steps", []):
                    target, sub_q = raw["agent"], raw["question"]
                    if target not in self.agents:
                        raise UnknownAgent(target)
                    steps.append(PlanStep(target=target, question=sub_q))
                if steps:
                    return steps, "model"
        except BackendUnreachable:
            raise
        except (NoScriptMatch, BackendError, KeyError, TypeError, UnknownAgent):
            pass
        return self._fallback_route(question), "fallback"

    def _fallback_route(self, question: str) -> list[PlanStep]:
        """Keyword routing: an agent is consulted when the question speaks
        its scope's vocabulary or names an entity tied (via topology) to a
        correlation key in its recent reports."""
        q_lower = question.lower()
        tokens = set(re.findall(r"[a-z0-9_.-]+", q_lower))
        mentioned = {e for e in self.topology.entities() if e.lower() in q_lower}
        for report in self.recent_reports:
            mentioned.update(k for k in report.correlation_keys if k.lower() in q_lower)

        selected = []
        for agent in self._sorted_agents():
            kind_words = _KIND_KEYWORDS[agent.store.db_kind]
            hit = bool(tokens & kind_words) or agent.store.db_name.lower() in tokens
            if not hit and mentioned:
                for report in self.recent_reports:
                    if report.agent_id != agent.spec.agent_id:
                        continue
                    for key in report.correlation_keys:
                        if key in mentioned or any(
                            self.topology.linked(key, m) for m in mentioned
                        ):
                            hit = True
                            break
                    if hit:
                        break
            if hit:
                selected.append(agent.spec.agent_id)
        if not selected:
            selected = [a.spec.agent_id for a in self._sorted_agents()]
        return [PlanStep(target=t, question=question) for t in selected]

    def _sorted_agents(self) -> list[ScopedAgent]:
        return [self.agents[k] for k in sorted(self.agents)]

    def _synthesize(self, plan: AgentPlan) -> tuple[str, bool]:
        lines = []
        failed = [s for s in plan.steps if s.status == STEP_FAILED]
        answered = [s for s in plan.steps if s.status == STEP_DONE]
        for step in plan.steps:
            if step.status == STEP_DONE:
                lines.append(f"From {step.target}: {step.answer}")
            else:
                lines.append(f"From {step.target}: scope unavailable ({step.error})")
        if answered and all(_NO_FINDINGS_RE.search(s.answer) for s in answered) and not failed:
            header = "No anomalies reported in the queried window."
        elif failed:
            missing = ", ".join(s.target for s in failed)
            header = f"Partial results; missing scopes: {missing}."
        else:
            header = f"Findings from {len(answered)} scope(s):"
        return header + "\n" + "\n".join(lines), bool(failed)


SCOPED_ROLE_PROMPT = (
    "You are the monitoring agent for the {db_name} database ({db_kind}). "
    "Answer questions strictly from your own scope using the provided tools. "
    "Share only aggregates, anomaly events, and entity keys - never raw records."
)
COORDINATOR_ROLE_PROMPT = (
    "You coordinate the scoped database agents. Decompose each operator question "
    "into per-agent sub-questions, collect the findings, and answer with citations."
)

SCOPE_TOOL_NAMES = (
    "list_entities",
    "store_info",
    "query_window",
    "window_stats",
    "detect_anomalies",
    "forecast",
    "summarize_scope",
)

MAX_RECENT_REPORTS = 100


class AgentRuntime:
    """Everything behind the gateway: stores, one agent per store, the
    coordinator, the bus, and the audit trail."""

    def __init__(
        self,
        stores: dict[str, TelemetryStore],
        detector_cfgs: dict[str, DetectorConfig],
        topology: TopologyMap,
        backend,
        backend_cfg: BackendConfig | None = None,
        audit: AuditLog | None = None,
        clock=None,
        step_budget: int = DEFAULT_STEP_BUDGET,
    ):
        self.audit = audit or AuditLog()
        self.bus = MessageBus(self.audit, clock)
        self.topology = topology
        self.stores = stores
        self.recent_reports: list[PatternReport] = []
        self.agents: dict[str, ScopedAgent] = {}
        for kind in sorted(stores):
            store = stores[kind]
            spec = AgentSpec(
                agent_id=f"agent-{store.db_name}",
                scope=store.db_name,
                tool_whitelist=SCOPE_TOOL_NAMES,
                role_prompt=SCOPED_ROLE_PROMPT.format(
                    db_name=store.db_name, db_kind=store.db_kind
                ),
            )
            self.bus.register(spec.agent_id, spec.scope)
            self.agents[spec.agent_id] = ScopedAgent(
                spec,
                store,
                detector_cfgs.get(kind, DetectorConfig()),
                backend,
                backend_cfg,
                self.bus,
                topology,
                step_budget,
            )
        coord_spec = AgentSpec(
            agent_id="coordinator",
            scope="",
            tool_whitelist=("plan_steps",),
            role_prompt=COORDINATOR_ROLE_PROMPT,
        )
        self.bus.register(coord_spec.agent_id, "")
        self.coordinator = Coordinator(
            coord_spec,
            self.agents,
            backend,
            backend_cfg,
            self.bus,
            topology,
            self.recent_reports,
            step_budget,
        )

    def tick(self, windows: dict[str, tuple[int, int]] | None = None) -> list[PatternReport]:
        """One monitoring pass over every agent's newest complete window.

        A failing agent is logged and skipped; it never blocks the others.
        ``windows`` may pin an explicit window per agent id for tests.
        """
        reports = []
        for agent_id in sorted(self.agents):
            agent = self.agents[agent_id]
            window = (windows or {}).get(agent_id) or agent.tools.newest_window()
            if window is None:
                continue
            try:
                report = agent.tick(window)
            except Exception as exc:
                self.audit.log("tick_error", agent=agent_id, error=str(exc))
                continue
            if report is not None:
                reports.append(report)
                self.recent_reports.append(report)
        del self.recent_reports[:-MAX_RECENT_REPORTS]
        return reports

    def ask(
        self,
        question: str,
        history: list[ChatTurn] | None = None,
        plan_cache: dict | None = None,
    ) -> CoordinatorResult:
        return self.coordinator.coordinate(question, history, plan_cache)
