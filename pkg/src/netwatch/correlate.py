"""Cross-database incident correlation and root-cause ranking.

Events from different agents' pattern reports are grouped into one incident
when their entities are topologically linked and their windows overlap or
sit within a merge gap (default 900 s: optical degradation often precedes
counter-visible errors by minutes). Each incident gets rule-ranked cause
hypotheses: physical layer first, earlier onset first, wider blast radius
first.
"""

from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass, replace

from .detect import AnomalyEvent
from .records import KIND_FLOW, KIND_INTERFACE, KIND_OPTICAL
from .topology import TopologyMap

DEFAULT_MERGE_GAP_S = 900

STATUS_OPEN = "open"
STATUS_ACKNOWLEDGED = "acknowledged"
STATUS_RESOLVED = "resolved"

_LAYER_WEIGHT = {KIND_OPTICAL: 3.0, KIND_INTERFACE: 2.0, KIND_FLOW: 1.0}
_CAUSE_LABEL = {
    KIND_OPTICAL: "optical degradation on {entity}",
    KIND_INTERFACE: "interface fault on {entity}",
    KIND_FLOW: "traffic surge on {entity}",
}

_METRIC_KIND = {
    "pps_in": KIND_INTERFACE, "pps_out": KIND_INTERFACE,
    "bps_in": KIND_INTERFACE, "bps_out": KIND_INTERFACE,
    "eps_in": KIND_INTERFACE, "eps_out": KIND_INTERFACE,
    "pkts_in": KIND_INTERFACE, "pkts_out": KIND_INTERFACE,
    "octets_in": KIND_INTERFACE, "octets_out": KIND_INTERFACE,
    "errs_in": KIND_INTERFACE, "errs_out": KIND_INTERFACE,
    "bytes": KIND_FLOW, "packets": KIND_FLOW,
    "tx_power_dbm": KIND_OPTICAL, "rx_power_dbm": KIND_OPTICAL,
}


def kind_for_metric(metric: str) -> str:
    return _METRIC_KIND[metric]


@dataclass(frozen=True)
class Incident:
    incident_id: str
    window_start: int
    window_end: int
    members: dict[str, tuple[AnomalyEvent, ...]]  # db kind -> events
    hypotheses: tuple[tuple[str, float], ...]  # (cause label, score), non-increasing
    status: str = STATUS_OPEN

    def __post_init__(self) -> None:
        if not any(self.members.values()):
            raise ValueError("incident needs at least one member event")
        scores = [s for _, s in self.hypotheses]
        if any(scores[i] < scores[i + 1] for i in range(len(scores) - 1)):
            raise ValueError("hypothesis scores must be non-increasing")
        if sum(scores) > 1.0 + 1e-9:
            raise ValueError("hypothesis scores must sum to <= 1")

    def all_events(self) -> list[AnomalyEvent]:
        out = []
        for kind in sorted(self.members):
            out.extend(self.members[kind])
        return out

    def entities(self) -> list[str]:
        return sorted({e.entity_id for e in self.all_events()})

    def with_status(self, status: str) -> "Incident":
        return replace(self, status=status)


def _windows_close(a: AnomalyEvent, b: AnomalyEvent, gap_s: int) -> bool:
    return a.window_start <= b.window_end + gap_s and b.window_start <= a.window_end + gap_s


def correlate(reports, topo: TopologyMap, gap_s: int = DEFAULT_MERGE_GAP_S) -> list[Incident]:
    """Partition all report events into incidents.

    The grouping relation (linked entities + close windows) is symmetric,
    so the transitive closure is order-invariant: permuting the input
    reports cannot change the partition. Events are deduplicated first;
    the same event relayed by two reports is one member.
    """
    seen = {}
    for report in reports:
        for event in report.events:
            seen[(event.entity_id, event.metric, event.window_start, event.window_end)] = event
    events = sorted(
        seen.values(), key=lambda e: (e.window_start, e.entity_id, e.metric, e.window_end)
    )
    n = len(events)
    parent = list(range(n))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    def union(i, j):
        ri, rj = find(i), find(j)
        if ri != rj:
            parent[max(ri, rj)] = min(ri, rj)

    for i in range(n):
        for j in range(i + 1, n):
            a, b = events[i], events[j]
            if _windows_close(a, b, gap_s) and topo.linked(a.entity_id, b.entity_id):
                union(i, j)

    groups: dict[int, list[AnomalyEvent]] = defaultdict(list)
    for i, event in enumerate(events):
        groups[find(i)].append(event)

    incidents = []
    for seq, root in enumerate(sorted(groups), start=1):
        members = groups[root]
        by_kind: dict[str, list[AnomalyEvent]] = defaultdict(list)
        for event in members:
            by_kind[kind_for_metric(event.metric)].append(event)
        incident = Incident(
            incident_id=f"inc-{seq:04d}",
            window_start=min(e.window_start for e in members),
            window_end=max(e.window_end for e in members),
            members={k: tuple(v) for k, v in sorted(by_kind.items())},
            hypotheses=(),
        )
        incidents.append(replace(incident, hypotheses=rank_root_cause(incident, topo)))
    return incidents


def rank_root_cause(incident: Incident, topo: TopologyMap) -> tuple[tuple[str, float], ...]:
    """Rule-based cause ranking over the incident's (kind, entity) candidates.

    Raw score = layer precedence (optical > interface > flow)
              + 1.0 if the candidate has the earliest onset
              + 0.5 * fraction of other member entities linked to it.
    Scores are normalized to sum to 1; ties break by earlier onset then
    lexicographic entity id, so the order is total and deterministic.
    """
    events = incident.all_events()
    candidates: dict[tuple[str, str], list[AnomalyEvent]] = defaultdict(list)
    for event in events:
        candidates[(kind_for_metric(event.metric), event.entity_id)].append(event)
    earliest = min(e.window_start for e in events)
    entities = {e.entity_id for e in events}

    rows = []
    for (kind, entity), evs in candidates.items():
        onset = min(e.window_start for e in evs)
        others = entities - {entity}
        breadth = (
            sum(1 for other in others if topo.linked(entity, other)) / len(others)
            if others
            else 0.0
        )
        raw = _LAYER_WEIGHT[kind] + (1.0 if onset == earliest else 0.0) + 0.5 * breadth
        rows.append((raw, onset, entity, _CAUSE_LABEL[kind].format(entity=entity)))

    rows.sort(key=lambda r: (-r[0], r[1], r[2]))
    total = sum(r[0] for r in rows)
    return tuple((label, raw / total) for raw, _, _, label in rows)
