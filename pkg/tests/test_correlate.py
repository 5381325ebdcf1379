from __future__ import annotations

import itertools

import pytest

from netwatch.correlate import (
    DEFAULT_MERGE_GAP_S,
    Incident,
    correlate,
    kind_for_metric,
    rank_root_cause,
)
from netwatch.detect import AnomalyEvent
from netwatch.agents import PatternReport
from netwatch.topology import TopologyFormatError, TopologyMap

H = 3600
T0 = 1712001600


def topo_fixture() -> TopologyMap:
    return TopologyMap.from_lines(
        [
            "link iface=booth01-eth0 port=opt01",
            "link iface=booth01-eth0 booth=booth01",
            "link iface=booth02-eth0 port=opt02",
            "link iface=booth02-eth0 booth=booth02",
            "# comment",
            "",
        ]
    )


def event(entity, metric, w_start, severity="critical", score=9.0, direction="high"):
    return AnomalyEvent(
        entity_id=entity, metric=metric, window_start=w_start, window_end=w_start + H,
        observed=1.0, score=score, severity=severity, direction=direction,
    )


def report(agent_id, events, rid="r1"):
    if not events:
        window = (T0, T0 + H)
    else:
        window = (min(e.window_start for e in events), max(e.window_end for e in events))
    return PatternReport(
        report_id=rid, agent_id=agent_id, window_start=window[0], window_end=window[1],
        events=tuple(events), summary="s", correlation_keys=tuple(sorted({e.entity_id for e in events})),
    )


# --- topology -------------------------------------------------------------------

def test_topology_links():
    topo = topo_fixture()
    assert topo.linked("booth01-eth0", "opt01")
    assert topo.linked("opt01", "booth01")  # via the shared interface
    assert topo.linked("booth01-eth0", "booth01-eth0")
    assert not topo.linked("booth01-eth0", "opt02")
    assert not topo.linked("opt01", "opt02")
    assert topo.port_of("booth01-eth0") == "opt01"
    assert topo.port_of("booth02-eth0") == "opt02"


def test_topology_one_port_per_interface():
    topo = topo_fixture()
    with pytest.raises(TopologyFormatError):
        topo.add_iface_port("booth01-eth0", "opt09")
    topo.add_iface_port("booth01-eth0", "opt01")  # same pair is idempotent


def test_topology_bad_lines():
    for bad in ("link iface=a", "link iface=a port=b booth=c", "nonsense", "link a=b c=d"):
        with pytest.raises(TopologyFormatError):
            TopologyMap.from_lines([bad])


def test_topology_dump_roundtrip():
    topo = topo_fixture()
    again = TopologyMap.from_lines(topo.dump_lines())
    assert again.dump_lines() == topo.dump_lines()


# --- correlate ------------------------------------------------------------------

def test_single_event_single_incident():
    topo = topo_fixture()
    incidents = correlate([report("agent-interface", [event("booth01-eth0", "pps_in", T0)])], topo)
    assert len(incidents) == 1
    assert incidents[0].window_start == T0
    assert incidents[0].hypotheses == (("interface fault on booth01-eth0", 1.0),)


def test_linked_overlapping_events_merge():
    topo = topo_fixture()
    optical = event("opt01", "rx_power_dbm", T0, direction="low")
    errors = event("booth01-eth0", "eps_in", T0)
    incidents = correlate(
        [report("agent-optical", [optical]), report("agent-interface", [errors], rid="r2")], topo
    )
    assert len(incidents) == 1
    incident = incidents[0]
    assert len(incident.all_events()) == 2
    assert set(incident.members) == {"optical", "interface"}
    assert incident.hypotheses[0][0] == "optical degradation on opt01"


def test_unlinked_or_distant_events_stay_apart():
    topo = topo_fixture()
    # unlinked entities, same window
    incidents = correlate(
        [report("a", [event("booth01-eth0", "pps_in", T0), event("booth02-eth0", "pps_in", T0)])],
        topo,
    )
    assert len(incidents) == 2
    # linked entities, 2 h apart (beyond the merge gap)
    incidents = correlate(
        [report("a", [event("booth01-eth0", "eps_in", T0), event("opt01", "rx_power_dbm", T0 + 3 * H)])],
        topo,
    )
    assert len(incidents) == 2


def test_gap_tolerance_merges_adjacent_windows():
    topo = topo_fixture()
    a = event("opt01", "rx_power_dbm", T0)
    b = event("booth01-eth0", "eps_in", T0 + H)  # adjacent window, within gap
    incidents = correlate([report("x", [a, b])], topo)
    assert len(incidents) == 1
    assert incidents[0].window_start == T0
    assert incidents[0].window_end == T0 + 2 * H


def test_partition_property_and_dedup():
    topo = topo_fixture()
    events = [
        event("booth01-eth0", "pps_in", T0),
        event("opt01", "rx_power_dbm", T0),
        event("booth02-eth0", "pps_in", T0 + 5 * H),
    ]
    # the same events relayed in two different reports
    incidents = correlate([report("a", events), report("b", events, rid="r2")], topo)
    total = sum(len(i.all_events()) for i in incidents)
    assert total == 3  # every escalated event in exactly one incident, deduplicated


def test_order_invariance():
    topo = topo_fixture()
    reports = [
        report("a", [event("booth01-eth0", "pps_in", T0)], rid="r1"),
        report("b", [event("opt01", "rx_power_dbm", T0)], rid="r2"),
        report("c", [event("booth02-eth0", "eps_in", T0 + 2 * H)], rid="r3"),
    ]
    baseline = None
    for perm in itertools.permutations(reports):
        incidents = correlate(list(perm), topo)
        snapshot = [
            (i.window_start, tuple(i.entities()), i.hypotheses) for i in incidents
        ]
        if baseline is None:
            baseline = snapshot
        assert snapshot == baseline


def test_merge_idempotence():
    topo = topo_fixture()
    reports = [
        report("a", [event("opt01", "rx_power_dbm", T0), event("booth01-eth0", "eps_in", T0)]),
        report("b", [event("booth02-eth0", "pps_in", T0 + 6 * H)], rid="r2"),
    ]
    first = correlate(reports, topo)
    rereported = [
        report(f"re-{i}", incident.all_events(), rid=f"rr{i}")
        for i, incident in enumerate(first)
    ]
    second = correlate(rereported, topo)
    def partition(incidents):
        return sorted(tuple(sorted((e.entity_id, e.metric, e.window_start) for e in i.all_events()))
                      for i in incidents)
    assert partition(first) == partition(second)


def test_ranking_normalized_and_ordered():
    topo = topo_fixture()
    incidents = correlate(
        [report("a", [
            event("opt01", "rx_power_dbm", T0, direction="low"),
            event("booth01-eth0", "eps_in", T0),
            event("booth01-eth0", "pps_in", T0 + H),
        ])],
        topo,
    )
    (incident,) = incidents
    scores = [s for _, s in incident.hypotheses]
    assert sum(scores) == pytest.approx(1.0, abs=1e-9)
    assert scores == sorted(scores, reverse=True)


def test_temporal_precedence_breaks_layer_ties():
    topo = topo_fixture()
    # two interface-layer events on linked entities (same booth), later one second
    e1 = event("booth01-eth0", "pps_in", T0)
    e2 = event("booth01", "pps_in", T0 + H)  # booth id used as an entity
    (incident,) = correlate([report("a", [e1, e2])], topo)
    assert incident.hypotheses[0][0] == "interface fault on booth01-eth0"


def test_lexicographic_tiebreak():
    topo = TopologyMap.from_lines(["link iface=a booth=shared", "link iface=b booth=shared"])
    e1 = event("b", "pps_in", T0)
    e2 = event("a", "pps_in", T0)
    (incident,) = correlate([report("x", [e1, e2])], topo)
    assert incident.hypotheses[0][0] == "interface fault on a"
    # deterministic across runs
    (again,) = correlate([report("x", [e1, e2])], topo)
    assert again.hypotheses == incident.hypotheses


def test_kind_for_metric():
    assert kind_for_metric("rx_power_dbm") == "optical"
    assert kind_for_metric("eps_in") == "interface"
    assert kind_for_metric("bytes") == "flow"


def test_incident_invariants():
    with pytest.raises(ValueError):
        Incident(
            incident_id="x", window_start=0, window_end=1, members={},
            hypotheses=(),
        )
    with pytest.raises(ValueError):
        Incident(
            incident_id="x", window_start=0, window_end=1,
            members={"interface": (event("a", "pps_in", T0),)},
            hypotheses=(("a", 0.2), ("b", 0.5)),
        )
