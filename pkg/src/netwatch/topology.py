"""Operator-supplied topology: which interface carries which optical port
and which booth an interface serves.

This map is how findings from different databases get tied to the same
physical equipment; nothing in the telemetry itself crosses databases.
File format, one association per line::

    link iface=booth12-eth0 port=opt03
    link iface=booth12-eth0 booth=booth12
"""

from __future__ import annotations

from collections import defaultdict

from .records import TelemetryError


class TopologyFormatError(TelemetryError):
    pass


class TopologyMap:
    """Undirected association graph over interface, port, and booth ids.

    An interface maps to at most one optical port. Two entities are
    considered linked when they are directly associated or share an
    associated entity (e.g. two interfaces of one booth, or a booth and
    the port behind one of its interfaces).
    """

    def __init__(self) -> None:
        self._adj: dict[str, set[str]] = defaultdict(set)
        self._iface_port: dict[str, str] = {}
        self._iface_booths: dict[str, set[str]] = defaultdict(set)

    def add_iface_port(self, iface: str, port: str) -> None:
        existing = self._iface_port.get(iface)
        if existing is not None and existing != port:
            raise TopologyFormatError(
                f"interface {iface} already mapped to port {existing}, cannot also map {port}"
            )
        self._iface_port[iface] = port
        self._adj[iface].add(port)
        self._adj[port].add(iface)

    def add_iface_booth(self, iface: str, booth: str) -> None:
        self._iface_booths[iface].add(booth)
        self._adj[iface].add(booth)
        self._adj[booth].add(iface)

    def port_of(self, iface: str) -> str | None:
        return self._iface_port.get(iface)

    def neighbors(self, entity: str) -> set[str]:
        return set(self._adj.get(entity, ()))

    def linked(self, a: str, b: str) -> bool:
        """Same entity, direct association, or one shared association."""
        if a == b:
            return True
        adj_a = self._adj.get(a, set())
        if b in adj_a:
            return True
        return bool(adj_a & self._adj.get(b, set()))

    def entities(self) -> list[str]:
        return sorted(self._adj)

    @classmethod
    def from_lines(cls, lines) -> "TopologyMap":
        topo = cls()
        for line_no, line in enumerate(lines, start=1):
            stripped = line.strip()
            if not stripped or stripped.startswith("#"):
                continue
            tokens = stripped.split()
            if tokens[0] != "link" or len(tokens) != 3:
                raise TopologyFormatError(f"line {line_no}: expected 'link key=v key=v'")
            pairs = {}
            for token in tokens[1:]:
                key, sep, value = token.partition("=")
                if not sep or not value:
                    raise TopologyFormatError(f"line {line_no}: bad token {token!r}")
                pairs[key] = value
            if set(pairs) == {"iface", "port"}:
                topo.add_iface_port(pairs["iface"], pairs["port"])
            elif set(pairs) == {"iface", "booth"}:
                topo.add_iface_booth(pairs["iface"], pairs["booth"])
            else:
                raise TopologyFormatError(
                    f"line {line_no}: unknown association {sorted(pairs)}"
                )
        return topo

    @classmethod
    def load(cls, path: str) -> "TopologyMap":
        with open(path, "r", encoding="utf-8") as fh:
            return cls.from_lines(fh)

    def dump_lines(self) -> list[str]:
        lines = []
        for iface in sorted(self._iface_port):
            lines.append(f"link iface={iface} port={self._iface_port[iface]}")
        for iface in sorted(self._iface_booths):
            for booth in sorted(self._iface_booths[iface]):
                lines.append(f"link iface={iface} booth={booth}")
        return lines
