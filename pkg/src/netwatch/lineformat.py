"""Line-delimited text format for telemetry records.

One record per line, UTF-8: a ``kind=`` token followed by ``key=value``
pairs separated by single spaces. ``descr`` is always the last field of an
interface line and may contain spaces. Canonical interface line::

    kind=iface ts=1712000000 if=booth12-eth0 pkts_in=182 pkts_out=44 \
octets_in=120031 octets_out=9920 errs_in=0 errs_out=0 speed=10000000000 \
descr=Booth12-Uplink

The parser also accepts the long field names from the record definitions
(``timestamp=``, ``interface_id=``, ``speed_bps=``, ``port_id=``) as aliases
for the short canonical keys.
"""

from __future__ import annotations

from typing import Iterable, Iterator

from .records import (
    KIND_FLOW,
    KIND_INTERFACE,
    KIND_OPTICAL,
    FlowRecord,
    InvariantViolation,
    MalformedLine,
    OpticalSample,
    TelemetrySample,
)

KIND_TOKENS = {"iface": KIND_INTERFACE, "flow": KIND_FLOW, "optical": KIND_OPTICAL}
TOKEN_FOR_KIND = {v: k for k, v in KIND_TOKENS.items()}

# (canonical key, record attribute, converter); order defines the canonical line.
_IFACE_FIELDS = (
    ("ts", "timestamp", int),
    ("if", "interface_id", str),
    ("pkts_in", "pkts_in", int),
    ("pkts_out", "pkts_out", int),
    ("octets_in", "octets_in", int),
    ("octets_out", "octets_out", int),
    ("errs_in", "errs_in", int),
    ("errs_out", "errs_out", int),
    ("speed", "speed_bps", int),
    ("descr", "descr", str),
)
_FLOW_FIELDS = (
    ("start_ts", "start_ts", int),
    ("end_ts", "end_ts", int),
    ("src_addr", "src_addr", str),
    ("dst_addr", "dst_addr", str),
    ("src_port", "src_port", int),
    ("dst_port", "dst_port", int),
    ("proto", "proto", int),
    ("bytes", "bytes", int),
    ("packets", "packets", int),
)
_OPTICAL_FIELDS = (
    ("ts", "timestamp", int),
    ("port", "port_id", str),
    ("tx_power_dbm", "tx_power_dbm", float),
    ("rx_power_dbm", "rx_power_dbm", float),
)

_FIELDS_FOR_KIND = {
    KIND_INTERFACE: _IFACE_FIELDS,
    KIND_FLOW: _FLOW_FIELDS,
    KIND_OPTICAL: _OPTICAL_FIELDS,
}
_TYPE_FOR_KIND = {
    KIND_INTERFACE: TelemetrySample,
    KIND_FLOW: FlowRecord,
    KIND_OPTICAL: OpticalSample,
}

# Long-name aliases accepted on parse (attribute name -> canonical key).
_ALIASES = {
    KIND_INTERFACE: {"timestamp": "ts", "interface_id": "if", "speed_bps": "speed"},
    KIND_FLOW: {},
    KIND_OPTICAL: {"timestamp": "ts", "port_id": "port"},
}


def _parse_int(key: str, raw: str, line_no: int | None) -> int:
    try:
        return int(raw, 10)
    except ValueError:
        raise MalformedLine(f"field {key}={raw!r} is not a decimal integer", field=key, line_no=line_no)


def _parse_float(key: str, raw: str, line_no: int | None) -> float:
    try:
        return float(raw)
    except ValueError:
        raise MalformedLine(f"field {key}={raw!r} is not a decimal real", field=key, line_no=line_no)


def parse_record(
    line: str, kind: str | None = None, line_no: int | None = None
) -> TelemetrySample | FlowRecord | OpticalSample:
    """Parse one telemetry line into a validated record.

    ``kind``, when given, is the expected database kind; a line of another
    kind raises :class:`MalformedLine`. Invariant failures raise
    :class:`InvariantViolation` carrying the field name and ``line_no``.
    """
    stripped = line.rstrip("\n")
    if not stripped.strip():
        raise MalformedLine("empty line", line_no=line_no)
    tokens = stripped.split(" ")
    if "=" not in tokens[0]:
        raise MalformedLine(f"expected key=value tokens, got {tokens[0]!r}", line_no=line_no)
    first_key, _, first_val = tokens[0].partition("=")
    if first_key != "kind":
        raise MalformedLine("first token must be kind=...", field="kind", line_no=line_no)
    if first_val not in KIND_TOKENS:
        raise MalformedLine(f"unknown kind {first_val!r}", field="kind", line_no=line_no)
    line_kind = KIND_TOKENS[first_val]
    if kind is not None and line_kind != kind:
        raise MalformedLine(
            f"expected kind={TOKEN_FOR_KIND[kind]}, got {first_val}", field="kind", line_no=line_no
        )

    field_defs = _FIELDS_FOR_KIND[line_kind]
    aliases = _ALIASES[line_kind]
    raw: dict[str, str] = {}
    body = tokens[1:]
    for i, token in enumerate(body):
        if "=" not in token:
            raise MalformedLine(f"token {token!r} is not key=value", line_no=line_no)
        key, _, value = token.partition("=")
        key = aliases.get(key, key)
        if key == "descr":
            # descr is the trailing field and may contain spaces
            value = " ".join([value] + body[i + 1 :])
            if key in raw:
                raise MalformedLine("duplicate field descr", field="descr", line_no=line_no)
            raw[key] = value
            break
        if key in raw:
            raise MalformedLine(f"duplicate field {key}", field=key, line_no=line_no)
        raw[key] = value

    known = {k for k, _, _ in field_defs}
    for key in raw:
        if key not in known:
            raise MalformedLine(f"unknown field {key!r}", field=key, line_no=line_no)

    kwargs = {}
    for key, attr, conv in field_defs:
        if key not in raw:
            if key == "descr":
                kwargs[attr] = ""
                continue
            raise MalformedLine(f"missing field {key}", field=key, line_no=line_no)
        value = raw[key]
        if conv is int:
            kwargs[attr] = _parse_int(key, value, line_no)
        elif conv is float:
            kwargs[attr] = _parse_float(key, value, line_no)
        else:
            kwargs[attr] = value

    try:
        return _TYPE_FOR_KIND[line_kind](**kwargs)
    except InvariantViolation as exc:
        raise InvariantViolation(str(exc), field=exc.field, line_no=line_no) from None


def format_record(record: TelemetrySample | FlowRecord | OpticalSample) -> str:
    """Render a record as its canonical line; inverse of :func:`parse_record`."""
    from .records import record_kind

    kind = record_kind(record)
    parts = [f"kind={TOKEN_FOR_KIND[kind]}"]
    for key, attr, conv in _FIELDS_FOR_KIND[kind]:
        value = getattr(record, attr)
        if conv is str and key != "descr":
            if not value or any(c.isspace() for c in value) or "=" in value:
                raise InvariantViolation(
                    f"field {key}={value!r} not representable in line format", field=key
                )
        if key == "descr":
            if "\n" in value:
                raise InvariantViolation("descr must not contain newlines", field="descr")
            parts.append(f"descr={value}")
            continue
        if conv is float:
            parts.append(f"{key}={value!r}")
        else:
            parts.append(f"{key}={value}")
    return " ".join(parts)


def parse_lines(
    lines: Iterable[str], kind: str | None = None
) -> tuple[list[TelemetrySample | FlowRecord | OpticalSample], list[TelemetryErrorInfo]]:
    """Parse many lines, collecting structured errors instead of raising.

    Blank lines and ``#`` comments are skipped. Returns (records, errors).
    """
    records: list[TelemetrySample | FlowRecord | OpticalSample] = []
    errors: list[TelemetryErrorInfo] = []
    for line_no, line in enumerate(lines, start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        try:
            records.append(parse_record(line, kind=kind, line_no=line_no))
        except (MalformedLine, InvariantViolation) as exc:
            errors.append(TelemetryErrorInfo(line_no=line_no, field=exc.field, message=str(exc)))
    return records, errors


class TelemetryErrorInfo:
    """One rejected line: where it failed and why."""

    __slots__ = ("line_no", "field", "message")

    def __init__(self, line_no: int, field: str, message: str):
        self.line_no = line_no
        self.field = field
        self.message = message

    def __repr__(self) -> str:
        return f"TelemetryErrorInfo(line_no={self.line_no}, field={self.field!r}, message={self.message!r})"


def read_telemetry_file(path: str) -> Iterator[str]:
    with open(path, "r", encoding="utf-8") as fh:
        yield from fh
