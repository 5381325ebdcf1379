"""Telemetry record types for the three database kinds plus derived forms.

Raw records (:class:`TelemetrySample`, :class:`FlowRecord`,
:class:`OpticalSample`) are what collectors write into the stores. Derived
records (:class:`RateSample`, :class:`ConsolidatedBucket`) are computed from
counter deltas and window aggregation and never appear on the wire between
agents.
"""

from __future__ import annotations

from dataclasses import dataclass, fields
import math

COUNTER_MAX = 2**64

KIND_INTERFACE = "interface"
KIND_FLOW = "flow"
KIND_OPTICAL = "optical"
DB_KINDS = (KIND_INTERFACE, KIND_FLOW, KIND_OPTICAL)


class TelemetryError(Exception):
    """Base class for telemetry validation and parsing failures."""


class InvariantViolation(TelemetryError):
    """A record violates one of its type invariants."""

    def __init__(self, message: str, field: str = "", line_no: int | None = None):
        self.field = field
        self.line_no = line_no
        if line_no is not None:
            message = f"line {line_no}: {message}"
        super().__init__(message)


class MalformedLine(TelemetryError):
    """A line could not be tokenized or a field could not be parsed."""

    def __init__(self, message: str, field: str = "", line_no: int | None = None):
        self.field = field
        self.line_no = line_no
        if line_no is not None:
            message = f"line {line_no}: {message}"
        super().__init__(message)


def _check_counter(name: str, value: int) -> None:
    if not 0 <= value < COUNTER_MAX:
        raise InvariantViolation(f"{name}={value} outside [0, 2^64)", field=name)


@dataclass(frozen=True)
class TelemetrySample:
    """One interface poll: cumulative counters plus static interface facts."""

    timestamp: int
    interface_id: str
    pkts_in: int
    pkts_out: int
    octets_in: int
    octets_out: int
    errs_in: int
    errs_out: int
    speed_bps: int
    descr: str = ""

    def __post_init__(self) -> None:
        if self.timestamp <= 0:
            raise InvariantViolation(f"timestamp={self.timestamp} must be > 0", field="timestamp")
        if not self.interface_id:
            raise InvariantViolation("interface_id must be nonempty", field="interface_id")
        for name in ("pkts_in", "pkts_out", "octets_in", "octets_out", "errs_in", "errs_out"):
            _check_counter(name, getattr(self, name))
        if self.speed_bps < 0:
            raise InvariantViolation(f"speed_bps={self.speed_bps} must be >= 0", field="speed_bps")


@dataclass(frozen=True)
class FlowRecord:
    """One flow summary: endpoints, protocol, and byte/packet totals."""

    start_ts: int
    end_ts: int
    src_addr: str
    dst_addr: str
    src_port: int
    dst_port: int
    proto: int
    bytes: int
    packets: int

    def __post_init__(self) -> None:
        if self.start_ts <= 0:
            raise InvariantViolation(f"start_ts={self.start_ts} must be > 0", field="start_ts")
        if self.end_ts < self.start_ts:
            raise InvariantViolation(
                f"end_ts={self.end_ts} < start_ts={self.start_ts}", field="end_ts"
            )
        for name in ("src_port", "dst_port"):
            port = getattr(self, name)
            if not 0 <= port <= 65535:
                raise InvariantViolation(f"{name}={port} outside [0, 65535]", field=name)
        if not 0 <= self.proto <= 255:
            raise InvariantViolation(f"proto={self.proto} outside [0, 255]", field="proto")
        if self.bytes < 0 or self.packets < 0:
            raise InvariantViolation("bytes and packets must be nonnegative", field="bytes")
        if self.bytes > 0 and self.packets < 1:
            raise InvariantViolation("packets must be >= 1 when bytes > 0", field="packets")

    @property
    def entity_id(self) -> str:
        """Conversation key used by the flow store (ports aggregated away)."""
        return f"{self.src_addr}->{self.dst_addr}"


@dataclass(frozen=True)
class OpticalSample:
    """One optical power reading for a fiber port."""

    timestamp: int
    port_id: str
    tx_power_dbm: float
    rx_power_dbm: float

    def __post_init__(self) -> None:
        if self.timestamp <= 0:
            raise InvariantViolation(f"timestamp={self.timestamp} must be > 0", field="timestamp")
        if not self.port_id:
            raise InvariantViolation("port_id must be nonempty", field="port_id")
        for name in ("tx_power_dbm", "rx_power_dbm"):
            if not math.isfinite(getattr(self, name)):
                raise InvariantViolation(f"{name} must be finite", field=name)


@dataclass(frozen=True)
class RateSample:
    """Per-interval rates derived from two consecutive interface samples.

    ``timestamp`` marks the end of the interval. When ``reset`` is set a
    counter went backwards (wrap or device restart) and every rate is 0.
    """

    timestamp: int
    interface_id: str
    pps_in: float
    pps_out: float
    bps_in: float
    bps_out: float
    eps_in: float
    eps_out: float
    interval_s: float
    reset: bool = False

    def __post_init__(self) -> None:
        if self.interval_s <= 0:
            raise InvariantViolation(f"interval_s={self.interval_s} must be > 0", field="interval_s")
        rates = (self.pps_in, self.pps_out, self.bps_in, self.bps_out, self.eps_in, self.eps_out)
        if any(r < 0 for r in rates):
            raise InvariantViolation("rate fields must be >= 0", field="rates")
        if self.reset and any(r != 0 for r in rates):
            raise InvariantViolation("reset samples must carry all-zero rates", field="reset")


RATE_METRICS = ("pps_in", "pps_out", "bps_in", "bps_out", "eps_in", "eps_out")


@dataclass(frozen=True)
class ConsolidatedBucket:
    """Aggregates of one entity's rate metrics over one aligned window."""

    bucket_start: int
    entity_id: str
    window_s: int
    count: int
    sums: dict[str, float]
    means: dict[str, float]
    maxs: dict[str, float]
    mins: dict[str, float]

    def __post_init__(self) -> None:
        if self.count < 1:
            raise InvariantViolation(f"count={self.count} must be >= 1", field="count")
        for metric in self.sums:
            if not self.mins[metric] <= self.means[metric] <= self.maxs[metric]:
                raise InvariantViolation(
                    f"min <= mean <= max violated for {metric}", field=metric
                )


def record_kind(record: object) -> str:
    """Database kind a raw record belongs to; raises for non-raw types."""
    if isinstance(record, TelemetrySample):
        return KIND_INTERFACE
    if isinstance(record, FlowRecord):
        return KIND_FLOW
    if isinstance(record, OpticalSample):
        return KIND_OPTICAL
    raise TypeError(f"not a raw telemetry record: {type(record).__name__}")


RAW_RECORD_TYPES = (TelemetrySample, FlowRecord, OpticalSample)

# Field-name sets used by the isolation checker to spot raw records that were
# re-encoded as plain mappings before being smuggled into a message payload.
RAW_FIELD_SETS = {
    KIND_INTERFACE: frozenset(f.name for f in fields(TelemetrySample)),
    KIND_FLOW: frozenset(f.name for f in fields(FlowRecord)),
    KIND_OPTICAL: frozenset(f.name for f in fields(OpticalSample)),
}
