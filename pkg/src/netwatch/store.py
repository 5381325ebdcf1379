"""Append-only per-kind time-series stores with windowed queries.

One store holds one database kind (interface, flow, optical) and is the
isolation boundary agents are scoped to. Appends may arrive out of order;
queries sort. Windows are half-open [t_start, t_end) so adjacent windows
partition time.

Persistence is a single checksummed file: magic ``NWTS``, version u16 LE,
kind tag u8, length-prefixed records in the telemetry line format, trailing
CRC-32 of the record region.
"""

from __future__ import annotations

import struct
import threading
import zlib
from dataclasses import dataclass

import numpy as np

from .lineformat import format_record, parse_record
from .rates import rate_series
from .records import (
    DB_KINDS,
    KIND_FLOW,
    KIND_INTERFACE,
    KIND_OPTICAL,
    FlowRecord,
    OpticalSample,
    TelemetryError,
    TelemetrySample,
    record_kind,
)

MAGIC = b"NWTS"
FORMAT_VERSION = 1
_KIND_TAGS = {KIND_INTERFACE: 1, KIND_FLOW: 2, KIND_OPTICAL: 3}
_TAG_KINDS = {v: k for k, v in _KIND_TAGS.items()}

RAW_METRICS = {
    KIND_INTERFACE: ("pkts_in", "pkts_out", "octets_in", "octets_out", "errs_in", "errs_out"),
    KIND_FLOW: ("bytes", "packets"),
    KIND_OPTICAL: ("tx_power_dbm", "rx_power_dbm"),
}
DERIVED_METRICS = {
    KIND_INTERFACE: ("pps_in", "pps_out", "bps_in", "bps_out", "eps_in", "eps_out"),
    KIND_FLOW: (),
    KIND_OPTICAL: (),
}


class StoreError(TelemetryError):
    pass


class KindMismatch(StoreError):
    pass


class UnknownMetric(StoreError):
    pass


class UnknownEntity(StoreError):
    pass


class CorruptFile(StoreError):
    pass


class VersionMismatch(StoreError):
    pass


@dataclass(frozen=True)
class WindowQuery:
    """Half-open window query, optionally filtered to one entity and
    mean-resampled onto a step grid."""

    metric: str
    t_start: int
    t_end: int
    entity_id: str | None = None
    step_s: int | None = None

    def __post_init__(self) -> None:
        if self.t_end <= self.t_start:
            raise ValueError(f"t_end={self.t_end} must be > t_start={self.t_start}")
        if self.step_s is not None and self.step_s <= 0:
            raise ValueError(f"step_s={self.step_s} must be > 0")


def _entity_of(record) -> str:
    if isinstance(record, TelemetrySample):
        return record.interface_id
    if isinstance(record, FlowRecord):
        return record.entity_id
    return record.port_id


def _ts_of(record) -> int:
    if isinstance(record, FlowRecord):
        return record.end_ts
    return record.timestamp


class TelemetryStore:
    """Append-only store for one database kind.

    Thread safety: one appender and any number of readers; a lock makes each
    append and each query atomic, so readers always see whole records.
    """

    def __init__(self, db_kind: str, db_name: str = ""):
        if db_kind not in DB_KINDS:
            raise ValueError(f"unknown db kind {db_kind!r}")
        self.db_kind = db_kind
        self.db_name = db_name or db_kind
        self._records: list = []
        self._by_entity: dict[str, list] = {}
        self._sorted: dict[str, bool] = {}
        self._rate_cache: dict[str, list] = {}
        self._lock = threading.RLock()

    @property
    def record_count(self) -> int:
        return len(self._records)

    def metrics(self) -> tuple[str, ...]:
        return RAW_METRICS[self.db_kind] + DERIVED_METRICS[self.db_kind]

    def append(self, record) -> int:
        """Append one validated record of the store's kind; returns the new count."""
        kind = record_kind(record)
        if kind != self.db_kind:
            raise KindMismatch(f"cannot append {kind} record to {self.db_kind} store")
        with self._lock:
            self._records.append(record)
            entity = _entity_of(record)
            bucket = self._by_entity.setdefault(entity, [])
            if bucket and _ts_of(bucket[-1]) > _ts_of(record):
                self._sorted[entity] = False
            bucket.append(record)
            self._rate_cache.pop(entity, None)
            return len(self._records)

    def extend(self, records) -> int:
        for record in records:
            self.append(record)
        return self.record_count

    def list_entities(self) -> list[str]:
        """Every entity with at least one record, lexicographically sorted."""
        with self._lock:
            return sorted(self._by_entity)

    def time_coverage(self) -> tuple[int, int] | None:
        """(min_ts, max_ts) over all records, or None when empty."""
        with self._lock:
            if not self._records:
                return None
            ts = [_ts_of(r) for r in self._records]
            return min(ts), max(ts)

    def _entity_records(self, entity: str) -> list:
        bucket = self._by_entity[entity]
        if not self._sorted.get(entity, True):
            bucket.sort(key=_ts_of)
            self._sorted[entity] = True
        return bucket

    def _entity_points(self, entity: str, metric: str) -> list[tuple[int, float]]:
        if metric in RAW_METRICS[self.db_kind]:
            return [(_ts_of(r), float(getattr(r, metric))) for r in self._entity_records(entity)]
        # derived interface rates; reset samples contribute zero rates
        cached = self._rate_cache.get(entity)
        if cached is None:
            cached = rate_series(self._entity_records(entity))
            self._rate_cache[entity] = cached
        return [(r.timestamp, float(getattr(r, metric))) for r in cached]

    def query_window(self, q: WindowQuery) -> list[tuple[int, float]]:
        """Stored (timestamp, value) points with t_start <= ts < t_end.

        Ascending by timestamp (ties broken by entity id). With ``step_s``
        the points are mean-resampled onto the step grid anchored at
        t_start; empty steps are omitted.
        """
        with self._lock:
            if q.metric not in self.metrics():
                raise UnknownMetric(f"{q.metric!r} not a {self.db_kind} metric")
            if q.entity_id is not None:
                if q.entity_id not in self._by_entity:
                    raise UnknownEntity(q.entity_id)
                entities = [q.entity_id]
            else:
                entities = sorted(self._by_entity)
            points: list[tuple[int, float, str]] = []
            for entity in entities:
                for ts, value in self._entity_points(entity, q.metric):
                    if q.t_start <= ts < q.t_end:
                        points.append((ts, value, entity))
            points.sort(key=lambda p: (p[0], p[2]))
            series = [(ts, value) for ts, value, _ in points]
            if q.step_s is None:
                return series
            return _resample_mean(series, q.t_start, q.t_end, q.step_s)

    def persist(self, path: str) -> str:
        """Write the store to a checksummed file; returns the path."""
        with self._lock:
            body = bytearray()
            for record in self._records:
                line = format_record(record).encode("utf-8")
                body += struct.pack("<I", len(line))
                body += line
            header = MAGIC + struct.pack("<HB", FORMAT_VERSION, _KIND_TAGS[self.db_kind])
            checksum = struct.pack("<I", zlib.crc32(bytes(body)) & 0xFFFFFFFF)
        try:
            with open(path, "wb") as fh:
                fh.write(header)
                fh.write(body)
                fh.write(checksum)
        except OSError as exc:
            raise StoreError(f"storage io failure: {exc}") from exc
        return path

    @classmethod
    def open(cls, path: str, db_name: str = "") -> "TelemetryStore":
        """Open a persisted store; behavior-identical to the one persisted."""
        try:
            with open(path, "rb") as fh:
                blob = fh.read()
        except OSError as exc:
            raise StoreError(f"storage io failure: {exc}") from exc
        if len(blob) < 11 or blob[:4] != MAGIC:
            raise CorruptFile(f"{path}: bad magic")
        version, tag = struct.unpack_from("<HB", blob, 4)
        if version != FORMAT_VERSION:
            raise VersionMismatch(f"{path}: version {version}, expected {FORMAT_VERSION}")
        if tag not in _TAG_KINDS:
            raise CorruptFile(f"{path}: unknown kind tag {tag}")
        body = blob[7:-4]
        (stored_crc,) = struct.unpack("<I", blob[-4:])
        if zlib.crc32(body) & 0xFFFFFFFF != stored_crc:
            raise CorruptFile(f"{path}: checksum mismatch")
        store = cls(_TAG_KINDS[tag], db_name=db_name or _name_from_path(path))
        offset = 0
        while offset < len(body):
            if offset + 4 > len(body):
                raise CorruptFile(f"{path}: truncated record length at {offset}")
            (length,) = struct.unpack_from("<I", body, offset)
            offset += 4
            if offset + length > len(body):
                raise CorruptFile(f"{path}: truncated record at {offset}")
            line = body[offset : offset + length].decode("utf-8")
            offset += length
            try:
                store.append(parse_record(line, kind=store.db_kind))
            except TelemetryError as exc:
                raise CorruptFile(f"{path}: invalid stored record: {exc}") from exc
        return store


def _resample_mean(
    series: list[tuple[int, float]], t_start: int, t_end: int, step_s: int
) -> list[tuple[int, float]]:
    if not series:
        return []
    n_steps = -(-(t_end - t_start) // step_s)
    ts = np.array([p[0] for p in series], dtype=np.int64)
    values = np.array([p[1] for p in series], dtype=np.float64)
    from . import kernels

    sums, counts = kernels.window_sums(ts, values, t_start, step_s, n_steps)
    out = []
    for k in range(n_steps):
        if counts[k] > 0:
            out.append((t_start + k * step_s, float(sums[k] / counts[k])))
    return out


def _name_from_path(path: str) -> str:
    import os

    return os.path.splitext(os.path.basename(path))[0]
