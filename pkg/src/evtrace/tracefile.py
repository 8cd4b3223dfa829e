"""Persistent trace format: header, wire EVENT frames, BYE terminator, footer.

Layout (all integers big-endian, strings u16-length-prefixed UTF-8):

    header  b"EVTR" | u16 format_version (= 1)
            | string scenario_name | string canonical_config_text
    body    zero or more EVENT frames exactly as they appeared on the wire,
            terminated by one BYE frame
    footer  b"EVTF" | u64 event_count | u64 sample_count
            | sample_count * (u64 event_id | u64 t_total_ns
                              | u64 t_capture_ns | u64 t_send_ns)

The BYE frame separates a clean end-of-body from truncation; the footer's
event_count must match the number of EVENT frames. Files are bit-exact for
identical inputs; golden files live under tests/data.
"""

from __future__ import annotations

import io
import os
import struct
from dataclasses import dataclass, field

from . import wire
from .agent import OverheadSample
from .model import EventMessage, InstrumentConfig, format_config, parse_config

MAGIC = b"EVTR"
FOOTER_MAGIC = b"EVTF"
FORMAT_VERSION = 1

_SAMPLE = struct.Struct(">QQQQ")


class TraceFormatError(Exception):
    pass


@dataclass
class TraceRecord:
    """One scenario run: ordered events plus per-event overhead samples.

    events may be left empty for large streamed runs; the trace file is then
    the durable copy.
    """

    scenario_name: str
    config: InstrumentConfig
    events: list[EventMessage] = field(default_factory=list)
    samples: list[OverheadSample] = field(default_factory=list)


@dataclass(frozen=True, slots=True)
class TraceMeta:
    scenario_name: str
    config: InstrumentConfig
    format_version: int


def _pack_str(text: str) -> bytes:
    raw = text.encode("utf-8")
    if len(raw) > 0xFFFF:
        raise TraceFormatError(f"string of {len(raw)} bytes exceeds the u16 length prefix")
    return struct.pack(">H", len(raw)) + raw


class TraceFileWriter:
    """Streams EVENT frames to a sink; close() writes the BYE and the footer.

    The sink is a path or a writable binary file object. Paths are opened and
    owned; file objects are flushed but left open for the caller. A sink
    failure is kept on `error`: once set, close() skips the terminator so the
    damaged file stays visibly truncated instead of reading as a clean short
    trace.
    """

    def __init__(self, sink, scenario_name: str, config: InstrumentConfig):
        if hasattr(sink, "write"):
            self._file = sink
            self._owned = False
        else:
            self._file = open(sink, "wb")
            self._owned = True
        self.scenario_name = scenario_name
        self.config = config
        self.event_count = 0
        self.error: Exception | None = None
        self._closed = False
        self._file.write(MAGIC)
        self._file.write(struct.pack(">H", FORMAT_VERSION))
        self._file.write(_pack_str(scenario_name))
        self._file.write(_pack_str(format_config(config)))

    def append(self, msg: EventMessage) -> None:
        if self._closed:
            raise TraceFormatError("trace writer is closed")
        self._file.write(wire.encode_frame(wire.event_frame(msg)))
        self.event_count += 1

    def close(self, samples=()) -> None:
        if self._closed:
            return
        self._closed = True
        try:
            if self.error is None:
                self._file.write(wire.encode_frame(wire.bye_frame()))
                self._file.write(FOOTER_MAGIC)
                samples = list(samples)
                self._file.write(struct.pack(">QQ", self.event_count, len(samples)))
                for s in samples:
                    self._file.write(
                        _SAMPLE.pack(s.event_id, s.t_total_ns, s.t_capture_ns, s.t_send_ns)
                    )
                self._file.flush()
        except Exception as exc:
            self.error = exc
        finally:
            if self._owned:
                try:
                    self._file.close()
                except OSError as exc:
                    if self.error is None:
                        self.error = exc


class TraceReader:
    """Sequential reader; events() streams, samples() skips ahead if needed."""

    def __init__(self, path):
        self._file = open(path, "rb")
        self._offset = 0
        self._events_done = False
        self._events_seen = 0
        try:
            self.meta = self._read_header()
        except Exception:
            self._file.close()
            raise

    def __enter__(self) -> "TraceReader":
        return self

    def __exit__(self, *exc) -> None:
        self.close()

    def close(self) -> None:
        self._file.close()

    def _read_exact(self, n: int, what: str) -> bytes:
        data = self._file.read(n)
        self._offset += len(data)
        if len(data) != n:
            raise TraceFormatError(
                f"trace truncated at byte {self._offset} while reading {what}"
            )
        return data

    def _read_str(self, what: str) -> str:
        (length,) = struct.unpack(">H", self._read_exact(2, f"{what} length"))
        return self._read_exact(length, what).decode("utf-8")

    def _read_header(self) -> TraceMeta:
        magic = self._read_exact(4, "magic")
        if magic != MAGIC:
            raise TraceFormatError(f"bad magic {magic!r}, expected {MAGIC!r}")
        (version,) = struct.unpack(">H", self._read_exact(2, "format version"))
        if version != FORMAT_VERSION:
            raise TraceFormatError(f"unsupported trace format version {version}")
        scenario = self._read_str("scenario name")
        config = parse_config(self._read_str("config text"))
        return TraceMeta(scenario, config, version)

    def _next_frame_header(self) -> tuple[int, int]:
        raw = self._read_exact(5, "frame header")
        length, kind = struct.unpack(">IB", raw)
        return length, kind

    def events(self):
        """Yield EventMessages in order; stops after the BYE terminator."""
        if self._events_done:
            return
        while True:
            start = self._offset
            length, kind = self._next_frame_header()
            if kind == wire.BYE:
                if length:
                    raise TraceFormatError(f"BYE frame at byte {start} has a payload")
                self._events_done = True
                return
            if kind != wire.EVENT:
                raise TraceFormatError(
                    f"unexpected frame kind 0x{kind:02X} at byte {start} in trace body"
                )
            payload = self._read_exact(length, "event payload")
            try:
                msg = wire.decode_event(payload, start + 5)
            except wire.MalformedFrame as exc:
                raise TraceFormatError(str(exc)) from None
            self._events_seen += 1
            yield msg

    def _skip_body(self) -> None:
        while not self._events_done:
            start = self._offset
            length, kind = self._next_frame_header()
            if kind == wire.BYE:
                self._events_done = True
                return
            if kind != wire.EVENT:
                raise TraceFormatError(
                    f"unexpected frame kind 0x{kind:02X} at byte {start} in trace body"
                )
            self._file.seek(length, io.SEEK_CUR)
            self._offset += length
            self._events_seen += 1

    def samples(self) -> list[OverheadSample]:
        """Read the footer samples, skipping any unread body frames first."""
        self._skip_body()
        magic = self._read_exact(4, "footer magic")
        if magic != FOOTER_MAGIC:
            raise TraceFormatError(f"bad footer magic {magic!r}, expected {FOOTER_MAGIC!r}")
        event_count, sample_count = struct.unpack(">QQ", self._read_exact(16, "footer counts"))
        if event_count != self._events_seen:
            raise TraceFormatError(
                f"footer claims {event_count} events, body holds {self._events_seen}"
            )
        out = []
        for _ in range(sample_count):
            event_id, t_total, t_capture, t_send = _SAMPLE.unpack(
                self._read_exact(_SAMPLE.size, "overhead sample")
            )
            out.append(OverheadSample(event_id, t_total, t_capture, t_send))
        trailing = self._file.read(1)
        if trailing:
            raise TraceFormatError(f"trailing bytes after footer at byte {self._offset}")
        return out


def write_trace(path, record: TraceRecord) -> None:
    writer = TraceFileWriter(path, record.scenario_name, record.config)
    for msg in record.events:
        writer.append(msg)
    writer.close(record.samples)
    if writer.error is not None:
        raise writer.error


def read_trace(path) -> TraceRecord:
    with TraceReader(path) as reader:
        events = list(reader.events())
        samples = reader.samples()
        return TraceRecord(
            scenario_name=reader.meta.scenario_name,
            config=reader.meta.config,
            events=events,
            samples=samples,
        )


def read_trace_meta(path) -> TraceMeta:
    reader = TraceReader(path)
    try:
        return reader.meta
    finally:
        reader.close()
