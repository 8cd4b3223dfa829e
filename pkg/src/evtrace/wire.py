"""Bit-exact binary framing for the agent/host byte stream.

Protocol version 1. All integers are big-endian. The layout below is the
external protocol; `conformance/wire_vectors.txt` in the repository root holds
normative golden frames as hex dumps.

    frame     := u32 payload_length | u8 kind | payload
    kind      := HELLO 0x01 | CONFIG 0x02 | EVENT 0x03 | BYE 0x04
    string    := u16 byte_length | UTF-8 bytes
    optional  := u8 presence (0 or 1), value follows only when 1

    HELLO payload (agent -> host, first frame on accept):
        u16 protocol_version | string agent_name | string toolkit_name

    CONFIG payload (host -> agent, exactly once, directly after HELLO):
        u8 granularity (0 = ALL, 1 = HANDLED)
        u16 ignored_count, then ignored_count strings, name-sorted
        u8 capture_screenshots (0 or 1)

    EVENT payload (agent -> host), fields in this order:
        u64 id | string source_class | i32 index_in_parent
        i32 x | i32 y | i32 width | i32 height
        optional screenshot: u32 width | u32 height | raw RGBA bytes
            (length = width * height * 4, no extra length prefix)
        string event_type
        u16 timer_count, then per timer: string name | u64 value_ns, name-sorted
        u16 listener_count, then per listener: string handler_id
            | u32 registration_order, in registration order

    BYE payload := empty

Payloads are capped at 2**31 - 1 bytes. Timers are name-sorted on the wire so
encoding is canonical regardless of map iteration order. Error offsets are
absolute positions in the byte stream the decoder has been fed.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

from .model import (
    EventMessage,
    Geometry,
    HandlerRef,
    Granularity,
    InstrumentConfig,
    Screenshot,
    UnknownEventTypeError,
    make_config,
    parse_event_type,
    validate_message,
)

PROTOCOL_VERSION = 1
AGENT_NAME = "evtrace-agent"
TOOLKIT_NAME = "synthetic"

HELLO = 0x01
CONFIG = 0x02
EVENT = 0x03
BYE = 0x04
FRAME_KINDS = frozenset((HELLO, CONFIG, EVENT, BYE))
FRAME_KIND_NAMES = {HELLO: "HELLO", CONFIG: "CONFIG", EVENT: "EVENT", BYE: "BYE"}

MAX_PAYLOAD = (1 << 31) - 1
_HEADER = struct.Struct(">IB")


class WireError(Exception):
    pass


class MalformedFrame(WireError):
    """A frame violated the layout; offset points at the first offending byte."""

    def __init__(self, offset: int, reason: str):
        self.offset = offset
        self.reason = reason
        super().__init__(f"malformed frame at byte {offset}: {reason}")


class _NeedMore:
    """Singleton result: fewer bytes than one complete frame are available."""

    __slots__ = ()

    def __repr__(self) -> str:
        return "NEED_MORE"


NEED_MORE = _NeedMore()


@dataclass(frozen=True, slots=True)
class Frame:
    kind: int
    payload: bytes


@dataclass(frozen=True, slots=True)
class SessionHello:
    protocol_version: int
    agent_name: str
    toolkit_name: str


# --- low-level pack helpers -------------------------------------------------


def _pack_str(out: bytearray, text: str, what: str) -> None:
    raw = text.encode("utf-8")
    if len(raw) > 0xFFFF:
        raise WireError(f"{what} is {len(raw)} UTF-8 bytes; strings are capped at 65535")
    out += struct.pack(">H", len(raw))
    out += raw


class _Reader:
    """Cursor over one payload; base is the payload's absolute stream offset."""

    __slots__ = ("buf", "pos", "base")

    def __init__(self, payload: bytes, base: int = 0):
        self.buf = payload
        self.pos = 0
        self.base = base

    @property
    def offset(self) -> int:
        return self.base + self.pos

    def remaining(self) -> int:
        return len(self.buf) - self.pos

    def _take(self, n: int, what: str) -> bytes:
        if self.remaining() < n:
            raise MalformedFrame(
                self.offset, f"payload truncated inside {what}: need {n} bytes, have {self.remaining()}"
            )
        chunk = self.buf[self.pos : self.pos + n]
        self.pos += n
        return chunk

    def u8(self, what: str) -> int:
        return self._take(1, what)[0]

    def u16(self, what: str) -> int:
        return struct.unpack(">H", self._take(2, what))[0]

    def u32(self, what: str) -> int:
        return struct.unpack(">I", self._take(4, what))[0]

    def u64(self, what: str) -> int:
        return struct.unpack(">Q", self._take(8, what))[0]

    def i32(self, what: str) -> int:
        return struct.unpack(">i", self._take(4, what))[0]

    def string(self, what: str) -> str:
        length = self.u16(f"{what} length")
        start = self.offset
        raw = self._take(length, what)
        try:
            return raw.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise MalformedFrame(start + exc.start, f"{what} is not valid UTF-8") from None


# --- frames -------------------------------------------------------------


def encode_frame(frame: Frame) -> bytes:
    if frame.kind not in FRAME_KINDS:
        raise WireError(f"unknown frame kind 0x{frame.kind:02X}")
    if len(frame.payload) > MAX_PAYLOAD:
        raise WireError(
            f"payload is {len(frame.payload)} bytes; the limit is {MAX_PAYLOAD} (2**31 - 1)"
        )
    return _HEADER.pack(len(frame.payload), frame.kind) + frame.payload


def decode_frame(buf, offset: int = 0):
    """Incremental one-shot decode of the frame starting at buf[0].

    Returns (Frame, bytes_consumed) or NEED_MORE when buf holds less than one
    complete frame; raises MalformedFrame on layout violations. `offset` is
    the absolute stream position of buf[0], used only for error reporting.
    Never consumes or inspects bytes past the declared payload length.
    """
    if len(buf) < _HEADER.size:
        return NEED_MORE
    payload_len, kind = _HEADER.unpack_from(buf)
    if payload_len > MAX_PAYLOAD:
        raise MalformedFrame(offset, f"declared payload length {payload_len} exceeds {MAX_PAYLOAD}")
    if kind not in FRAME_KINDS:
        raise MalformedFrame(offset + 4, f"unknown frame kind 0x{kind:02X}")
    total = _HEADER.size + payload_len
    if len(buf) < total:
        return NEED_MORE
    return Frame(kind, bytes(buf[_HEADER.size : total])), total


class FrameDecoder:
    """Stateful incremental decoder for a byte stream.

    feed() arbitrary chunks, then drain next_frame() until it returns None.
    A decoder instance is single-threaded; it never consumes a partial frame,
    so chunk boundaries are invisible to the caller. Offsets in raised
    MalformedFrame errors are absolute across everything ever fed.
    """

    def __init__(self):
        self._buf = bytearray()
        self._base = 0  # absolute stream offset of _buf[0]

    def feed(self, data: bytes) -> None:
        self._buf += data

    def pending(self) -> int:
        return len(self._buf)

    def next_frame(self):
        """Return (Frame, absolute_start_offset) or None when more bytes are needed."""
        result = decode_frame(self._buf, self._base)
        if result is NEED_MORE:
            return None
        frame, consumed = result
        start = self._base
        del self._buf[:consumed]
        self._base += consumed
        return frame, start


# --- HELLO ----------------------------------------------------------------


def encode_hello(hello: SessionHello) -> bytes:
    out = bytearray(struct.pack(">H", hello.protocol_version))
    _pack_str(out, hello.agent_name, "agent_name")
    _pack_str(out, hello.toolkit_name, "toolkit_name")
    return bytes(out)


def decode_hello(payload: bytes, base: int = 0) -> SessionHello:
    r = _Reader(payload, base)
    version = r.u16("protocol_version")
    agent = r.string("agent_name")
    toolkit = r.string("toolkit_name")
    if r.remaining():
        raise MalformedFrame(r.offset, f"{r.remaining()} trailing bytes after HELLO fields")
    return SessionHello(version, agent, toolkit)


def hello_frame(hello: SessionHello | None = None) -> Frame:
    if hello is None:
        hello = SessionHello(PROTOCOL_VERSION, AGENT_NAME, TOOLKIT_NAME)
    return Frame(HELLO, encode_hello(hello))


# --- CONFIG -----------------------------------------------------------------


def encode_config(config: InstrumentConfig) -> bytes:
    out = bytearray()
    out.append(0 if config.granularity is Granularity.ALL else 1)
    names = sorted(t.name for t in config.ignored_types)
    out += struct.pack(">H", len(names))
    for name in names:
        _pack_str(out, name, "ignored type name")
    out.append(1 if config.capture_screenshots else 0)
    return bytes(out)


def decode_config(payload: bytes, base: int = 0) -> InstrumentConfig:
    r = _Reader(payload, base)
    pos = r.offset
    gran = r.u8("granularity")
    if gran not in (0, 1):
        raise MalformedFrame(pos, f"granularity byte must be 0 or 1, got {gran}")
    count = r.u16("ignored type count")
    ignored = []
    for _ in range(count):
        pos = r.offset
        token = r.string("ignored type name")
        try:
            ignored.append(parse_event_type(token))
        except UnknownEventTypeError as exc:
            raise MalformedFrame(pos, str(exc)) from None
    pos = r.offset
    shots = r.u8("capture_screenshots")
    if shots not in (0, 1):
        raise MalformedFrame(pos, f"capture_screenshots byte must be 0 or 1, got {shots}")
    if r.remaining():
        raise MalformedFrame(r.offset, f"{r.remaining()} trailing bytes after CONFIG fields")
    return make_config("ALL" if gran == 0 else "HANDLED", ignored, shots == 1)


def config_frame(config: InstrumentConfig) -> Frame:
    return Frame(CONFIG, encode_config(config))


# --- EVENT -------------------------------------------------------------


def encode_event(msg: EventMessage) -> bytes:
    violations = validate_message(msg)
    if violations:
        raise WireError("refusing to encode invalid message: " + "; ".join(violations))
    out = bytearray(struct.pack(">Q", msg.id))
    _pack_str(out, msg.source_class, "source_class")
    g = msg.geometry
    out += struct.pack(">iiiii", msg.index_in_parent, g.x, g.y, g.width, g.height)
    shot = msg.screenshot
    if shot is None:
        out.append(0)
    else:
        out.append(1)
        out += struct.pack(">II", shot.width, shot.height)
        out += shot.pixels
    _pack_str(out, msg.event_type.name, "event_type")
    out += struct.pack(">H", len(msg.timers))
    for name in sorted(msg.timers):
        _pack_str(out, name, "timer name")
        out += struct.pack(">Q", msg.timers[name])
    out += struct.pack(">H", len(msg.listeners))
    for ref in msg.listeners:
        _pack_str(out, ref.handler_id, "handler_id")
        out += struct.pack(">I", ref.registration_order)
    return bytes(out)


def decode_event(payload: bytes, base: int = 0) -> EventMessage:
    """Decode one EVENT payload; enforces exact payload consumption."""
    r = _Reader(payload, base)
    event_id = r.u64("id")
    source_class = r.string("source_class")
    index_in_parent = r.i32("index_in_parent")
    x = r.i32("x")
    y = r.i32("y")
    width = r.i32("width")
    height = r.i32("height")
    pos = r.offset
    presence = r.u8("screenshot presence flag")
    if presence not in (0, 1):
        raise MalformedFrame(pos, f"presence flag must be 0 or 1, got {presence}")
    shot = None
    if presence:
        shot_w = r.u32("screenshot width")
        shot_h = r.u32("screenshot height")
        pixels = r._take(shot_w * shot_h * 4, "screenshot pixels")
        shot = Screenshot(shot_w, shot_h, bytes(pixels))
    pos = r.offset
    type_token = r.string("event_type")
    try:
        event_type = parse_event_type(type_token)
    except UnknownEventTypeError as exc:
        raise MalformedFrame(pos, str(exc)) from None
    timers = {}
    for _ in range(r.u16("timer count")):
        name = r.string("timer name")
        timers[name] = r.u64("timer value")
    listeners = []
    for _ in range(r.u16("listener count")):
        handler_id = r.string("handler_id")
        order = r.u32("registration_order")
        listeners.append(HandlerRef(handler_id, order))
    if r.remaining():
        raise MalformedFrame(r.offset, f"{r.remaining()} trailing bytes after event fields")
    return EventMessage(
        id=event_id,
        source_class=source_class,
        index_in_parent=index_in_parent,
        geometry=Geometry(x, y, width, height),
        screenshot=shot,
        event_type=event_type,
        timers=timers,
        listeners=tuple(listeners),
    )


def event_frame(msg: EventMessage) -> Frame:
    return Frame(EVENT, encode_event(msg))


def bye_frame() -> Frame:
    return Frame(BYE, b"")
