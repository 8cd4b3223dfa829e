"""Toolkit-independent event model, tracing configuration, and filter predicate.

Everything in this module is immutable value data: instances can be shared
freely between the dispatch thread and the delivery thread.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

U64_MAX = (1 << 64) - 1


class UnknownEventTypeError(ValueError):
    """Raised when a token names an event type outside the closed registry."""

    def __init__(self, token: str):
        self.token = token
        known = ", ".join(t.name for t in EventType)
        super().__init__(f"unknown event type {token!r} (known types: {known})")


class ConfigTextError(ValueError):
    pass


class EventType(enum.Enum):
    """Closed registry of traceable event types.

    New types are added here, never by passing free-form strings; parsers
    reject unknown tokens so filter tests can stay exhaustive.
    """

    ACTION = "ACTION"
    KEY_PRESSED = "KEY_PRESSED"
    KEY_RELEASED = "KEY_RELEASED"
    KEY_TYPED = "KEY_TYPED"
    MOUSE_MOVED = "MOUSE_MOVED"
    MOUSE_CLICKED = "MOUSE_CLICKED"
    PAINT = "PAINT"
    FOCUS_GAINED = "FOCUS_GAINED"
    FOCUS_LOST = "FOCUS_LOST"
    WINDOW_OPENED = "WINDOW_OPENED"
    WINDOW_CLOSED = "WINDOW_CLOSED"
    SELECTION = "SELECTION"
    TEXT_CHANGED = "TEXT_CHANGED"

    def __str__(self) -> str:
        return self.name


def parse_event_type(token) -> EventType:
    """Resolve a registry token to an EventType; unknown tokens are rejected."""
    if isinstance(token, EventType):
        return token
    try:
        return EventType[token]
    except KeyError:
        raise UnknownEventTypeError(str(token)) from None


class Granularity(enum.Enum):
    ALL = "ALL"
    HANDLED = "HANDLED"

    def __str__(self) -> str:
        return self.name


def parse_granularity(token) -> Granularity:
    if isinstance(token, Granularity):
        return token
    name = str(token).upper()
    if name in Granularity.__members__:
        return Granularity[name]
    raise ConfigTextError(f"unknown granularity {token!r} (expected ALL or HANDLED)")


@dataclass(frozen=True, slots=True)
class HandlerRef:
    """One registered handler: opaque id plus its per-registry registration order."""

    handler_id: str
    registration_order: int


@dataclass(frozen=True, slots=True)
class Geometry:
    # width/height must be >= 1 for a message to validate; construction is
    # deliberately permissive so invalid values can be represented and reported.
    x: int
    y: int
    width: int
    height: int


@dataclass(frozen=True, slots=True)
class Screenshot:
    """Uncompressed RGBA8 raster, row-major, length = width * height * 4."""

    width: int
    height: int
    pixels: bytes


@dataclass(frozen=True, slots=True)
class EventMessage:
    """One fired GUI event as shipped to the host.

    ids are session-unique, strictly increasing, and dense from 1 in fire
    order. listeners is empty iff no handler was registered at fire time.
    The timers map carries nanosecond readings keyed by well-known names;
    values inside a transmitted message are provisional (the authoritative
    per-event numbers are the agent-side overhead samples, since the send
    duration cannot be known before the message is written).
    """

    id: int
    source_class: str
    index_in_parent: int
    geometry: Geometry
    screenshot: Screenshot | None
    event_type: EventType
    timers: dict[str, int] = field(default_factory=dict)
    listeners: tuple[HandlerRef, ...] = ()


@dataclass(frozen=True, slots=True)
class InstrumentConfig:
    granularity: Granularity
    ignored_types: frozenset[EventType]
    capture_screenshots: bool


def make_config(granularity, ignored_types=(), capture_screenshots=False) -> InstrumentConfig:
    """Build a config; duplicate ignore entries collapse, unknown tokens are rejected."""
    ignored = frozenset(parse_event_type(t) for t in ignored_types)
    return InstrumentConfig(
        granularity=parse_granularity(granularity),
        ignored_types=ignored,
        capture_screenshots=bool(capture_screenshots),
    )


def passes_filters(config: InstrumentConfig, event_type: EventType, listener_count: int) -> bool:
    """Agent-side filter predicate.

    Type filter first, granularity second; an ignored type never passes, and
    under HANDLED granularity an event passes only with at least one listener.
    Total: defined for every input, never raises.
    """
    if event_type in config.ignored_types:
        return False
    return config.granularity is Granularity.ALL or listener_count >= 1


def validate_message(msg: EventMessage) -> list[str]:
    """Return every violated EventMessage invariant; an empty list means valid.

    Violations are data, not faults: callers that must not ship a bad message
    (the wire encoder) check the list and refuse.
    """
    violations = []
    if msg.id < 1:
        violations.append(f"id must be >= 1, got {msg.id}")
    if not msg.source_class:
        violations.append("source_class must be non-empty")
    if msg.index_in_parent < -1:
        violations.append(f"index_in_parent must be >= -1, got {msg.index_in_parent}")
    g = msg.geometry
    if g.width < 1:
        violations.append(f"geometry width must be >= 1, got {g.width}")
    if g.height < 1:
        violations.append(f"geometry height must be >= 1, got {g.height}")
    shot = msg.screenshot
    if shot is not None:
        if shot.width < 1 or shot.height < 1:
            violations.append(
                f"screenshot dimensions must be >= 1, got {shot.width}x{shot.height}"
            )
        expected = shot.width * shot.height * 4
        if len(shot.pixels) != expected:
            violations.append(
                "screenshot pixel length must equal width*height*4 "
                f"({expected}), got {len(shot.pixels)}"
            )
    for name, value in msg.timers.items():
        if not name:
            violations.append("timer names must be non-empty")
        if not 0 <= value <= U64_MAX:
            violations.append(f"timer {name!r} value out of range: {value}")
    seen = set()
    for ref in msg.listeners:
        if ref.registration_order < 0:
            violations.append(
                f"listener {ref.handler_id!r} has negative registration_order"
            )
        if ref.handler_id in seen:
            violations.append(f"duplicate listener handler_id {ref.handler_id!r}")
        seen.add(ref.handler_id)
    return violations


def format_config(config: InstrumentConfig) -> str:
    """Canonical textual form: `granularity=...; ignore=...; screenshots=on|off`.

    The ignore list is name-sorted so the text is unique per config.
    """
    names = ",".join(sorted(t.name for t in config.ignored_types))
    shots = "on" if config.capture_screenshots else "off"
    return f"granularity={config.granularity.name}; ignore={names}; screenshots={shots}"


def parse_config(text: str) -> InstrumentConfig:
    """Inverse of format_config; accepts exactly the canonical three-part form."""
    parts = [p.strip() for p in text.split(";")]
    if len(parts) != 3:
        raise ConfigTextError(
            f"expected 'granularity=...; ignore=...; screenshots=...', got {text!r}"
        )
    fields = {}
    for part in parts:
        key, sep, value = part.partition("=")
        if not sep:
            raise ConfigTextError(f"malformed config fragment {part!r}")
        fields[key.strip()] = value.strip()
    missing = {"granularity", "ignore", "screenshots"} - set(fields)
    if missing:
        raise ConfigTextError(f"config text missing keys: {sorted(missing)}")
    shots = fields["screenshots"]
    if shots not in ("on", "off"):
        raise ConfigTextError(f"screenshots must be 'on' or 'off', got {shots!r}")
    ignored = [tok for tok in fields["ignore"].split(",") if tok]
    return make_config(fields["granularity"], ignored, shots == "on")
