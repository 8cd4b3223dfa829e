"""Shared builders for the test suite: canned messages, random generators,
and a small prebuilt dispatch core."""

from __future__ import annotations

import random

from evtrace.dispatch import DispatchCore
from evtrace.model import (
    EventMessage,
    EventType,
    Geometry,
    HandlerRef,
    Screenshot,
)
from evtrace.wire import BYE, CONFIG, EVENT, HELLO, Frame, encode_config, encode_event, encode_hello, SessionHello
from evtrace.model import make_config

EVENT_TYPES = tuple(EventType)


def make_message(
    id=1,
    source_class="demo.Button",
    index_in_parent=0,
    geometry=None,
    screenshot=None,
    event_type=EventType.ACTION,
    timers=None,
    listeners=(),
) -> EventMessage:
    return EventMessage(
        id=id,
        source_class=source_class,
        index_in_parent=index_in_parent,
        geometry=geometry or Geometry(0, 0, 10, 10),
        screenshot=screenshot,
        event_type=event_type,
        timers=dict(timers or {}),
        listeners=tuple(listeners),
    )


def random_message(rng: random.Random) -> EventMessage:
    """One random EventMessage satisfying every validity invariant."""
    shot = None
    if rng.random() < 0.3:
        w, h = rng.randint(1, 8), rng.randint(1, 8)
        shot = Screenshot(w, h, rng.randbytes(w * h * 4))
    timers = {
        f"t_{rng.choice('abcdefgh')}{i}": rng.randrange(1 << 64)
        for i in range(rng.randint(0, 4))
    }
    listeners = tuple(
        HandlerRef(f"handler.{i}.{rng.randint(0, 999)}", rng.randrange(1 << 32))
        for i in range(rng.randint(0, 5))
    )
    return EventMessage(
        id=rng.randint(1, (1 << 64) - 1),
        source_class=rng.choice(
            ["app.Frame", "app.Button", "x", "päckchen.Übersicht", "a" * 40]
        ),
        index_in_parent=rng.randint(-1, 500),
        geometry=Geometry(
            rng.randint(-(1 << 31), (1 << 31) - 1),
            rng.randint(-(1 << 31), (1 << 31) - 1),
            rng.randint(1, (1 << 31) - 1),
            rng.randint(1, (1 << 31) - 1),
        ),
        screenshot=shot,
        event_type=rng.choice(EVENT_TYPES),
        timers=timers,
        listeners=listeners,
    )


def random_frame(rng: random.Random) -> Frame:
    """One random valid frame of any kind, with a decodable payload."""
    kind = rng.choice((HELLO, CONFIG, EVENT, BYE))
    if kind == BYE:
        return Frame(BYE, b"")
    if kind == HELLO:
        hello = SessionHello(rng.randint(0, 0xFFFF), "agent", "synthetic")
        return Frame(HELLO, encode_hello(hello))
    if kind == CONFIG:
        ignored = rng.sample(EVENT_TYPES, rng.randint(0, 4))
        config = make_config(rng.choice(("ALL", "HANDLED")), ignored, rng.random() < 0.5)
        return Frame(CONFIG, encode_config(config))
    return Frame(EVENT, encode_event(random_message(rng)))


def build_button_core():
    """Core with one visible window and one button carrying two handlers."""
    core = DispatchCore()
    core.add_window(1, "demo.Frame", Geometry(0, 0, 64, 48), visible=True)
    core.add_widget(2, 1, "demo.Button", Geometry(4, 4, 24, 12))
    core.register_listener(2, EventType.ACTION, "h1")
    core.register_listener(2, EventType.ACTION, "h2")
    return core
