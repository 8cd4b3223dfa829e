"""In-process tracing agent.

The agent hooks the dispatch core's pre-fire cut point, filters each event
against the session config, assembles an EventMessage (listener capture,
optional screenshot, timers), and writes one EVENT frame synchronously on the
dispatch thread before any handler runs. Synchronous transmission is the
point: the per-event overhead samples include the socket send.

Connection direction: the agent listens, the host connects. On accept the
agent sends HELLO, then waits for exactly one CONFIG frame; the session config
is fixed from then on (there is no reconfiguration path).
"""

from __future__ import annotations

import enum
import socket
import time
from dataclasses import dataclass

from . import wire
from .model import EventMessage, HandlerRef, Screenshot, passes_filters
from .raster import render_screenshot


class AgentError(Exception):
    pass


class InstallError(AgentError):
    pass


class FireOutcome(enum.Enum):
    TRANSMITTED = "transmitted"
    FILTERED = "filtered"
    DROPPED = "dropped"  # session FAILED: counted but not sent


class SessionState(enum.Enum):
    ACTIVE = "active"
    FAILED = "failed"
    CLOSED = "closed"


@dataclass(frozen=True, slots=True)
class OverheadSample:
    """Authoritative per-event agent overhead, recorded after the send returns.

    t_capture_ns and t_send_ns time disjoint subintervals of the agent's work,
    so t_capture_ns + t_send_ns <= t_total_ns always holds. t_capture_ns is 0
    exactly when no screenshot was captured for the event.
    """

    event_id: int
    t_total_ns: int
    t_capture_ns: int
    t_send_ns: int


class AgentConnection:
    """Agent-side transport after a completed HELLO/CONFIG handshake."""

    def __init__(self, sock: socket.socket, config):
        self._sock = sock
        self.config = config

    def sendall(self, data: bytes) -> None:
        self._sock.sendall(data)

    def close(self) -> None:
        try:
            self._sock.close()
        except OSError:
            pass


class AgentListener:
    """Listening socket the host connects to; one traced session per accept."""

    def __init__(self, host: str = "127.0.0.1", port: int = 0):
        self._server = socket.create_server((host, port))
        self.address = self._server.getsockname()[:2]

    def accept_session(self, timeout: float | None = 30.0) -> AgentConnection:
        """Accept one host connection and run the agent side of the handshake.

        Sends HELLO, then requires the first inbound frame to be CONFIG.
        Anything else is a protocol error and closes the connection.
        """
        self._server.settimeout(timeout)
        conn, _addr = self._server.accept()
        conn.settimeout(timeout)
        try:
            conn.sendall(wire.encode_frame(wire.hello_frame()))
            decoder = wire.FrameDecoder()
            while True:
                got = decoder.next_frame()
                if got is not None:
                    frame, start = got
                    break
                data = conn.recv(4096)
                if not data:
                    raise AgentError("host closed the connection before sending CONFIG")
                decoder.feed(data)
            if frame.kind != wire.CONFIG:
                raise AgentError(
                    "expected CONFIG as the first host frame, got "
                    f"{wire.FRAME_KIND_NAMES.get(frame.kind, hex(frame.kind))}"
                )
            config = wire.decode_config(frame.payload, start + 5)
            conn.settimeout(None)
            return AgentConnection(conn, config)
        except Exception:
            conn.close()
            raise

    def close(self) -> None:
        try:
            self._server.close()
        except OSError:
            pass


class AgentSession:
    """One agent attached to one dispatch core, streaming to one host."""

    def __init__(self, core, transport, clock):
        self.config = transport.config
        self.state = SessionState.ACTIVE
        self.next_id = 1
        self.samples: list[OverheadSample] = []
        self.dropped = 0
        self._core = core
        self._transport = transport
        self._clock = clock
        self._failure: Exception | None = None
        self._hook = core.add_hook(pre_fire=self._pre_fire)

    def _pre_fire(self, widget, event_type, listeners) -> None:
        on_event_fired(self, widget, event_type, listeners)

    def take_failure(self) -> Exception | None:
        """Surface a transport failure exactly once; later calls return None."""
        failure, self._failure = self._failure, None
        return failure

    def close(self) -> None:
        """Detach from the core, send BYE when still healthy, close the socket."""
        self._core.remove_hook(self._hook)
        if getattr(self._core, "_agent_session", None) is self:
            self._core._agent_session = None
        if self.state is SessionState.ACTIVE:
            try:
                self._transport.sendall(wire.encode_frame(wire.bye_frame()))
            except OSError:
                pass
            self.state = SessionState.CLOSED
        self._transport.close()


def install_agent(core, transport, clock=time.perf_counter_ns) -> AgentSession:
    """Attach an agent to the core; events fired before this are not traced.

    The transport must be past its handshake (it carries the negotiated
    config). Only one agent may be installed on a core at a time.
    """
    if getattr(transport, "config", None) is None:
        raise InstallError(
            "transport is not ready: complete the HELLO/CONFIG handshake first"
        )
    if getattr(core, "_agent_session", None) is not None:
        raise InstallError("an agent is already installed on this dispatch core")
    session = AgentSession(core, transport, clock)
    core._agent_session = session
    return session


def collect_listeners(core, widget, event_type) -> list[HandlerRef]:
    """Fresh per-fire listener capture; deliberately uncached.

    Every handled event pays this walk plus the construction of new HandlerRef
    values, which is what makes handled events measurably heavier to trace
    than unhandled ones.
    """
    return [
        HandlerRef(handler_id=ref.handler_id, registration_order=ref.registration_order)
        for ref in core.listeners(widget.widget_id, event_type)
    ]


def capture_screenshot(session: AgentSession, window) -> Screenshot | None:
    """Render the active window; None when it is not visible."""
    return render_screenshot(window)


def on_event_fired(session: AgentSession, widget, event_type, listeners) -> FireOutcome:
    """Trace one fired event; runs on the dispatch thread inside pre_fire.

    Filtered events cost nothing downstream and consume no id, so host-side
    ids stay dense and any gap means loss. On a transport write failure the
    session flips to FAILED and later events are counted but dropped; the
    failure itself is surfaced once through take_failure().
    """
    clock = session._clock
    t_start = clock()
    config = session.config
    if not passes_filters(config, event_type, len(listeners)):
        return FireOutcome.FILTERED
    if session.state is not SessionState.ACTIVE:
        session.dropped += 1
        return FireOutcome.DROPPED

    refs = collect_listeners(session._core, widget, event_type)

    shot = None
    t_capture = 0
    if config.capture_screenshots:
        window = widget.root()
        if window.visible:
            c_start = clock()
            shot = capture_screenshot(session, window)
            # floor at 1ns: a captured frame must be distinguishable from a skip
            t_capture = max(1, clock() - c_start)

    msg = EventMessage(
        id=session.next_id,
        source_class=widget.class_name,
        index_in_parent=widget.index_in_parent(),
        geometry=widget.geometry,
        screenshot=shot,
        event_type=event_type,
        # provisional: the send duration cannot be known before sending, so
        # the wire copy carries t_send=0 and a pre-encode t_total; the
        # OverheadSample recorded below is authoritative
        timers={"t_total": clock() - t_start, "t_capture": t_capture, "t_send": 0},
        listeners=tuple(refs),
    )
    data = wire.encode_frame(wire.event_frame(msg))

    s_start = clock()
    try:
        session._transport.sendall(data)
    except OSError as exc:
        session.state = SessionState.FAILED
        session._failure = exc
        session.dropped += 1
        return FireOutcome.DROPPED
    t_end = clock()

    t_send = t_end - s_start
    t_total = t_end - t_start
    if t_capture + t_send > t_total:  # clock quantization guard
        t_total = t_capture + t_send
    session.samples.append(OverheadSample(msg.id, t_total, t_capture, t_send))
    session.next_id += 1
    return FireOutcome.TRANSMITTED
