"""Observer-side endpoint.

A Connector is configured first, then connected: connect() dials the agent,
validates its HELLO, pushes the one-and-only CONFIG frame, and leaves the
socket ready for receive_loop(). Every received EVENT frame is delivered to
the subscribed listeners serially, in subscription order, on whichever thread
runs receive_loop (the benchmark dedicates one). There is no replay for late
subscribers and no host-side buffering beyond the socket: a slow listener
back-pressures the TCP stream instead of dropping events.
"""

from __future__ import annotations

import enum
import socket
import threading

from . import wire
from .model import InstrumentConfig
from .tracefile import TraceFileWriter, TraceRecord  # re-exported model of a run

__all__ = [
    "Connector",
    "ConnectorState",
    "ConnectError",
    "HostError",
    "StateError",
    "Subscription",
    "TraceRecord",
    "add_event_message_listener",
    "configure",
    "connect",
    "receive_loop",
    "record_trace",
]


class HostError(Exception):
    pass


class StateError(HostError):
    pass


class ConnectError(HostError):
    pass


class ConnectorState(enum.Enum):
    CREATED = "created"
    CONNECTED = "connected"
    CLOSED = "closed"
    FAILED = "failed"


class Subscription:
    """Handle returned by add_event_message_listener; cancel() unsubscribes."""

    def __init__(self, connector: "Connector", deliver):
        self._connector = connector
        self.deliver = deliver

    def cancel(self) -> None:
        with self._connector._lock:
            if self in self._connector._subscriptions:
                self._connector._subscriptions.remove(self)


def _parse_endpoint(endpoint) -> tuple[str, int]:
    if isinstance(endpoint, str):
        host, sep, port = endpoint.rpartition(":")
        if not sep:
            raise ConnectError(f"endpoint {endpoint!r} is not host:port")
        try:
            return (host or "127.0.0.1", int(port))
        except ValueError:
            raise ConnectError(f"endpoint {endpoint!r} has a non-numeric port") from None
    host, port = endpoint
    return host, int(port)


class Connector:
    def __init__(self, config: InstrumentConfig):
        self.config = config
        self.state = ConnectorState.CREATED
        self.failure: str | None = None
        self.agent_hello: wire.SessionHello | None = None
        self.events_delivered = 0
        self._sock: socket.socket | None = None
        self._subscriptions: list[Subscription] = []
        self._lock = threading.Lock()

    # -- subscription -----------------------------------------------------

    def add_event_message_listener(self, listener) -> Subscription:
        """Subscribe; `listener` is a callable or has message_received(event).

        Each subscriber sees every event received after it subscribed, once,
        in arrival order. Allowed before or after connect().
        """
        deliver = getattr(listener, "message_received", None)
        if deliver is None:
            if not callable(listener):
                raise TypeError(
                    "listener must be callable or provide message_received(event)"
                )
            deliver = listener
        sub = Subscription(self, deliver)
        with self._lock:
            self._subscriptions.append(sub)
        return sub

    def _delivery_snapshot(self):
        with self._lock:
            return tuple(sub.deliver for sub in self._subscriptions)

    # -- lifecycle ----------------------------------------------------------

    def connect(self, endpoint, timeout: float = 10.0) -> None:
        """Dial the agent, validate HELLO, push CONFIG, become CONNECTED."""
        if self.state is not ConnectorState.CREATED:
            raise StateError(f"connect() requires CREATED, connector is {self.state.name}")
        addr = _parse_endpoint(endpoint)
        try:
            sock = socket.create_connection(addr, timeout=timeout)
        except OSError as exc:
            self._fail(f"endpoint {addr[0]}:{addr[1]} unreachable: {exc}")
            raise ConnectError(self.failure) from None
        try:
            decoder = wire.FrameDecoder()
            while True:
                got = decoder.next_frame()
                if got is not None:
                    frame, start = got
                    break
                data = sock.recv(4096)
                if not data:
                    raise ConnectError("agent closed the connection before HELLO")
                decoder.feed(data)
            if frame.kind != wire.HELLO:
                raise ConnectError(
                    "expected HELLO, got "
                    f"{wire.FRAME_KIND_NAMES.get(frame.kind, hex(frame.kind))}"
                )
            hello = wire.decode_hello(frame.payload, start + 5)
            if hello.protocol_version != wire.PROTOCOL_VERSION:
                raise ConnectError(
                    f"protocol version mismatch: agent speaks {hello.protocol_version}, "
                    f"host requires {wire.PROTOCOL_VERSION}"
                )
            self.agent_hello = hello
            sock.sendall(wire.encode_frame(wire.config_frame(self.config)))
        except (ConnectError, wire.WireError, OSError) as exc:
            sock.close()
            self._fail(str(exc))
            raise ConnectError(self.failure) from None
        sock.settimeout(None)
        self._sock = sock
        self.state = ConnectorState.CONNECTED

    def receive_loop(self) -> ConnectorState:
        """Decode and deliver frames until BYE, transport close, or a violation.

        BYE ends the session cleanly (CLOSED). A stream that ends without BYE,
        a malformed frame, or an event id gap marks the connector FAILED with
        a reason; events already delivered stay delivered.
        """
        if self.state is not ConnectorState.CONNECTED:
            raise StateError(f"receive_loop() requires CONNECTED, connector is {self.state.name}")
        decoder = wire.FrameDecoder()
        expected_id = 1
        sock = self._sock
        while True:
            try:
                got = decoder.next_frame()
            except wire.MalformedFrame as exc:
                self._fail(str(exc))
                return self.state
            if got is None:
                try:
                    data = sock.recv(1 << 16)
                except OSError as exc:
                    self._fail(f"transport error: {exc}")
                    return self.state
                if not data:
                    self._fail("stream ended without BYE (truncated)")
                    return self.state
                decoder.feed(data)
                continue
            frame, start = got
            if frame.kind == wire.BYE:
                self.state = ConnectorState.CLOSED
                self._close_socket()
                return self.state
            if frame.kind != wire.EVENT:
                self._fail(
                    f"unexpected {wire.FRAME_KIND_NAMES.get(frame.kind, hex(frame.kind))} "
                    f"frame at byte {start} after the handshake"
                )
                return self.state
            try:
                msg = wire.decode_event(frame.payload, start + 5)
            except wire.MalformedFrame as exc:
                self._fail(str(exc))
                return self.state
            if msg.id != expected_id:
                self._fail(
                    f"event id gap: expected {expected_id}, got {msg.id} (event loss)"
                )
                return self.state
            expected_id += 1
            self.events_delivered += 1
            for deliver in self._delivery_snapshot():
                try:
                    deliver(msg)
                except Exception as exc:
                    self._fail(f"listener raised on event {msg.id}: {exc!r}")
                    raise
        # unreachable

    def close(self) -> None:
        if self.state is ConnectorState.CONNECTED:
            self.state = ConnectorState.CLOSED
        self._close_socket()

    def _close_socket(self) -> None:
        if self._sock is not None:
            try:
                self._sock.close()
            except OSError:
                pass
            self._sock = None

    def _fail(self, reason: str) -> None:
        self.state = ConnectorState.FAILED
        self.failure = reason
        self._close_socket()


# Free-function forms of the connector lifecycle, matching the host API names.


def configure(config: InstrumentConfig) -> Connector:
    """Create a CREATED connector holding the config; nothing is sent yet."""
    return Connector(config)


def connect(connector: Connector, endpoint) -> None:
    connector.connect(endpoint)


def add_event_message_listener(connector: Connector, listener) -> Subscription:
    return connector.add_event_message_listener(listener)


def receive_loop(connector: Connector) -> ConnectorState:
    return connector.receive_loop()


def record_trace(connector: Connector, sink, scenario_name: str = "trace") -> TraceFileWriter:
    """Persist every subsequently received event to `sink` in the trace format.

    Returns the writer; the caller closes it (passing overhead samples when it
    has them) after the receive loop ends. A writer failure stops the recorder
    but leaves the connector running; the error is kept on writer.error.
    """
    writer = TraceFileWriter(sink, scenario_name, connector.config)
    state = {"sub": None}

    def _append(msg):
        try:
            writer.append(msg)
        except Exception as exc:  # recorder stops, delivery continues
            writer.error = exc
            if state["sub"] is not None:
                state["sub"].cancel()

    state["sub"] = connector.add_event_message_listener(_append)
    return writer
