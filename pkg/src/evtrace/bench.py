"""Benchmark harness: scenario runs, completeness checking, and reports.

run() wires a full loopback session inside one process: the dispatch core and
the scenario replay own the main thread (the synthetic dispatch thread), the
agent listener accepts on a short-lived helper thread, and host-side delivery
runs on a dedicated receiver thread, mirroring the two-process deployment
without the process boundary. run_remote()/serve() split the same parts
across real processes when an endpoint is given.
"""

from __future__ import annotations

import contextlib
import dataclasses
import gc
import os
import sys
import threading
import time
from collections import Counter

from . import host as host_mod
from .agent import AgentListener, AgentSession, SessionState, install_agent
from .dispatch import DispatchCore
from .model import EventMessage, InstrumentConfig, passes_filters
from .scenario import Scenario
from .stats import OverheadStats
from .tracefile import TraceReader, TraceRecord

__all__ = [
    "BenchError",
    "CompletenessChecker",
    "CompletenessError",
    "CountingListener",
    "FlakinessReport",
    "RunResult",
    "compare_trace_files",
    "compare_traces",
    "drain_endpoint",
    "load_manifest",
    "quiesced",
    "run",
    "run_remote",
    "run_scenario",
    "serve",
    "table_report",
]


class BenchError(Exception):
    pass


class CompletenessError(BenchError):
    """The host-side event stream diverged from the dispatch record log."""


@contextlib.contextmanager
def quiesced():
    """Keep interpreter housekeeping out of per-event timings.

    Cycle collection and frequent preemptive thread switches both show up as
    multi-hundred-microsecond spikes in the middle of a replay. Both settings
    are restored on exit; the replay allocates no reference cycles, so
    deferring collection is safe.
    """
    gc_was_enabled = gc.isenabled()
    old_interval = sys.getswitchinterval()
    gc.disable()
    sys.setswitchinterval(0.0005)
    try:
        yield
    finally:
        sys.setswitchinterval(old_interval)
        if gc_was_enabled:
            gc.enable()


class CountingListener:
    """Host-side subscriber that tallies events without retaining them."""

    def __init__(self):
        self.total = 0
        self.handled = 0
        self.by_type: Counter = Counter()

    def __call__(self, msg: EventMessage) -> None:
        self.total += 1
        if msg.listeners:
            self.handled += 1
        self.by_type[msg.event_type] += 1


class CompletenessChecker:
    """Verifies the received stream is exactly the filter-passing subsequence
    of the core's dispatch log, in order, with dense ids.

    Runs on the delivery thread while the core still fires on the dispatch
    thread; that is safe because the record log is append-only and the agent
    appends each record before it transmits the matching frame.
    """

    def __init__(self, core: DispatchCore, config: InstrumentConfig):
        self._core = core
        self._config = config
        self._cursor = 0
        self._next_id = 1
        self.checked = 0

    def _passes(self, rec) -> bool:
        return passes_filters(self._config, rec.event_type, len(rec.handler_ids))

    def __call__(self, msg: EventMessage) -> None:
        records = self._core.records
        while True:
            if self._cursor >= len(records):
                raise CompletenessError(
                    f"received event {msg.id} ({msg.event_type.name}) with no "
                    f"matching dispatch record"
                )
            rec = records[self._cursor]
            self._cursor += 1
            if self._passes(rec):
                break
        if msg.id != self._next_id:
            raise CompletenessError(
                f"event ids not dense: expected {self._next_id}, received {msg.id}"
            )
        self._next_id += 1
        widget = self._core.widget(rec.widget_id)
        mismatches = []
        if msg.source_class != widget.class_name:
            mismatches.append(f"source_class {msg.source_class!r} != {widget.class_name!r}")
        if msg.index_in_parent != widget.index_in_parent():
            mismatches.append(
                f"index_in_parent {msg.index_in_parent} != {widget.index_in_parent()}"
            )
        if msg.event_type is not rec.event_type:
            mismatches.append(f"event_type {msg.event_type.name} != {rec.event_type.name}")
        if tuple(ref.handler_id for ref in msg.listeners) != rec.handler_ids:
            mismatches.append("listener ids diverge from the registration snapshot")
        if mismatches:
            raise CompletenessError(
                f"event {msg.id} diverges from dispatch record {rec.seq}: "
                + "; ".join(mismatches)
            )
        self.checked += 1

    def finish(self) -> None:
        """Call after the run: every remaining record must be filtered out."""
        records = self._core.records
        while self._cursor < len(records):
            rec = records[self._cursor]
            self._cursor += 1
            if self._passes(rec):
                raise CompletenessError(
                    f"dispatch record {rec.seq} ({rec.event_type.name}) passes the "
                    f"configured filters but was never received"
                )


@dataclasses.dataclass
class RunResult:
    scenario_name: str
    config: InstrumentConfig
    events_fired: int | None  # None for remote runs (fired agent-side)
    events_streamed: int
    handled_streamed: int
    by_type: Counter
    samples: list
    dropped: int
    agent_state: SessionState | None
    host_state: host_mod.ConnectorState
    failure: str | None
    duration_s: float
    events: list[EventMessage] | None

    @property
    def ok(self) -> bool:
        return self.failure is None and self.dropped == 0


def run(
    scenario: Scenario,
    config: InstrumentConfig,
    *,
    trace_sink=None,
    retain_events: bool = False,
    check_completeness: bool = True,
    clock=None,
    quiesce: bool = True,
) -> RunResult:
    """One full loopback run of `scenario` under `config`.

    Dispatch happens on the calling thread; host delivery on a receiver
    thread. Pass retain_events=True to keep every received EventMessage on
    the result (screenshot-bearing runs can be large; counters and samples
    are always kept). quiesce=False skips the interpreter-noise guard.
    """
    core = DispatchCore()
    ids = scenario.build(core)

    listener = AgentListener()
    accepted: list = []

    def _accept():
        try:
            accepted.append(listener.accept_session(timeout=10.0))
        except BaseException as exc:  # joined and re-raised below
            accepted.append(exc)

    accept_thread = threading.Thread(target=_accept, name="evtrace-accept")
    accept_thread.start()
    connector = host_mod.configure(config)
    try:
        connector.connect(listener.address)
    finally:
        accept_thread.join()
        listener.close()
    transport = accepted[0]
    if isinstance(transport, BaseException):
        raise BenchError(f"agent-side accept failed: {transport}") from transport

    if clock is None:
        session = install_agent(core, transport)
    else:
        session = install_agent(core, transport, clock=clock)

    counting = CountingListener()
    connector.add_event_message_listener(counting)
    checker = None
    if check_completeness:
        checker = CompletenessChecker(core, config)
        connector.add_event_message_listener(checker)
    collected: list[EventMessage] | None = None
    if retain_events:
        collected = []
        connector.add_event_message_listener(collected.append)
    writer = None
    if trace_sink is not None:
        writer = host_mod.record_trace(connector, trace_sink, scenario.name)

    delivered: list = []

    def _deliver():
        try:
            delivered.append(connector.receive_loop())
        except BaseException as exc:
            delivered.append(exc)

    receiver = threading.Thread(target=_deliver, name="evtrace-receiver")
    receiver.start()

    started = time.perf_counter()
    guard = quiesced() if quiesce else contextlib.nullcontext()
    try:
        with guard:
            fired = scenario.replay(core, ids)
    finally:
        agent_failure = session.take_failure()
        session.close()
        receiver.join()
        connector.close()
    duration = time.perf_counter() - started

    if writer is not None:
        writer.close(session.samples)

    outcome = delivered[0]
    if isinstance(outcome, BaseException):
        raise outcome

    failure = None
    if agent_failure is not None:
        failure = f"agent transmit failure: {agent_failure}"
    elif connector.state is not host_mod.ConnectorState.CLOSED:
        failure = connector.failure or f"host ended in state {connector.state.name}"
    elif writer is not None and writer.error is not None:
        failure = f"trace write failure: {writer.error}"

    if checker is not None and failure is None:
        checker.finish()

    return RunResult(
        scenario_name=scenario.name,
        config=config,
        events_fired=fired,
        events_streamed=counting.total,
        handled_streamed=counting.handled,
        by_type=counting.by_type,
        samples=session.samples,
        dropped=session.dropped,
        agent_state=session.state,
        host_state=connector.state,
        failure=failure,
        duration_s=duration,
        events=collected,
    )


def run_remote(
    config: InstrumentConfig,
    endpoint,
    *,
    trace_sink=None,
    scenario_name: str = "remote",
    retain_events: bool = False,
) -> RunResult:
    """Receive one session from an already-listening agent process.

    The serving side replays the scenario; this side only configures,
    receives, and counts. Overhead samples stay with the agent process, so
    the result (and any trace footer) carries none.
    """
    connector = host_mod.configure(config)
    connector.connect(endpoint)
    counting = CountingListener()
    connector.add_event_message_listener(counting)
    collected: list[EventMessage] | None = [] if retain_events else None
    if collected is not None:
        connector.add_event_message_listener(collected.append)
    writer = None
    if trace_sink is not None:
        writer = host_mod.record_trace(connector, trace_sink, scenario_name)
    started = time.perf_counter()
    connector.receive_loop()
    duration = time.perf_counter() - started
    if writer is not None:
        writer.close(())
    failure = None
    if connector.state is not host_mod.ConnectorState.CLOSED:
        failure = connector.failure or f"host ended in state {connector.state.name}"
    elif writer is not None and writer.error is not None:
        failure = f"trace write failure: {writer.error}"
    return RunResult(
        scenario_name=scenario_name,
        config=config,
        events_fired=None,
        events_streamed=counting.total,
        handled_streamed=counting.handled,
        by_type=counting.by_type,
        samples=[],
        dropped=0,
        agent_state=None,
        host_state=connector.state,
        failure=failure,
        duration_s=duration,
        events=collected,
    )


def drain_endpoint(config: InstrumentConfig, endpoint) -> int:
    """Handshake as a host, then swallow the stream without decoding it.

    Useful as the receiving end of an overhead benchmark: the agent's send
    path is measured without the host's per-event decode rate feeding back
    into the numbers as socket backpressure. Returns the bytes consumed.
    """
    connector = host_mod.configure(config)
    connector.connect(endpoint)
    sock = connector._sock
    consumed = 0
    try:
        while True:
            data = sock.recv(1 << 20)
            if not data:
                break
            consumed += len(data)
    finally:
        connector.close()
    return consumed


def serve(scenario: Scenario, bind_host: str = "127.0.0.1", port: int = 0,
          *, announce=None, timeout: float = 60.0, quiesce: bool = True) -> AgentSession:
    """Agent-process side of a remote run: accept one host, replay, close.

    The host decides the configuration during the handshake. `announce` is
    called with (host, port) once the listener is bound, before blocking.
    """
    core = DispatchCore()
    ids = scenario.build(core)
    listener = AgentListener(bind_host, port)
    if announce is not None:
        announce(*listener.address)
    try:
        transport = listener.accept_session(timeout=timeout)
    finally:
        listener.close()
    session = install_agent(core, transport)
    guard = quiesced() if quiesce else contextlib.nullcontext()
    try:
        with guard:
            scenario.replay(core, ids)
    finally:
        failure = session.take_failure()
        session.close()
    if failure is not None:
        raise BenchError(f"agent transmit failure: {failure}")
    return session


def run_scenario(
    scenario: Scenario,
    config: InstrumentConfig,
    *,
    endpoint=None,
    trace_sink=None,
) -> TraceRecord:
    """Run `scenario` under `config` and return the host-side trace.

    Without an endpoint the whole session runs in-process over loopback;
    with one, this side acts as the host against a served agent. Failures
    (agent transmit errors, event loss, truncation) raise BenchError.
    """
    if endpoint is None:
        result = run(scenario, config, trace_sink=trace_sink, retain_events=True)
    else:
        result = run_remote(config, endpoint, trace_sink=trace_sink,
                            scenario_name=scenario.name, retain_events=True)
    if not result.ok:
        raise BenchError(result.failure or f"{result.dropped} events dropped")
    return TraceRecord(
        scenario_name=result.scenario_name,
        config=config,
        events=result.events or [],
        samples=result.samples,
    )


# -- trace comparison ---------------------------------------------------------


@dataclasses.dataclass(frozen=True)
class FlakinessReport:
    """Outcome of comparing two traces event-by-event.

    Events are compared on (source_class, index_in_parent, event_type);
    ids and timers are run-dependent and screenshots are pixel data, so all
    three are excluded. position is the 0-based index of the first mismatch.
    """

    equal: bool
    position: int | None = None
    left: str | None = None
    right: str | None = None

    def describe(self) -> str:
        if self.equal:
            return "traces are equal"
        return (f"traces diverge at position {self.position}: "
                f"{self.left} != {self.right}")


_END = "<end of trace>"


def _event_summary(msg: EventMessage) -> str:
    return f"{msg.source_class}[{msg.index_in_parent}] {msg.event_type.name}"


def _event_key(msg: EventMessage):
    return (msg.source_class, msg.index_in_parent, msg.event_type)


def _first_divergence(left_events, right_events) -> FlakinessReport:
    left_it = iter(left_events)
    right_it = iter(right_events)
    position = 0
    sentinel = object()
    while True:
        a = next(left_it, sentinel)
        b = next(right_it, sentinel)
        if a is sentinel and b is sentinel:
            return FlakinessReport(equal=True)
        if a is sentinel or b is sentinel:
            return FlakinessReport(
                equal=False,
                position=position,
                left=_END if a is sentinel else _event_summary(a),
                right=_END if b is sentinel else _event_summary(b),
            )
        if _event_key(a) != _event_key(b):
            return FlakinessReport(
                equal=False,
                position=position,
                left=_event_summary(a),
                right=_event_summary(b),
            )
        position += 1


def compare_traces(a: TraceRecord, b: TraceRecord) -> FlakinessReport:
    return _first_divergence(a.events, b.events)


def compare_trace_files(path_a, path_b) -> FlakinessReport:
    """Streaming comparison; neither trace is materialized in memory."""
    with TraceReader(path_a) as ra, TraceReader(path_b) as rb:
        return _first_divergence(ra.events(), rb.events())


# -- reporting ---------------------------------------------------------------


def load_manifest(path) -> list[str]:
    """A run manifest is a text file listing one trace path per line
    (relative paths resolve against the manifest's directory)."""
    base = os.path.dirname(os.path.abspath(path))
    out = []
    with open(path, "r", encoding="utf-8") as fh:
        for raw in fh:
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            out.append(line if os.path.isabs(line) else os.path.join(base, line))
    return out


def table_report(runs) -> str:
    """Render (scenario_name, config, OverheadStats) triples as the overhead
    grids plus a machine-readable block.

    One grid per screenshot setting: rows are scenarios, columns are the two
    granularities, cells are mean per-event overhead in milliseconds with two
    decimals. The [data] block repeats every run as one key=value line.
    """
    cells: dict[tuple[bool, str, str], OverheadStats] = {}
    scenario_order: list[str] = []
    for scenario_name, config, stats in runs:
        if scenario_name not in scenario_order:
            scenario_order.append(scenario_name)
        cells[(config.capture_screenshots, scenario_name, config.granularity.name)] = stats

    lines: list[str] = []
    name_width = max([len(s) for s in scenario_order] + [len("scenario")])
    for shots in (True, False):
        if not any(key[0] == shots for key in cells):
            continue
        lines.append(
            "mean overhead per event, ms "
            f"(screenshots {'on' if shots else 'off'})"
        )
        lines.append(f"{'scenario':<{name_width}}  {'ALL':>8}  {'HANDLED':>8}")
        for name in scenario_order:
            row = [f"{name:<{name_width}}"]
            for gran in ("ALL", "HANDLED"):
                stats = cells.get((shots, name, gran))
                row.append(f"{stats.mean_ns / 1e6:>8.2f}" if stats else f"{'-':>8}")
            lines.append("  ".join(row))
        lines.append("")
    lines.append("[data]")
    for scenario_name, config, stats in runs:
        lines.append(
            f"scenario={scenario_name}"
            f" granularity={config.granularity.name}"
            f" screenshots={'on' if config.capture_screenshots else 'off'}"
            f" samples={stats.sample_count}"
            f" kept={stats.kept}"
            f" removed={stats.removed}"
            f" mean_ms={stats.mean_ns / 1e6:.2f}"
            f" mean_ns={stats.mean_ns:.1f}"
            f" stddev_ns={stats.stddev_ns:.1f}"
            f" min_ns={stats.min_ns}"
            f" max_ns={stats.max_ns}"
        )
    return "\n".join(lines) + "\n"
