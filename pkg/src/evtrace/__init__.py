"""In-process GUI-event tracing over a binary TCP protocol.

An agent hooks a synthetic event-dispatch core, filters fired events by type
and granularity, and streams one self-contained record per event (source
widget, geometry, optional screenshot, timers, listener list) to a host
process. The bench harness replays scripted scenarios against the pipeline
and measures per-event overhead.
"""

from .agent import (
    AgentError,
    AgentListener,
    AgentSession,
    FireOutcome,
    InstallError,
    OverheadSample,
    SessionState,
    capture_screenshot,
    collect_listeners,
    install_agent,
    on_event_fired,
)
from .bench import (
    BenchError,
    CompletenessChecker,
    CompletenessError,
    FlakinessReport,
    RunResult,
    compare_trace_files,
    compare_traces,
    drain_endpoint,
    quiesced,
    run,
    run_remote,
    run_scenario,
    serve,
    table_report,
)
from .dispatch import (
    DispatchCore,
    DispatchError,
    DispatchRecord,
    RegistrationError,
    ThreadAffinityError,
    TreeError,
    Widget,
    build_widget_tree,
)
from .host import (
    ConnectError,
    Connector,
    ConnectorState,
    HostError,
    StateError,
    Subscription,
    add_event_message_listener,
    configure,
    connect,
    receive_loop,
    record_trace,
)
from .model import (
    EventMessage,
    EventType,
    Geometry,
    Granularity,
    HandlerRef,
    InstrumentConfig,
    Screenshot,
    UnknownEventTypeError,
    format_config,
    make_config,
    parse_config,
    passes_filters,
    validate_message,
)
from .raster import render_screenshot, widget_color
from .scenario import Scenario, ScenarioError, load_scenario, parse_scenario
from .stats import (
    HistogramReport,
    OverheadStats,
    StatsError,
    histogram,
    outlier_mask,
    overhead_stats,
)
from .tracefile import (
    TraceFileWriter,
    TraceFormatError,
    TraceReader,
    TraceRecord,
    read_trace,
    read_trace_meta,
    write_trace,
)
from .wire import (
    Frame,
    FrameDecoder,
    MalformedFrame,
    SessionHello,
    WireError,
    decode_event,
    decode_frame,
    encode_event,
    encode_frame,
)

__version__ = "0.1.0"
