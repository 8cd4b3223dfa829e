"""evtrace-bench command line.

Subcommands:
  run      replay a scenario against an in-process or remote agent
  serve    agent side of a remote run: replay one scenario for one host
  stats    per-field overhead statistics from a trace footer
  hist     sigma-binned overhead histogram from a trace footer
  compare  order/content comparison of two traces
  report   overhead grids from a manifest of trace files

Exit codes: 0 success, 1 divergence/loss/failure, 2 usage error.
"""

from __future__ import annotations

import argparse
import sys

from . import bench
from .host import ConnectError, HostError
from .model import ConfigTextError, UnknownEventTypeError, format_config, make_config
from .scenario import ScenarioError, load_scenario
from .stats import StatsError, histogram, overhead_stats
from .stats import SAMPLE_FIELDS
from .tracefile import TraceFormatError, TraceReader, read_trace_meta

__all__ = ["main"]


def _parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="evtrace-bench",
        description="GUI-event tracing benchmark harness",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="replay a scenario and stream its events")
    run.add_argument("--scenario", required=True, help="scenario file to replay")
    run.add_argument("--granularity", required=True, choices=["all", "handled"])
    run.add_argument("--screenshots", required=True, choices=["on", "off"])
    run.add_argument("--ignore", default="", metavar="TYPES",
                     help="comma-separated event types to drop at the source")
    run.add_argument("--endpoint", metavar="HOST:PORT",
                     help="receive from a served agent instead of running in-process "
                          "(the serving side replays; the scenario here only names the trace)")
    run.add_argument("--out", metavar="TRACE", help="write the received trace here")
    run.add_argument("--drain", action="store_true",
                     help="with --endpoint: swallow the stream without decoding, "
                          "so agent-side timings see no host backpressure")

    serve = sub.add_parser("serve", help="serve one scenario replay to one host")
    serve.add_argument("--scenario", required=True)
    serve.add_argument("--host", default="127.0.0.1")
    serve.add_argument("--port", type=int, default=0)
    serve.add_argument("--timeout", type=float, default=60.0,
                       help="seconds to wait for the host to connect")

    stats = sub.add_parser("stats", help="overhead statistics from a trace")
    stats.add_argument("trace")
    stats.add_argument("--outlier-sigma", type=float, default=3.0, metavar="N",
                       help="discard samples beyond N standard deviations (default 3)")

    hist = sub.add_parser("hist", help="sigma-binned overhead histogram")
    hist.add_argument("trace")

    compare = sub.add_parser("compare", help="compare two traces event-by-event")
    compare.add_argument("left")
    compare.add_argument("right")

    report = sub.add_parser("report", help="overhead grids from a run manifest")
    report.add_argument("manifest", help="text file listing one trace path per line")

    return parser


def _cmd_run(args) -> int:
    scenario = load_scenario(args.scenario)
    ignored = [t for t in args.ignore.split(",") if t]
    config = make_config(args.granularity, ignored, args.screenshots == "on")
    if args.drain:
        if not args.endpoint:
            print("error: --drain requires --endpoint", file=sys.stderr)
            return 2
        consumed = bench.drain_endpoint(config, args.endpoint)
        print(f"scenario={scenario.name} drained_bytes={consumed} ok=yes")
        return 0
    if args.endpoint:
        result = bench.run_remote(config, args.endpoint, trace_sink=args.out,
                                  scenario_name=scenario.name)
    else:
        result = bench.run(scenario, config, trace_sink=args.out)
    fired = "-" if result.events_fired is None else str(result.events_fired)
    print(
        f"scenario={result.scenario_name}"
        f" config=\"{format_config(config)}\""
        f" fired={fired}"
        f" received={result.events_streamed}"
        f" handled={result.handled_streamed}"
        f" dropped={result.dropped}"
        f" samples={len(result.samples)}"
        f" duration_s={result.duration_s:.2f}"
        f" ok={'yes' if result.ok else 'no'}"
    )
    if args.out:
        print(f"trace={args.out}")
    if not result.ok:
        print(f"error: {result.failure or 'events were dropped'}", file=sys.stderr)
        return 1
    return 0


def _cmd_serve(args) -> int:
    scenario = load_scenario(args.scenario)

    def announce(host, port):
        print(f"listening on {host}:{port}", flush=True)

    session = bench.serve(scenario, args.host, args.port,
                          announce=announce, timeout=args.timeout)
    print(f"served {len(session.samples)} events, {session.dropped} dropped")
    return 0


def _load_samples(path):
    with TraceReader(path) as reader:
        meta = reader.meta
        samples = reader.samples()
    return meta, samples


def _cmd_stats(args) -> int:
    meta, samples = _load_samples(args.trace)
    print(f"scenario={meta.scenario_name} config=\"{format_config(meta.config)}\"")
    for field in SAMPLE_FIELDS:
        s = overhead_stats(samples, field, sigma=args.outlier_sigma)
        print(
            f"field={s.field}"
            f" samples={s.sample_count}"
            f" kept={s.kept}"
            f" removed={s.removed}"
            f" sigma={s.sigma:g}"
            f" mean_ns={s.mean_ns:.1f}"
            f" stddev_ns={s.stddev_ns:.1f}"
            f" min_ns={s.min_ns}"
            f" max_ns={s.max_ns}"
            f" mean_ms={s.mean_ns / 1e6:.2f}"
        )
    return 0


def _cmd_hist(args) -> int:
    meta, samples = _load_samples(args.trace)
    s = overhead_stats(samples, "t_total_ns")
    report = histogram(samples, s, screenshots_enabled=meta.config.capture_screenshots)
    print(f"scenario={meta.scenario_name} config=\"{format_config(meta.config)}\"")
    for line in report.format_lines():
        print(line)
    return 0


def _cmd_compare(args) -> int:
    report = bench.compare_trace_files(args.left, args.right)
    print(report.describe())
    return 0 if report.equal else 1


def _cmd_report(args) -> int:
    runs = []
    for path in bench.load_manifest(args.manifest):
        with TraceReader(path) as reader:
            meta = reader.meta
            samples = reader.samples()
        if not samples:
            print(f"warning: {path} carries no overhead samples, skipping",
                  file=sys.stderr)
            continue
        runs.append((meta.scenario_name, meta.config, overhead_stats(samples)))
    if not runs:
        print("error: no usable traces in manifest", file=sys.stderr)
        return 1
    sys.stdout.write(bench.table_report(runs))
    return 0


_COMMANDS = {
    "run": _cmd_run,
    "serve": _cmd_serve,
    "stats": _cmd_stats,
    "hist": _cmd_hist,
    "compare": _cmd_compare,
    "report": _cmd_report,
}


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except (bench.BenchError, HostError, ConnectError, ScenarioError,
            ConfigTextError, UnknownEventTypeError, StatsError,
            TraceFormatError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
