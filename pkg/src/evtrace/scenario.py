"""Scripted workloads.

A scenario file is a line-oriented script: declarations build a widget tree
and attach handlers, actions fire events against it. The format exists so the
benchmark workloads live in data files that can be diffed and replayed rather
than in code.

    scenario editor-smoke
    # declarations (symbols become numeric widget ids, 1-based, in order)
    window  win  class=app.MainFrame x=0 y=0 w=192 h=144
    widget  edit parent=win class=app.Editor x=4 y=4 w=120 h=100
    handler edit KEY_PRESSED app.Editor.keyPressed
    # actions
    open win
    repeat 50 key edit a
    burst PAINT win 200
    close win

Action verbs: `key W C` (one actuation: pressed, released, typed), `click W`,
`select W`, `action W`, `open W`, `close W`, `burst TYPE W N`, and
`repeat N <key|click|select|action|burst ...>`. Windows start hidden unless
declared `visible=yes`; `open` makes the window visible and fires
WINDOW_OPENED, `close` fires WINDOW_CLOSED and hides it.
"""

from __future__ import annotations

import dataclasses

from .dispatch import DispatchCore
from .model import EventType, Geometry, UnknownEventTypeError, parse_event_type

__all__ = ["Scenario", "ScenarioError", "load_scenario", "parse_scenario"]

_REPEATABLE = ("key", "click", "select", "action", "burst")


class ScenarioError(Exception):
    """Raised for schema violations; the message carries the line number."""


@dataclasses.dataclass(frozen=True)
class _WindowDecl:
    symbol: str
    class_name: str
    geometry: Geometry
    visible: bool


@dataclasses.dataclass(frozen=True)
class _WidgetDecl:
    symbol: str
    parent: str
    class_name: str
    geometry: Geometry


@dataclasses.dataclass(frozen=True)
class _HandlerDecl:
    widget: str
    event_type: EventType
    handler_id: str


class Scenario:
    """Parsed scenario: declarations plus an ordered action list."""

    def __init__(self, name: str, declarations, handlers, actions):
        self.name = name
        self.declarations = tuple(declarations)
        self.handlers = tuple(handlers)
        self.actions = tuple(actions)
        self.hits: dict[str, int] = {}

    def build(self, core: DispatchCore) -> dict[str, int]:
        """Create the declared tree on `core`; returns symbol -> widget id."""
        ids: dict[str, int] = {}
        for decl in self.declarations:
            wid = len(ids) + 1
            ids[decl.symbol] = wid
            if isinstance(decl, _WindowDecl):
                core.add_window(wid, decl.class_name, decl.geometry, visible=decl.visible)
            else:
                core.add_widget(wid, ids[decl.parent], decl.class_name, decl.geometry)
        for h in self.handlers:
            core.register_listener(
                ids[h.widget], h.event_type, h.handler_id,
                self._make_callback(h.handler_id),
            )
        return ids

    def _make_callback(self, handler_id: str):
        def handle(widget, event_type, payload):
            self.hits[handler_id] = self.hits.get(handler_id, 0) + 1
        return handle

    def replay(self, core: DispatchCore, ids: dict[str, int]) -> int:
        """Execute every action in order; returns the number of events fired."""
        fired = 0
        for act in self.actions:
            fired += self._run_action(core, ids, act)
        return fired

    def _run_action(self, core, ids, act) -> int:
        verb = act[0]
        if verb == "repeat":
            _, count, inner = act
            fired = 0
            for _ in range(count):
                fired += self._run_action(core, ids, inner)
            return fired
        if verb == "key":
            core.synthesize_key_actuation(ids[act[1]], act[2])
            return 3
        if verb == "click":
            core.fire_event(ids[act[1]], EventType.MOUSE_CLICKED)
            return 1
        if verb == "select":
            core.fire_event(ids[act[1]], EventType.SELECTION)
            return 1
        if verb == "action":
            core.fire_event(ids[act[1]], EventType.ACTION)
            return 1
        if verb == "open":
            core.set_visible(ids[act[1]], True)
            core.fire_event(ids[act[1]], EventType.WINDOW_OPENED)
            return 1
        if verb == "close":
            core.fire_event(ids[act[1]], EventType.WINDOW_CLOSED)
            core.set_visible(ids[act[1]], False)
            return 1
        if verb == "burst":
            _, event_type, symbol, count = act
            wid = ids[symbol]
            for _ in range(count):
                core.fire_event(wid, event_type)
            return count
        raise AssertionError(f"unreachable verb {verb!r}")


def load_scenario(path) -> Scenario:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_scenario(fh.read())


def parse_scenario(text: str) -> Scenario:
    name = None
    declarations: list = []
    handlers: list[_HandlerDecl] = []
    actions: list[tuple] = []
    symbols: set[str] = set()

    for lineno, raw in enumerate(text.splitlines(), start=1):
        tokens = _tokens(raw)
        if not tokens:
            continue
        verb, args = tokens[0], tokens[1:]

        if verb == "scenario":
            if name is not None:
                raise ScenarioError(f"line {lineno}: duplicate scenario statement")
            if len(args) != 1:
                raise ScenarioError(f"line {lineno}: expected: scenario NAME")
            name = args[0]
            continue
        if name is None:
            raise ScenarioError(
                f"line {lineno}: first statement must be: scenario NAME"
            )

        if verb == "window":
            decl = _parse_window(lineno, args, symbols)
            declarations.append(decl)
            symbols.add(decl.symbol)
        elif verb == "widget":
            decl = _parse_widget(lineno, args, symbols)
            declarations.append(decl)
            symbols.add(decl.symbol)
        elif verb == "handler":
            handlers.append(_parse_handler(lineno, args, symbols, handlers))
        elif verb == "repeat":
            actions.append(_parse_repeat(lineno, args, symbols))
        elif verb in ("key", "click", "select", "action", "open", "close", "burst"):
            actions.append(_parse_simple_action(lineno, verb, args, symbols))
        else:
            raise ScenarioError(f"line {lineno}: unknown statement {verb!r}")

    if name is None:
        raise ScenarioError("line 1: empty scenario (missing: scenario NAME)")
    return Scenario(name, declarations, handlers, actions)


def _tokens(raw: str) -> list[str]:
    out = []
    for tok in raw.split():
        if tok.startswith("#"):
            break
        out.append(tok)
    return out


def _parse_params(lineno: int, args, required, optional=()) -> dict[str, str]:
    params = {}
    for tok in args:
        key, sep, value = tok.partition("=")
        if not sep or not key or not value:
            raise ScenarioError(f"line {lineno}: malformed parameter {tok!r}")
        if key in params:
            raise ScenarioError(f"line {lineno}: duplicate parameter {key!r}")
        if key not in required and key not in optional:
            raise ScenarioError(f"line {lineno}: unknown parameter {key!r}")
        params[key] = value
    for key in required:
        if key not in params:
            raise ScenarioError(f"line {lineno}: missing parameter {key!r}")
    return params


def _parse_int(lineno: int, key: str, value: str) -> int:
    try:
        return int(value)
    except ValueError:
        raise ScenarioError(f"line {lineno}: {key}={value!r} is not an integer") from None


def _parse_geometry(lineno: int, params) -> Geometry:
    x = _parse_int(lineno, "x", params["x"])
    y = _parse_int(lineno, "y", params["y"])
    w = _parse_int(lineno, "w", params["w"])
    h = _parse_int(lineno, "h", params["h"])
    if w < 1 or h < 1:
        raise ScenarioError(f"line {lineno}: w and h must be >= 1, got {w}x{h}")
    return Geometry(x=x, y=y, width=w, height=h)


def _check_new_symbol(lineno: int, symbol: str, symbols) -> None:
    if symbol in symbols:
        raise ScenarioError(f"line {lineno}: duplicate widget symbol {symbol!r}")


def _check_known(lineno: int, symbol: str, symbols) -> None:
    if symbol not in symbols:
        raise ScenarioError(f"line {lineno}: unknown widget symbol {symbol!r}")


def _parse_window(lineno: int, args, symbols) -> _WindowDecl:
    if not args:
        raise ScenarioError(f"line {lineno}: expected: window SYMBOL params...")
    symbol = args[0]
    _check_new_symbol(lineno, symbol, symbols)
    params = _parse_params(lineno, args[1:], required=("class", "x", "y", "w", "h"),
                           optional=("visible",))
    visible = params.get("visible", "no")
    if visible not in ("yes", "no"):
        raise ScenarioError(f"line {lineno}: visible must be yes or no, got {visible!r}")
    return _WindowDecl(symbol, params["class"], _parse_geometry(lineno, params),
                       visible == "yes")


def _parse_widget(lineno: int, args, symbols) -> _WidgetDecl:
    if not args:
        raise ScenarioError(f"line {lineno}: expected: widget SYMBOL params...")
    symbol = args[0]
    _check_new_symbol(lineno, symbol, symbols)
    params = _parse_params(lineno, args[1:],
                           required=("parent", "class", "x", "y", "w", "h"))
    _check_known(lineno, params["parent"], symbols)
    return _WidgetDecl(symbol, params["parent"], params["class"],
                       _parse_geometry(lineno, params))


def _parse_event_type(lineno: int, token: str) -> EventType:
    try:
        return parse_event_type(token)
    except UnknownEventTypeError as exc:
        raise ScenarioError(f"line {lineno}: {exc}") from None


def _parse_handler(lineno: int, args, symbols, handlers) -> _HandlerDecl:
    if len(args) != 3:
        raise ScenarioError(f"line {lineno}: expected: handler WIDGET TYPE HANDLER_ID")
    widget, type_token, handler_id = args
    _check_known(lineno, widget, symbols)
    event_type = _parse_event_type(lineno, type_token)
    for h in handlers:
        if h.widget == widget and h.event_type is event_type and h.handler_id == handler_id:
            raise ScenarioError(
                f"line {lineno}: handler {handler_id!r} already declared for "
                f"{widget}/{event_type.name}"
            )
    return _HandlerDecl(widget, event_type, handler_id)


def _parse_simple_action(lineno: int, verb: str, args, symbols) -> tuple:
    if verb == "key":
        if len(args) != 2:
            raise ScenarioError(f"line {lineno}: expected: key WIDGET CHAR")
        _check_known(lineno, args[0], symbols)
        return ("key", args[0], args[1])
    if verb == "burst":
        if len(args) != 3:
            raise ScenarioError(f"line {lineno}: expected: burst TYPE WIDGET COUNT")
        event_type = _parse_event_type(lineno, args[0])
        _check_known(lineno, args[1], symbols)
        count = _parse_int(lineno, "count", args[2])
        if count < 1:
            raise ScenarioError(f"line {lineno}: burst count must be >= 1, got {count}")
        return ("burst", event_type, args[1], count)
    # click / select / action / open / close all take one widget symbol
    if len(args) != 1:
        raise ScenarioError(f"line {lineno}: expected: {verb} WIDGET")
    _check_known(lineno, args[0], symbols)
    return (verb, args[0])


def _parse_repeat(lineno: int, args, symbols) -> tuple:
    if len(args) < 2:
        raise ScenarioError(f"line {lineno}: expected: repeat COUNT ACTION...")
    count = _parse_int(lineno, "repeat count", args[0])
    if count < 1:
        raise ScenarioError(f"line {lineno}: repeat count must be >= 1, got {count}")
    inner_verb = args[1]
    if inner_verb not in _REPEATABLE:
        raise ScenarioError(
            f"line {lineno}: repeat only wraps {', '.join(_REPEATABLE)}; "
            f"got {inner_verb!r}"
        )
    inner = _parse_simple_action(lineno, inner_verb, args[2:], symbols)
    return ("repeat", count, inner)
