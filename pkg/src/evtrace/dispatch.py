"""Synthetic GUI-toolkit shim: widget tree, listener registry, event firing.

The firing engine exposes the two classic instrumentation cut points as
first-class hooks: pre_fire runs before any handler, post_fire after the last
one. Hooks observe the exact listener snapshot dispatch will use.

Dispatch is single-threaded: the first fire_event call pins the dispatch
thread, and registry mutation or firing from any other thread raises. Reads
(widget lookup, listener inspection) are allowed from other threads.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass, field

from .model import EventType, Geometry, HandlerRef


class DispatchError(Exception):
    pass


class TreeError(DispatchError):
    pass


class RegistrationError(DispatchError):
    pass


class ThreadAffinityError(DispatchError):
    pass


@dataclass(eq=False)
class Widget:
    widget_id: int
    class_name: str
    geometry: Geometry
    parent: "Widget | None" = None
    children: "list[Widget]" = field(default_factory=list)
    visible: bool = True

    def index_in_parent(self) -> int:
        """Position in the parent's children list; -1 for root windows."""
        if self.parent is None:
            return -1
        return self.parent.children.index(self)

    def root(self) -> "Widget":
        node = self
        while node.parent is not None:
            node = node.parent
        return node


@dataclass(eq=False, slots=True)
class DispatchRecord:
    """Ground-truth log entry for one fire; appended before hooks run."""

    seq: int
    widget_id: int
    event_type: EventType
    handler_ids: tuple[str, ...]
    errors: "list[tuple[str, str]] | None" = None  # (handler_id, error) pairs


@dataclass(eq=False)
class Hook:
    pre_fire: object = None  # callback(widget, event_type, listeners)
    post_fire: object = None


class DispatchCore:
    """Widget registry, dispatch table, and firing engine for one session."""

    def __init__(self):
        self._widgets: dict[int, Widget] = {}
        self._roots: list[Widget] = []
        self._table: dict[tuple[int, EventType], list[HandlerRef]] = {}
        self._callbacks: dict[tuple[int, EventType, str], object] = {}
        self._order_counters: dict[tuple[int, EventType], int] = {}
        self._hooks: list[Hook] = []
        self.records: list[DispatchRecord] = []
        self._seq = 0
        self._dispatch_thread: int | None = None

    # -- tree ---------------------------------------------------------------

    def widget(self, widget_id: int) -> Widget:
        try:
            return self._widgets[widget_id]
        except KeyError:
            raise TreeError(f"unknown widget id {widget_id}") from None

    def all_widgets(self) -> tuple[Widget, ...]:
        """Widgets in creation order."""
        return tuple(self._widgets.values())

    def roots(self) -> tuple[Widget, ...]:
        return tuple(self._roots)

    def add_window(self, widget_id: int, class_name: str, geometry: Geometry,
                   visible: bool = False) -> Widget:
        # windows start hidden: real applications fire plenty of events
        # before their GUI becomes visible
        return self._add(widget_id, class_name, geometry, parent=None, visible=visible)

    def add_widget(self, widget_id: int, parent_id: int, class_name: str,
                   geometry: Geometry, visible: bool = True) -> Widget:
        parent = self.widget(parent_id)
        return self._add(widget_id, class_name, geometry, parent=parent, visible=visible)

    def _add(self, widget_id, class_name, geometry, parent, visible) -> Widget:
        self._check_thread()
        if widget_id in self._widgets:
            raise TreeError(f"duplicate widget id {widget_id}")
        w = Widget(widget_id=widget_id, class_name=class_name, geometry=geometry,
                   parent=parent, visible=visible)
        self._widgets[widget_id] = w
        if parent is None:
            self._roots.append(w)
        else:
            parent.children.append(w)
        return w

    def set_visible(self, widget_id: int, visible: bool) -> None:
        self._check_thread()
        self.widget(widget_id).visible = visible

    # -- listener registry ----------------------------------------------------

    def register_listener(self, widget_id: int, event_type: EventType,
                          handler_id: str, callback=None) -> HandlerRef:
        self._check_thread()
        self.widget(widget_id)  # widget must exist
        key = (widget_id, event_type)
        refs = self._table.setdefault(key, [])
        if any(r.handler_id == handler_id for r in refs):
            raise RegistrationError(
                f"handler {handler_id!r} already registered for widget "
                f"{widget_id} / {event_type.name}"
            )
        order = self._order_counters.get(key, 0)
        self._order_counters[key] = order + 1
        ref = HandlerRef(handler_id=handler_id, registration_order=order)
        refs.append(ref)
        if callback is not None:
            self._callbacks[(widget_id, event_type, handler_id)] = callback
        return ref

    def unregister_listener(self, widget_id: int, event_type: EventType,
                            handler_id: str) -> bool:
        self._check_thread()
        refs = self._table.get((widget_id, event_type))
        if not refs:
            return False
        for i, ref in enumerate(refs):
            if ref.handler_id == handler_id:
                del refs[i]
                self._callbacks.pop((widget_id, event_type, handler_id), None)
                return True
        return False

    def listeners(self, widget_id: int, event_type: EventType) -> tuple[HandlerRef, ...]:
        return tuple(self._table.get((widget_id, event_type), ()))

    # -- hooks --------------------------------------------------------------

    def add_hook(self, pre_fire=None, post_fire=None) -> Hook:
        hook = Hook(pre_fire=pre_fire, post_fire=post_fire)
        self._hooks.append(hook)
        return hook

    def remove_hook(self, hook: Hook) -> None:
        if hook in self._hooks:
            self._hooks.remove(hook)

    # -- firing ----------------------------------------------------------------

    def fire_event(self, widget_id: int, event_type: EventType, payload=None) -> DispatchRecord:
        """Fire one event: pre hooks, handlers in registration order, post hooks.

        Handlers see snapshot semantics: (un)registrations they perform apply
        to subsequent fires, never the in-flight one. Handler exceptions are
        caught and recorded; dispatch of the remaining handlers continues.
        """
        widget = self.widget(widget_id)
        self._pin_thread()
        snapshot = self.listeners(widget_id, event_type)
        # callbacks are snapshotted too, so a mid-dispatch unregister cannot
        # silence a handler that was registered at fire time
        invocations = [
            (ref, self._callbacks.get((widget_id, event_type, ref.handler_id)))
            for ref in snapshot
        ]
        self._seq += 1
        record = DispatchRecord(
            seq=self._seq,
            widget_id=widget_id,
            event_type=event_type,
            handler_ids=tuple(ref.handler_id for ref in snapshot),
        )
        self.records.append(record)
        for hook in tuple(self._hooks):
            if hook.pre_fire is not None:
                hook.pre_fire(widget, event_type, snapshot)
        for ref, callback in invocations:
            if callback is None:
                continue
            try:
                callback(widget, event_type, payload)
            except Exception as exc:  # noqa: BLE001 - dispatch must survive handler bugs
                if record.errors is None:
                    record.errors = []
                record.errors.append((ref.handler_id, f"{type(exc).__name__}: {exc}"))
        for hook in tuple(self._hooks):
            if hook.post_fire is not None:
                hook.post_fire(widget, event_type, snapshot)
        return record

    def synthesize_key_actuation(self, widget_id: int, key: str) -> list[DispatchRecord]:
        """One key actuation: KEY_PRESSED, KEY_RELEASED, KEY_TYPED, in that order."""
        return [
            self.fire_event(widget_id, EventType.KEY_PRESSED, key),
            self.fire_event(widget_id, EventType.KEY_RELEASED, key),
            self.fire_event(widget_id, EventType.KEY_TYPED, key),
        ]

    # -- thread affinity -----------------------------------------------------

    def _pin_thread(self) -> None:
        ident = threading.get_ident()
        if self._dispatch_thread is None:
            self._dispatch_thread = ident
        elif self._dispatch_thread != ident:
            raise ThreadAffinityError(
                "fire_event called from a second thread; dispatch is single-threaded"
            )

    def _check_thread(self) -> None:
        if self._dispatch_thread is not None and self._dispatch_thread != threading.get_ident():
            raise ThreadAffinityError(
                "registry mutation from a non-dispatch thread is forbidden"
            )


def build_widget_tree(core: DispatchCore, spec):
    """Construct a widget tree (or forest) in `core` from a nested description.

    `spec` is either one window mapping or a list of them. Each node needs
    `id`, `class_name`, `x`, `y`, `w`, `h`; `visible` is optional (windows
    default to hidden, child widgets to visible); `children` nests more nodes.
    Child indices equal their positions in the `children` lists. Raises
    TreeError on duplicate ids or a node that appears among its own ancestors.
    """
    if isinstance(spec, (list, tuple)):
        return [_build_node(core, node, parent=None, ancestors=()) for node in spec]
    return _build_node(core, spec, parent=None, ancestors=())


def _build_node(core, node, parent, ancestors):
    if any(node is seen for seen in ancestors):
        raise TreeError(f"cycle: node id {node.get('id')!r} is its own ancestor")
    try:
        widget_id = node["id"]
        class_name = node["class_name"]
        geometry = Geometry(node["x"], node["y"], node["w"], node["h"])
    except KeyError as exc:
        raise TreeError(f"tree node missing required key {exc}") from None
    if parent is None:
        widget = core.add_window(widget_id, class_name, geometry,
                                 visible=node.get("visible", False))
    else:
        widget = core.add_widget(widget_id, parent.widget_id, class_name, geometry,
                                 visible=node.get("visible", True))
    for child in node.get("children", ()):
        _build_node(core, child, widget, ancestors + (node,))
    return widget
