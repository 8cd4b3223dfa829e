"""Scenario scripts: parsing, per-line diagnostics, tree building, and replay.
Replay counts are cross-checked against an independent interpretation of the
parsed action tuples."""

import pytest

from evtrace.dispatch import DispatchCore
from evtrace.model import EventType
from evtrace.scenario import Scenario, ScenarioError, load_scenario, parse_scenario

HEADER = "scenario t\nwindow win class=a.B x=0 y=0 w=8 h=8\n"

MINI_TEXT = """\
scenario mini
window win class=demo.Frame x=0 y=0 w=64 h=48
widget btn parent=win class=demo.Button x=4 y=4 w=24 h=12
widget txt parent=win class=demo.Text x=4 y=20 w=40 h=16
handler btn MOUSE_CLICKED demo.Button.onClick
handler txt KEY_PRESSED demo.Text.onKey
handler win ACTION demo.Frame.onAction
action win
burst PAINT win 5
open win
repeat 3 key txt k
click btn
burst MOUSE_MOVED win 4
close win
"""


def count_events(actions) -> int:
    """Independent event count from the parsed action tuples."""

    def one(act):
        if act[0] == "repeat":
            return act[1] * one(act[2])
        if act[0] == "key":
            return 3
        if act[0] == "burst":
            return act[3]
        return 1

    return sum(one(act) for act in actions)


def replay_mini():
    scenario = parse_scenario(MINI_TEXT)
    core = DispatchCore()
    ids = scenario.build(core)
    fired = scenario.replay(core, ids)
    return scenario, core, ids, fired


class TestParse:
    def test_structure(self):
        scenario = parse_scenario(MINI_TEXT)
        assert scenario.name == "mini"
        assert [d.symbol for d in scenario.declarations] == ["win", "btn", "txt"]
        assert len(scenario.handlers) == 3
        assert len(scenario.actions) == 7

    def test_comments_and_blank_lines_ignored(self):
        text = (
            "# leading comment\n"
            "scenario c\n"
            "\n"
            "window win class=a.B x=0 y=0 w=8 h=8  # trailing comment\n"
            "action win\n"
        )
        scenario = parse_scenario(text)
        assert scenario.name == "c"
        assert scenario.actions == (("action", "win"),)

    def test_action_tuples(self):
        scenario = parse_scenario(MINI_TEXT)
        assert scenario.actions[0] == ("action", "win")
        assert scenario.actions[1] == ("burst", EventType.PAINT, "win", 5)
        assert scenario.actions[3] == ("repeat", 3, ("key", "txt", "k"))
        assert scenario.actions[6] == ("close", "win")

    def test_handler_declarations(self):
        scenario = parse_scenario(MINI_TEXT)
        decl = scenario.handlers[0]
        assert (decl.widget, decl.event_type, decl.handler_id) == (
            "btn", EventType.MOUSE_CLICKED, "demo.Button.onClick")

    def test_load_scenario_reads_the_file(self, data_dir):
        scenario = load_scenario(data_dir / "mini.scn")
        assert scenario.name == "mini"
        assert len(scenario.actions) == 7
        assert count_events(scenario.actions) == 22

    def test_shipped_scenarios_parse(self, scenarios_dir):
        paths = sorted(scenarios_dir.glob("*.scn"))
        assert len(paths) == 5
        for path in paths:
            scenario = load_scenario(path)
            assert scenario.name == path.stem
            assert scenario.actions


BAD_SCRIPTS = [
    ("", "line 1: empty scenario"),
    ("window win class=a.B x=0 y=0 w=8 h=8\n",
     "line 1: first statement must be: scenario NAME"),
    ("scenario a\nscenario b\n", "line 2: duplicate scenario statement"),
    ("scenario\n", "line 1: expected: scenario NAME"),
    (HEADER + "frobnicate win\n", "line 3: unknown statement 'frobnicate'"),
    ("scenario t\nwindow\n", "line 2: expected: window SYMBOL"),
    ("scenario t\nwidget\n", "line 2: expected: widget SYMBOL"),
    ("scenario t\nwindow win class x=0 y=0 w=8 h=8\n",
     "line 2: malformed parameter 'class'"),
    ("scenario t\nwindow win class=a.B x=0 x=1 y=0 w=8 h=8\n",
     "line 2: duplicate parameter 'x'"),
    ("scenario t\nwindow win class=a.B x=0 y=0 w=8 h=8 z=3\n",
     "line 2: unknown parameter 'z'"),
    ("scenario t\nwindow win class=a.B x=0 y=0 w=8\n",
     "line 2: missing parameter 'h'"),
    ("scenario t\nwindow win class=a.B x=abc y=0 w=8 h=8\n",
     "line 2: x='abc' is not an integer"),
    ("scenario t\nwindow win class=a.B x=0 y=0 w=0 h=10\n",
     r"line 2: w and h must be >= 1, got 0x10"),
    ("scenario t\nwindow win class=a.B x=0 y=0 w=8 h=8 visible=maybe\n",
     "line 2: visible must be yes or no, got 'maybe'"),
    (HEADER + "window win class=a.C x=0 y=0 w=8 h=8\n",
     "line 3: duplicate widget symbol 'win'"),
    (HEADER + "widget kid parent=nope class=a.C x=0 y=0 w=8 h=8\n",
     "line 3: unknown widget symbol 'nope'"),
    (HEADER + "handler win ACTION\n",
     "line 3: expected: handler WIDGET TYPE HANDLER_ID"),
    (HEADER + "handler ghost ACTION a.B.on\n",
     "line 3: unknown widget symbol 'ghost'"),
    (HEADER + "handler win BOGUS a.B.on\n", "line 3: .*BOGUS"),
    (HEADER + "handler win ACTION a.B.on\nhandler win ACTION a.B.on\n",
     "line 4: handler 'a.B.on' already declared for win/ACTION"),
    (HEADER + "key win\n", "line 3: expected: key WIDGET CHAR"),
    (HEADER + "burst PAINT win\n", "line 3: expected: burst TYPE WIDGET COUNT"),
    (HEADER + "burst BOGUS win 5\n", "line 3: .*BOGUS"),
    (HEADER + "burst PAINT ghost 5\n", "line 3: unknown widget symbol 'ghost'"),
    (HEADER + "burst PAINT win 0\n", "line 3: burst count must be >= 1, got 0"),
    (HEADER + "burst PAINT win many\n", "line 3: count='many' is not an integer"),
    (HEADER + "repeat 5\n", r"line 3: expected: repeat COUNT ACTION\.\.\."),
    (HEADER + "repeat 0 click win\n", "line 3: repeat count must be >= 1, got 0"),
    (HEADER + "repeat 5 open win\n",
     "line 3: repeat only wraps key, click, select, action, burst; got 'open'"),
    (HEADER + "click win win\n", "line 3: expected: click WIDGET"),
    (HEADER + "click ghost\n", "line 3: unknown widget symbol 'ghost'"),
]


class TestParseErrors:
    @pytest.mark.parametrize("text,match", BAD_SCRIPTS,
                             ids=[m[:40] for _, m in BAD_SCRIPTS])
    def test_rejected_with_line_number(self, text, match):
        with pytest.raises(ScenarioError, match=match):
            parse_scenario(text)


class TestBuild:
    def test_symbols_map_to_dense_ids_in_order(self):
        scenario = parse_scenario(MINI_TEXT)
        core = DispatchCore()
        ids = scenario.build(core)
        assert ids == {"win": 1, "btn": 2, "txt": 3}

    def test_tree_shape_and_visibility(self):
        scenario = parse_scenario(MINI_TEXT)
        core = DispatchCore()
        scenario.build(core)
        win, btn, txt = core.widget(1), core.widget(2), core.widget(3)
        assert win.class_name == "demo.Frame" and not win.visible
        assert btn.parent is win and btn.visible
        assert txt.index_in_parent() == 1
        assert btn.geometry.width == 24

    def test_visible_yes_window_starts_visible(self):
        scenario = parse_scenario(
            "scenario v\nwindow win class=a.B x=0 y=0 w=8 h=8 visible=yes\n")
        core = DispatchCore()
        scenario.build(core)
        assert core.widget(1).visible

    def test_handlers_registered_with_callbacks(self):
        scenario = parse_scenario(MINI_TEXT)
        core = DispatchCore()
        scenario.build(core)
        refs = core.listeners(2, EventType.MOUSE_CLICKED)
        assert [r.handler_id for r in refs] == ["demo.Button.onClick"]


class TestReplay:
    def test_event_count_matches_independent_interpretation(self):
        scenario, core, _, fired = replay_mini()
        assert fired == 22
        assert fired == count_events(scenario.actions)
        assert len(core.records) == 22

    def test_handled_events_and_hits(self):
        scenario, core, _, _ = replay_mini()
        handled = [r for r in core.records if r.handler_ids]
        assert len(handled) == 5
        assert scenario.hits == {
            "demo.Frame.onAction": 1,
            "demo.Text.onKey": 3,
            "demo.Button.onClick": 1,
        }

    def test_key_actuations_fire_consecutive_triples(self):
        _, core, _, _ = replay_mini()
        types = [r.event_type for r in core.records]
        triple = [EventType.KEY_PRESSED, EventType.KEY_RELEASED, EventType.KEY_TYPED]
        # the repeat block sits between WINDOW_OPENED and the click
        assert types[7:16] == triple * 3

    def test_open_makes_window_visible_before_the_event(self):
        scenario = parse_scenario(HEADER + "open win\n")
        core = DispatchCore()
        seen = []
        ids = scenario.build(core)
        core.add_hook(pre_fire=lambda w, t, l: seen.append((t, w.root().visible)))
        scenario.replay(core, ids)
        assert seen == [(EventType.WINDOW_OPENED, True)]

    def test_close_hides_the_window_after_the_event(self):
        scenario = parse_scenario(HEADER + "open win\nclose win\n")
        core = DispatchCore()
        seen = []
        ids = scenario.build(core)
        core.add_hook(pre_fire=lambda w, t, l: seen.append((t, w.root().visible)))
        scenario.replay(core, ids)
        assert seen[-1] == (EventType.WINDOW_CLOSED, True)
        assert not core.widget(1).visible

    def test_burst_fires_count_events_of_the_type(self):
        scenario = parse_scenario(HEADER + "burst SELECTION win 7\n")
        core = DispatchCore()
        fired = scenario.replay(core, scenario.build(core))
        assert fired == 7
        assert {r.event_type for r in core.records} == {EventType.SELECTION}

    def test_replay_is_deterministic(self):
        runs = []
        for _ in range(2):
            scenario = parse_scenario(MINI_TEXT)
            core = DispatchCore()
            scenario.replay(core, scenario.build(core))
            runs.append([(r.seq, r.widget_id, r.event_type, r.handler_ids)
                         for r in core.records])
        assert runs[0] == runs[1]
