import pytest

from dataclasses import replace

from treeforge.modules.baselang import parse_module
from treeforge.modules.cosim import (
    AgendaEntry,
    DeSession,
    cosimulate,
    export_access_log,
    parse_scenario,
    plant_step,
    render_timeline,
    run_until,
)
from treeforge.modules.errors import ConfigError, CosimError, ParseError
from conftest import fixture_text
from support import monolithic_watertank

DIGITS = """\
state
  shared n : int := 0
operations
  a() == n := n * 10 + 1
  b() == n := n * 10 + 2
"""


def with_agenda(scenario, *entries):
    return replace(scenario.config, agenda=tuple(AgendaEntry(op, period) for op, period in entries))


# scenario parsing


def test_watertank_scenario(watertank):
    plant = watertank.plant
    assert plant.initial == {"level": 2.5}
    assert plant.outputs == {"level": "level"}
    assert plant.inputs == ("valve",)
    assert plant.h == pytest.approx(0.1)
    config = watertank.config
    assert config.sync_step == pytest.approx(0.1)
    assert config.end_time == pytest.approx(20.0)
    assert config.agenda == (AgendaEntry("ctrl", 0.1),)
    assert watertank.module.shared_names == ("level", "valve")


@pytest.mark.parametrize(
    "old, new, fragment",
    [
        ("  h := 0.1\n", "", "needs a step"),
        ("  end := 20.0\n", "", "'end"),
        ("agenda ctrl every", "agenda stir every", "unknown operation 'stir'"),
        ("deriv level", "deriv depth", "undeclared plant state 'depth'"),
        ("output level <- level", "output open <- level", "not a shared variable"),
        ("output level <- level", "output level <- depth", "not a plant state"),
        ("(if valve = 1 then 1.0 else 0.0)", "(valve = 1)", "derivative of 'level'"),
        ("(if valve = 1 then", "(if open = 1 then", "derivative of 'level'"),
    ],
)
def test_scenario_errors(old, new, fragment):
    text = fixture_text("watertank.cosim")
    assert old in text
    with pytest.raises(ParseError) as info:
        parse_scenario(text.replace(old, new))
    assert fragment in info.value.message


def test_derivative_may_use_module_values(watertank):
    text = fixture_text("watertank.cosim")
    text = text.replace("state\n  shared level", "values\n  inflow = 0.5\nstate\n  shared level")
    text = text.replace("deriv level := 0.5 -", "deriv level := inflow -")
    scenario = parse_scenario(text)
    assert scenario.plant.inputs == ("valve",)
    timeline = cosimulate(scenario.module, scenario.config)
    assert render_timeline(timeline) == render_timeline(cosimulate(watertank.module, watertank.config))


# discrete-event side


def test_session_starts_from_initial_state(watertank):
    session = DeSession.start(watertank.module, watertank.config.agenda)
    assert session.clock == 0.0
    assert session.state == {"level": 2.5, "valve": 0, "open": 0}
    assert session.shared_values() == {"level": 2.5, "valve": 0}


def test_run_until_runs_due_invocations(watertank):
    session = DeSession.start(watertank.module, watertank.config.agenda)
    events, accesses = run_until(session, 0.35)
    assert [op for _, op in events] == ["ctrl"] * 3
    assert [t for t, _ in events] == pytest.approx([0.1, 0.2, 0.3])
    assert len(accesses) == 6
    assert session.clock == pytest.approx(0.35)
    assert run_until(session, 0.35) == ([], [])
    events, _ = run_until(session, 0.4)
    assert [t for t, _ in events] == pytest.approx([0.4])


def test_run_until_refuses_to_go_back(watertank):
    session = DeSession.start(watertank.module, watertank.config.agenda)
    run_until(session, 0.5)
    with pytest.raises(CosimError):
        run_until(session, 0.3)


def test_ties_run_in_agenda_order():
    session = DeSession.start(parse_module(DIGITS), (AgendaEntry("a", 0.2), AgendaEntry("b", 0.1)))
    events, _ = run_until(session, 0.2)
    assert [op for _, op in events] == ["b", "a", "b"]
    assert session.state["n"] == 212


def test_failing_operation_stops_the_run(demo):
    session = DeSession.start(demo, (AgendaEntry("dec", 1.0),))
    with pytest.raises(CosimError) as info:
        run_until(session, 1.0)
    assert "'dec'" in info.value.message


def test_controller_reads_are_logged(watertank):
    session = DeSession.start(watertank.module, watertank.config.agenda)
    session.state["level"] = 3.2
    _, accesses = run_until(session, 0.1)
    assert [(a.name, a.kind, a.value) for a in accesses] == [("level", "read", 3.2), ("valve", "write", 1)]
    assert session.state["valve"] == 1


# continuous side


@pytest.mark.parametrize("valve, level", [(0, 2.55), (1, 2.45)])
def test_plant_step(watertank, valve, level):
    after = plant_step(watertank.plant, {"level": 2.5}, {"valve": valve}, 0.1)
    assert after == {"level": pytest.approx(level)}


def test_plant_step_uses_the_old_state(watertank):
    state = {"level": 2.5}
    plant_step(watertank.plant, state, {"valve": 0}, 0.1)
    assert state == {"level": 2.5}


# master


def test_zero_end_time(watertank):
    timeline = cosimulate(watertank.module, replace(watertank.config, end_time=0.0))
    assert len(timeline) == 1
    assert timeline[0].plant == {"level": 2.5}
    assert timeline[0].events == ()


@pytest.mark.parametrize(
    "changes",
    [
        {"sync_step": 0.0},
        {"end_time": 0.25},
        {"end_time": -1.0},
    ],
)
def test_config_errors(watertank, changes):
    with pytest.raises(CosimError):
        cosimulate(watertank.module, replace(watertank.config, **changes))


def test_plant_step_larger_than_sync_step(watertank):
    config = replace(watertank.config, plant=replace(watertank.plant, h=0.5))
    with pytest.raises(CosimError):
        cosimulate(watertank.module, config)


@pytest.mark.parametrize("epsilon", [0.0, -1e-9, float("nan")])
def test_nonpositive_epsilon(watertank, epsilon):
    with pytest.raises(ConfigError):
        DeSession.start(watertank.module, watertank.config.agenda, epsilon)
    with pytest.raises(ConfigError):
        cosimulate(watertank.module, watertank.config, epsilon=epsilon)


def test_nonpositive_period(watertank):
    with pytest.raises(CosimError):
        cosimulate(watertank.module, with_agenda(watertank, ("ctrl", 0.0)))


def assert_matches_reference(timeline, reference):
    assert len(timeline) == len(reference)
    for row, (time, level, valve) in zip(timeline, reference):
        assert row.time == pytest.approx(time)
        assert row.plant["level"] == pytest.approx(level, abs=1e-9)
        assert row.shared["valve"] == valve


def test_lockstep_with_the_monolithic_loop(watertank):
    timeline = cosimulate(watertank.module, watertank.config)
    assert len(timeline) == 201
    assert_matches_reference(timeline, monolithic_watertank(200))


def test_slower_controller(watertank):
    config = with_agenda(watertank, ("ctrl", 0.2))
    timeline = cosimulate(watertank.module, config)
    assert_matches_reference(timeline, monolithic_watertank(200, period=0.2))
    assert sum(len(row.events) for row in timeline) == 100


def test_plant_substeps(watertank):
    config = replace(watertank.config, plant=replace(watertank.plant, h=0.05))
    timeline = cosimulate(watertank.module, config)
    assert_matches_reference(timeline, monolithic_watertank(200, h=0.05))


def test_level_stays_near_the_band(watertank):
    timeline = cosimulate(watertank.module, watertank.config)
    levels = [row.plant["level"] for row in timeline]
    assert min(levels) >= 1.95 - 1e-9
    assert max(levels) <= 3.05 + 1e-9
    assert {row.shared["valve"] for row in timeline} == {0, 1}


def test_access_log(watertank):
    session = DeSession.start(watertank.module, watertank.config.agenda)
    cosimulate(watertank.module, watertank.config, session)
    log = session.access_log
    assert len(log) == 400
    assert sum(1 for a in log if a.kind == "read") == 200
    assert all(a.name == "level" for a in log if a.kind == "read")
    assert all(a.name == "valve" for a in log if a.kind == "write")
    times = [a.time for a in log]
    assert times == sorted(times)
    assert export_access_log(session).startswith("0.1\tlevel\tread\t2.5\n0.1\tvalve\twrite\t0\n")


def test_shared_values_are_frozen_between_sync_points(watertank):
    session = DeSession.start(watertank.module, (AgendaEntry("ctrl", 0.05),))
    cosimulate(watertank.module, with_agenda(watertank, ("ctrl", 0.05)), session)
    reads = [a for a in session.access_log if a.kind == "read"]
    assert len(reads) == 400
    for first, second in zip(reads[::2], reads[1::2]):
        assert first.value == second.value


def test_render_timeline(watertank):
    timeline = cosimulate(watertank.module, replace(watertank.config, end_time=0.2))
    lines = render_timeline(timeline).splitlines()
    assert lines[0] == "t\tlevel\tshared:level\tshared:valve\tevents"
    assert lines[1] == "0.0\t2.5\t2.5\t0\t-"
    cells = lines[2].split("\t")
    assert cells[0] == "0.1"
    assert float(cells[1]) == pytest.approx(2.55)
    assert cells[3:] == ["0", "ctrl@0.1"]
    assert len(lines) == 4
    assert render_timeline([]) == ""


def test_cosimulation_is_deterministic(watertank):
    first = render_timeline(cosimulate(watertank.module, watertank.config))
    second = render_timeline(cosimulate(watertank.module, watertank.config))
    assert first == second
