import io
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from shapely.geometry import LineString, Point, box

from navstack.geometry import Pose
from navstack.scenario import (
    BUILTIN,
    Scenario,
    builtin,
    doorway_scenario,
    gate_scenario,
    sudden_obstacle_scenario,
    with_overrides,
)
from navstack.simulate import (
    COLLISION,
    GOAL_REACHED,
    PLAN_FAILED,
    RUN_COLUMNS,
    TIMEOUT,
    RunLog,
    assert_region_traversal,
    disk_visits,
    run_scenario,
)
from navstack.world import Region, WallFace, WorldModel


@pytest.fixture(scope="module")
def gates_log():
    return run_scenario(gate_scenario())


def test_gates_run_reaches_goal_through_b(gates_log):
    assert gates_log.verdict == GOAL_REACHED
    assert gates_log.min_clearance > 0
    assert assert_region_traversal(gates_log, "B", "visited")
    assert assert_region_traversal(gates_log, "A", "avoided")
    assert assert_region_traversal(gates_log, "B", "visited", source="plan")


def test_runlog_round_trip(gates_log):
    text = gates_log.dumps()
    back = RunLog.read(io.StringIO(text))
    assert back.dumps() == text
    assert back.verdict == GOAL_REACHED
    assert back.path_cost == pytest.approx(gates_log.path_cost)
    assert list(back.column("mode")) == list(gates_log.column("mode"))


def test_runlog_reader_rejects_other_files():
    with pytest.raises(ValueError):
        RunLog.read(io.StringIO("t,x\n"))


def test_runlog_columns(gates_log):
    assert text_header(gates_log) == ",".join(RUN_COLUMNS)
    t = gates_log.column("t")
    assert np.all(np.diff(t) > 0)


def text_header(log):
    return log.dumps().splitlines()[2]


def test_plan_failure_is_reported():
    # a wall across the whole mapped area
    world = WorldModel([WallFace((-5, 2), (5, 2), 0.0, 2.5)])
    sc = Scenario("blocked", world, Pose.deg(0, 0, 90), (0.0, 4.0), (-1.6, -1.2, 1.6, 6.0))
    log = run_scenario(sc)
    assert log.verdict == PLAN_FAILED
    assert log.rows == []
    assert log.reason


def test_collision_is_reported():
    # avoid-only mode, start already touching a wall
    world = WorldModel([WallFace((-2, 0.3), (2, 0.3))])
    sc = Scenario("touch", world, Pose.deg(0, 0, 90), (0.0, 3.0), (-3.0, -3.0, 3.0, 3.0), mode="avoid")
    log = run_scenario(sc)
    assert log.verdict == COLLISION
    assert log.column("mode")[-1] == "collision"


def test_timeout_is_reported():
    log = run_scenario(with_overrides(doorway_scenario(), duration=1.0))
    assert log.verdict == TIMEOUT
    assert log.rows[-1][0] == pytest.approx(0.95)


def test_doorway_passes(tmp_path):
    log = run_scenario(doorway_scenario())
    assert log.verdict == GOAL_REACHED
    assert assert_region_traversal(log, "door", "visited")
    assert log.vfh_lines


def test_deterministic_runs():
    a = run_scenario(doorway_scenario())
    b = run_scenario(doorway_scenario())
    assert a.dumps() == b.dumps()
    assert a.vfh_lines == b.vfh_lines


def test_noise_is_seeded():
    sc = with_overrides(doorway_scenario(), noise_sigma=0.01, seed=3)
    a, b = run_scenario(sc), run_scenario(sc)
    assert a.dumps() == b.dumps()
    c = run_scenario(with_overrides(sc, seed=4))
    assert c.dumps() != a.dumps()


def test_region_traversal_checks():
    log = RunLog("x", 0, body_radius=0.4, regions={"r": Region("r", 1, 1, 2, 2)})
    with pytest.raises(KeyError):
        assert_region_traversal(log, "nope", "visited")
    with pytest.raises(ValueError):
        assert_region_traversal(log, "r", "sometimes")
    assert assert_region_traversal(log, "r", "avoided")


def test_disk_visits_uses_radius():
    r = Region("r", 0, 0, 1, 1)
    assert disk_visits(np.array([[-0.3, -5], [-0.3, 5]]), r, 0.4)
    assert not disk_visits(np.array([[-0.5, -5], [-0.5, 5]]), r, 0.4)
    assert disk_visits(np.array([[1.2, 0.5]]), r, 0.4)


# scenario files


@pytest.mark.parametrize("name", sorted(BUILTIN))
def test_scenario_text_round_trip(name):
    sc = builtin(name)
    text = sc.dumps()
    back = Scenario.loads(text)
    assert back.dumps() == text
    assert back == sc or back.to_dict() == sc.to_dict()


def test_scenario_validation():
    text = gate_scenario().dumps()
    with pytest.raises(ValueError):
        Scenario.loads(text.replace("# navstack-scenario", "# something-else", 1))
    with pytest.raises(ValueError):
        Scenario.loads(text.replace("mode: full", "mode: teleport"))
    with pytest.raises(ValueError):
        Scenario.loads(text.replace("goal: [0.0, 7.6]", "goal: [0.0, 70.0]"))
    with pytest.raises(ValueError):
        builtin("nope")


def test_scenario_rejects_unknown_keys():
    d = gate_scenario().to_dict()
    d["vfh"]["turbo"] = True
    with pytest.raises(ValueError, match="turbo"):
        Scenario.from_dict(d)


def test_effective_z_limit():
    assert gate_scenario().effective_z_limit == 1.2
    assert gate_scenario(robot_height=0.9).effective_z_limit == 0.9
    assert with_overrides(gate_scenario(), z_limit=2.0).effective_z_limit == 2.0


def test_sudden_obstacle_has_one_event():
    sc = sudden_obstacle_scenario()
    assert len(sc.events) == 1
    assert all(f.name.startswith("O.") for f in sc.events[0].faces)


@given(st.lists(st.tuples(st.floats(-4, 4), st.floats(-4, 4)), min_size=2, max_size=6), st.floats(0.05, 1.0))
def test_disk_visits_matches_shapely(pts, radius):
    region = Region("r", -0.5, -0.3, 0.7, 0.4)
    line = LineString(pts) if len(set(pts)) > 1 else Point(pts[0])
    d = line.distance(box(region.x0, region.y0, region.x1, region.y1))
    if abs(d - radius) < 1e-9:
        return
    assert disk_visits(np.array(pts), region, radius) == (d <= radius)
