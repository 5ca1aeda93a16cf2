import io
import math
import os
import subprocess
import sys

import pytest

from navstack import cli
from navstack.gridmap import OccupancyGrid
from navstack.ipabd import SegmentMap2D
from navstack.planner import GridPath, ReferenceTrajectory
from navstack.scan_geometry import Cloud3D
from navstack.scenario import doorway_scenario
from navstack.simulate import RunLog


def run(*args, stdin=None, env=None):
    return subprocess.run([sys.executable, "-m", "navstack.cli", *args], input=stdin,
                          capture_output=True, text=True, env=env)


@pytest.mark.parametrize("text,expected", [
    ("0.4", 0.4), ("40cm", 0.4), ("400mm", 0.4), ("1.2m", 1.2), ("-2e-1m", -0.2),
])
def test_parse_length(text, expected):
    assert cli.parse_length(text) == pytest.approx(expected)


def test_parse_angle():
    assert cli.parse_angle("25deg") == pytest.approx(math.radians(25))
    assert cli.parse_angle("0.5rad") == 0.5
    assert cli.parse_angle("0.5") == 0.5


@pytest.mark.parametrize("bad", ["abc", "3ft", "1.2 m m", ""])
def test_parse_length_rejects(bad):
    with pytest.raises(cli.InputError):
        cli.parse_length(bad)


def test_angle_units_not_lengths():
    with pytest.raises(cli.InputError):
        cli.parse_length("25deg")


def test_parse_points_and_bounds():
    assert cli.parse_point("1m,50cm") == (1.0, 0.5)
    p = cli.parse_pose("1,2,90deg")
    assert (p.x, p.y, p.theta) == pytest.approx((1, 2, math.pi / 2))
    with pytest.raises(cli.InputError):
        cli.parse_bounds("0,0,-1,1")
    with pytest.raises(cli.InputError):
        cli.parse_point("1")


def test_pipeline_through_pipes():
    sweep = run("sweep", "--scenario", "builtin:gates")
    assert sweep.returncode == 0
    cloud = Cloud3D.loads(sweep.stdout)
    assert len(cloud) > 0
    mp = run("map", "--z-limit", "1.2m", stdin=sweep.stdout)
    assert mp.returncode == 0
    segmap = SegmentMap2D.loads(mp.stdout)
    assert len(segmap) > 0
    plan = run("plan", "--goal", "0,7.6", "--cellsize", "40cm", stdin=mp.stdout)
    assert plan.returncode == 0, plan.stderr
    path = GridPath.read_csv(io.StringIO(plan.stdout))
    assert path.cost == pytest.approx(10.1539, abs=1e-3)


def test_stage_files(tmp_path):
    c, m, p, g, t = (str(tmp_path / n) for n in ("c.txt", "m.txt", "p.csv", "g.txt", "t.csv"))
    assert cli.main(["sweep", "--scenario", "builtin:gates_low_robot", "--out", c]) == 0
    assert cli.main(["map", c, "--scenario", "builtin:gates_low_robot", "--out", m]) == 0
    assert SegmentMap2D.loads(open(m).read()).z_limit == 0.9
    assert cli.main(["plan", m, "--goal", "0,7.6", "--out", p, "--grid-out", g, "--trajectory-out", t]) == 0
    OccupancyGrid.loads(open(g).read())
    with open(t) as fh:
        traj = ReferenceTrajectory.read_csv(fh)
    assert traj.duration > 0
    out = str(tmp_path / "p.svg")
    assert cli.main(["plot", "path", "--grid", g, "--path", p, "--out", out]) == 0
    first = open(out).read()
    assert cli.main(["plot", "path", "--grid", g, "--path", p, "--out", out]) == 0
    assert open(out).read() == first
    assert cli.main(["plot", "map2d", "--map", m, "--cloud", c, "--out", str(tmp_path / "m.svg")]) == 0
    assert cli.main(["plot", "trajectory-overlay", "--trajectory", t, "--out", str(tmp_path / "t.svg")]) == 0


def test_map_needs_a_height(tmp_path, capsys):
    c = str(tmp_path / "c.txt")
    cli.main(["sweep", "--scenario", "builtin:doorway", "--out", c])
    assert cli.main(["map", c]) == 2
    assert "--z-limit" in capsys.readouterr().err


def test_empty_cloud_gives_empty_map(tmp_path):
    from navstack.geometry import Pose
    from navstack.scan_geometry import SweepConfig
    c = tmp_path / "c.txt"
    c.write_text(Cloud3D.empty(SweepConfig(), Pose(0, 0, 0)).dumps())
    out = tmp_path / "m.txt"
    assert cli.main(["map", str(c), "--z-limit", "1.2", "--out", str(out)]) == 0
    assert len(SegmentMap2D.loads(out.read_text())) == 0


def test_run_writes_artifacts_and_verifies(tmp_path, capsys):
    code = cli.main(["run", "--scenario", "builtin:doorway", "--scenario", "builtin:gates",
                     "--verify", "--out", str(tmp_path)])
    out = capsys.readouterr().out
    assert code == 0, out
    assert "doorway: goal_reached" in out and "region B visited: pass" in out
    for name in ("run.csv", "cloud.txt", "map.txt", "grid.txt", "path.csv", "trajectory.csv"):
        assert (tmp_path / "gates" / name).is_file()
    assert (tmp_path / "doorway" / "vfh.jsonl").is_file()
    log = RunLog.read(open(tmp_path / "doorway" / "run.csv"))
    assert log.verdict == "goal_reached"
    svg_out = tmp_path / "run.svg"
    assert cli.main(["plot", "vfh-run", "--run", str(tmp_path / "doorway" / "run.csv"), "--out", str(svg_out)]) == 0
    assert svg_out.read_text().startswith("<svg")


def test_run_uses_env_dir(tmp_path):
    env = {**os.environ, cli.OUT_ENV: str(tmp_path)}
    r = run("run", "--scenario", "builtin:doorway", env=env)
    assert r.returncode == 0
    assert (tmp_path / "doorway" / "run.csv").is_file()


def test_run_scenario_from_stdin(tmp_path):
    text = doorway_scenario().dumps()
    r = run("run", "--scenario", "-", "--cellsize", "20cm", stdin=text)
    assert r.returncode == 0
    assert "doorway: goal_reached" in r.stdout


def test_verify_failure_is_domain_error(tmp_path, capsys):
    from navstack.scenario import with_overrides
    sc = with_overrides(doorway_scenario(), expectations={"door": "avoided"})
    f = tmp_path / "s.yaml"
    f.write_text(sc.dumps())
    assert cli.main(["run", "--scenario", str(f), "--verify"]) == 1
    assert "FAIL" in capsys.readouterr().out


def test_exit_codes(tmp_path):
    assert cli.main(["run", "--scenario", "builtin:nope"]) == 2
    assert cli.main(["run", "--scenario", str(tmp_path / "missing.yaml")]) == 2
    bad = tmp_path / "bad.yaml"
    bad.write_text("# navstack-scenario v1\nversion: 9\n")
    assert cli.main(["run", "--scenario", str(bad)]) == 2
    assert cli.main(["frobnicate"]) == 2
    assert cli.main(["plot", "grid", "--out", str(tmp_path / "x.svg")]) == 2
    # timeout is a domain failure
    short = tmp_path / "short.yaml"
    from navstack.scenario import with_overrides
    short.write_text(with_overrides(doorway_scenario(), duration=1.0).dumps())
    assert cli.main(["run", "--scenario", str(short)]) == 1


def test_plan_without_path_is_domain_error(tmp_path):
    m = tmp_path / "m.txt"
    m.write_text("# segmap v1\n-5 2 5 2\n")
    assert cli.main(["plan", str(m), "--start", "0,0", "--goal", "0,4", "--bounds=-1.6,-1,1.6,6",
                     "--out", str(tmp_path / "p.csv")]) == 1
    assert cli.main(["plan", str(m), "--start", "0,0", "--goal", "0,4", "--cellsize", "0",
                     "--out", str(tmp_path / "p.csv")]) == 2
