"""``navstack`` command line: pipeline stages on files, scenario runs and SVG plots.

Exit codes: 0 success, 1 domain failure (no path, collision, timeout),
2 bad input. ``-`` means stdin/stdout so stages can be piped::

    navstack sweep --scenario builtin:gates | navstack map --z-limit 1.2m | \
        navstack plan --goal 0,7.6 --bounds=-5,-1,5,9
"""

from __future__ import annotations

import argparse
import math
import os
import re
import sys
from concurrent.futures import ProcessPoolExecutor
from contextlib import contextmanager
from dataclasses import replace
from pathlib import Path

import numpy as np
import yaml

from navstack.geometry import Pose
from navstack.gridmap import build_grid
from navstack.ipabd import SegmentMap2D, ipabd
from navstack.planner import GridPath, PlanningError, ReferenceTrajectory, astar, path_to_trajectory
from navstack.scan_geometry import Cloud3D
from navstack.scenario import BUILTIN, Scenario, builtin
from navstack import svg
from navstack.simulate import RunLog, assert_region_traversal, capture, run_scenario

OUT_ENV = "NAVSTACK_OUT"

EXIT_OK = 0
EXIT_DOMAIN = 1
EXIT_INPUT = 2


class InputError(Exception):
    pass


_UNITS = {
    "m": 1.0, "cm": 0.01, "mm": 0.001,
    "rad": 1.0, "deg": math.pi / 180.0,
    "s": 1.0, "ms": 0.001,
}
_NUM = re.compile(r"^\s*([-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?)\s*([a-z]*)\s*$")


def parse_quantity(text: str, allowed=("m", "cm", "mm")) -> float:
    """SI value of ``text``; bare numbers are already SI, suffixes from ``allowed`` are converted."""
    m = _NUM.match(str(text))
    if not m:
        raise InputError(f"cannot parse number {text!r}")
    value, unit = float(m.group(1)), m.group(2)
    if unit and unit not in allowed:
        raise InputError(f"unit {unit!r} not allowed here (use {', '.join(allowed)})")
    return value * _UNITS.get(unit, 1.0)


def parse_length(text: str) -> float:
    return parse_quantity(text, ("m", "cm", "mm"))


def parse_angle(text: str) -> float:
    """Radians; ``25deg`` and ``0.4rad`` both accepted."""
    return parse_quantity(text, ("rad", "deg"))


def parse_point(text: str) -> tuple[float, float]:
    parts = [p for p in re.split(r"[,\s]+", text.strip()) if p]
    if len(parts) != 2:
        raise InputError(f"expected x,y but got {text!r}")
    return parse_length(parts[0]), parse_length(parts[1])


def parse_pose(text: str) -> Pose:
    parts = [p for p in re.split(r"[,\s]+", text.strip()) if p]
    if len(parts) not in (2, 3):
        raise InputError(f"expected x,y[,theta] but got {text!r}")
    th = parse_angle(parts[2]) if len(parts) == 3 else 0.0
    return Pose(parse_length(parts[0]), parse_length(parts[1]), th)


def parse_bounds(text: str) -> tuple[float, float, float, float]:
    parts = [p for p in re.split(r"[,\s]+", text.strip()) if p]
    if len(parts) != 4:
        raise InputError(f"expected x0,y0,x1,y1 but got {text!r}")
    x0, y0, x1, y1 = map(parse_length, parts)
    if not (x1 > x0 and y1 > y0):
        raise InputError("bounds must satisfy x0 < x1 and y0 < y1")
    return x0, y0, x1, y1


@contextmanager
def _open_in(path: str):
    if path == "-":
        yield sys.stdin
    else:
        try:
            fh = open(path, encoding="utf-8")
        except OSError as exc:
            raise InputError(f"cannot read {path}: {exc.strerror}") from None
        with fh:
            yield fh


def _write_out(path: str, text: str) -> None:
    if path == "-":
        sys.stdout.write(text)
        sys.stdout.flush()
        return
    p = Path(path)
    if p.parent and not p.parent.exists():
        p.parent.mkdir(parents=True, exist_ok=True)
    p.write_text(text, encoding="utf-8")


def load_scenario(ref: str) -> Scenario:
    """``builtin:<name>``, a scenario file path, or ``-`` for stdin."""
    if ref.startswith("builtin:"):
        name = ref.split(":", 1)[1]
        if name not in BUILTIN:
            raise InputError(f"unknown built-in scenario {name!r}; choose from {', '.join(sorted(BUILTIN))}")
        return builtin(name)
    with _open_in(ref) as fh:
        try:
            return Scenario.load(fh)
        except (ValueError, KeyError, TypeError, yaml.YAMLError) as exc:
            raise InputError(f"bad scenario {ref}: {exc}") from None


def _apply_overrides(sc: Scenario, args) -> Scenario:
    kw = {}
    if getattr(args, "z_limit", None) is not None:
        kw["z_limit"] = parse_length(args.z_limit)
    if getattr(args, "cellsize", None) is not None:
        kw["cellsize"] = parse_length(args.cellsize)
    if getattr(args, "seed", None) is not None:
        kw["seed"] = args.seed
    return replace(sc, **kw) if kw else sc


def _read(kind, path: str, reader: str = "read"):
    with _open_in(path) as fh:
        try:
            return getattr(kind, reader)(fh)
        except (ValueError, KeyError, IndexError, TypeError) as exc:
            raise InputError(f"cannot parse {path}: {exc}") from None


# commands


def cmd_sweep(args) -> int:
    sc = _apply_overrides(load_scenario(args.scenario), args)
    pose = parse_pose(args.pose) if args.pose else sc.start
    cloud = capture(sc, pose, np.random.default_rng(sc.seed))
    _write_out(args.out, cloud.dumps())
    return EXIT_OK


def cmd_map(args) -> int:
    cloud = _read(Cloud3D, args.cloud)
    if args.z_limit is not None:
        z = parse_length(args.z_limit)
    elif args.scenario:
        z = load_scenario(args.scenario).effective_z_limit
    else:
        raise InputError("map needs --z-limit (or --scenario to take the robot height)")
    _write_out(args.out, ipabd(cloud, z).dumps())
    return EXIT_OK


def _plan_bounds(segmap: SegmentMap2D, start, goal, margin=1.0):
    xs = [start[0], goal[0]] + [v for s in segmap.segments for v in (s.x1, s.x2)]
    ys = [start[1], goal[1]] + [v for s in segmap.segments for v in (s.y1, s.y2)]
    return (min(xs) - margin, min(ys) - margin, max(xs) + margin, max(ys) + margin)


def cmd_plan(args) -> int:
    segmap = _read(SegmentMap2D, args.map)
    start = parse_point(args.start) if args.start else segmap.source_pose.xy()
    goal = parse_point(args.goal)
    cellsize = parse_length(args.cellsize)
    if not cellsize > 0:
        raise InputError("cellsize must be > 0")
    bounds = parse_bounds(args.bounds) if args.bounds else _plan_bounds(segmap, start, goal)
    grid = build_grid(segmap, cellsize, bounds, args.dilation)
    if args.grid_out:
        _write_out(args.grid_out, grid.dumps())
    try:
        path = astar(grid, grid.world_to_cell(*start), grid.world_to_cell(*goal))
    except PlanningError as exc:
        print(f"navstack plan: {exc}", file=sys.stderr)
        return EXIT_DOMAIN
    _write_out(args.out, path.dumps())
    if args.trajectory_out:
        try:
            traj = path_to_trajectory(path, grid=grid)
        except PlanningError as exc:
            print(f"navstack plan: {exc}", file=sys.stderr)
            return EXIT_DOMAIN
        _write_out(args.trajectory_out, traj.dumps())
    return EXIT_OK


def _run_one(sc: Scenario, out_dir: str | None, verify: bool) -> tuple[str, str, bool, list[str]]:
    log = run_scenario(sc)
    notes = []
    ok = log.ok
    if verify:
        source = "run" if log.rows else "plan"
        for region, exp in sc.expectations.items():
            passed = assert_region_traversal(log, region, exp, source)
            notes.append(f"region {region} {exp}: {'pass' if passed else 'FAIL'}")
            ok = ok and passed
    if out_dir:
        d = Path(out_dir) / sc.name
        d.mkdir(parents=True, exist_ok=True)
        (d / "run.csv").write_text(log.dumps(), encoding="utf-8")
        if log.cloud is not None:
            (d / "cloud.txt").write_text(log.cloud.dumps(), encoding="utf-8")
        if log.segmap is not None:
            (d / "map.txt").write_text(log.segmap.dumps(), encoding="utf-8")
        if log.grid is not None:
            (d / "grid.txt").write_text(log.grid.dumps(), encoding="utf-8")
        if log.path is not None:
            (d / "path.csv").write_text(log.path.dumps(), encoding="utf-8")
        if log.trajectory is not None:
            (d / "trajectory.csv").write_text(log.trajectory.dumps(), encoding="utf-8")
        if log.vfh_lines:
            (d / "vfh.jsonl").write_text("\n".join(log.vfh_lines) + "\n", encoding="utf-8")
    line = f"{sc.name}: {log.verdict}"
    if log.reason:
        line += f" ({log.reason})"
    if math.isfinite(log.completion_time):
        line += f" t={log.completion_time:.2f}s"
    if math.isfinite(log.path_cost):
        line += f" cost={log.path_cost:.3f}m"
    return sc.name, line, ok, notes


def cmd_run(args) -> int:
    scenarios = [_apply_overrides(load_scenario(ref), args) for ref in args.scenario]
    names = [s.name for s in scenarios]
    if len(set(names)) != len(names):
        raise InputError("scenario names must be unique within one run")
    out_dir = args.out or os.environ.get(OUT_ENV)
    jobs = max(1, min(args.jobs or len(scenarios), len(scenarios)))
    if jobs == 1:
        results = [_run_one(sc, out_dir, args.verify) for sc in scenarios]
    else:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            futs = [pool.submit(_run_one, sc, out_dir, args.verify) for sc in scenarios]
            results = [f.result() for f in futs]
    all_ok = True
    for _, line, ok, notes in results:
        print(line)
        for n in notes:
            print("  " + n)
        all_ok = all_ok and ok
    return EXIT_OK if all_ok else EXIT_DOMAIN


def cmd_plot(args) -> int:
    inputs = {k: v for k, v in (("map", args.map), ("cloud", args.cloud), ("grid", args.grid),
                                ("path", args.path), ("trajectory", args.trajectory), ("run", args.run))
              if v}
    try:
        spec = svg.PlotSpec(args.kind, inputs, args.out, args.width)
    except (ValueError, FileNotFoundError) as exc:
        raise InputError(str(exc)) from None

    def need(*names):
        missing = [n for n in names if n not in inputs]
        if missing:
            raise InputError(f"plot {spec.kind} needs --{' --'.join(missing)}")

    from navstack.gridmap import OccupancyGrid

    segmap = _read(SegmentMap2D, inputs["map"]) if "map" in inputs else None
    if spec.kind == "map2d":
        need("map")
        cloud = _read(Cloud3D, inputs["cloud"]) if "cloud" in inputs else None
        text = svg.render_map2d(segmap, cloud, spec.width)
    elif spec.kind in ("grid", "path"):
        need("grid", "path") if spec.kind == "path" else need("grid")
        grid = _read(OccupancyGrid, inputs["grid"])
        path = _read(GridPath, inputs["path"], "read_csv") if "path" in inputs else None
        text = svg.render_grid(grid, path, spec.width)
    elif spec.kind == "trajectory-overlay":
        need("trajectory")
        traj = _read(ReferenceTrajectory, inputs["trajectory"], "read_csv")
        xy = None
        if "run" in inputs:
            run = _read(RunLog, inputs["run"])
            xy = list(zip(run.column("x"), run.column("y")))
        text = svg.render_trajectory_overlay(traj, xy, segmap, spec.width)
    else:
        need("run")
        text = svg.render_vfh_run(_read(RunLog, inputs["run"]), segmap, spec.width)
    _write_out(spec.out, text)
    return EXIT_OK


# argument parsing


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="navstack", description="3D-mapping, planning, tracking and sonar avoidance simulator")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("sweep", help="simulate one pitching laser sweep and write the 3D cloud")
    s.add_argument("--scenario", required=True, help="scenario file, '-' or builtin:<name>")
    s.add_argument("--pose", help="sensor pose x,y[,theta] (default: scenario start)")
    s.add_argument("--seed", type=int)
    s.add_argument("--out", default="-")
    s.set_defaults(func=cmd_sweep)

    s = sub.add_parser("map", help="compress a 3D cloud into a 2D segment map")
    s.add_argument("cloud", nargs="?", default="-")
    s.add_argument("--z-limit", help="height limit, e.g. 1.2m")
    s.add_argument("--scenario", help="take the robot height from this scenario")
    s.add_argument("--out", default="-")
    s.set_defaults(func=cmd_map)

    s = sub.add_parser("plan", help="grid A* over a segment map")
    s.add_argument("map", nargs="?", default="-")
    s.add_argument("--start", help="x,y (default: the map's sensor pose)")
    s.add_argument("--goal", required=True, help="x,y")
    s.add_argument("--cellsize", default="0.4m")
    s.add_argument("--bounds", help="x0,y0,x1,y1 (default: map extent plus 1 m)")
    s.add_argument("--dilation", type=int, default=2)
    s.add_argument("--grid-out", help="also write the occupancy grid raster")
    s.add_argument("--trajectory-out", help="also write the timed reference trajectory")
    s.add_argument("--out", default="-")
    s.set_defaults(func=cmd_plan)

    s = sub.add_parser("run", help="run scenarios end to end")
    s.add_argument("--scenario", action="append", required=True,
                   help="repeatable; scenario file, '-' or builtin:<name>")
    s.add_argument("--z-limit")
    s.add_argument("--cellsize")
    s.add_argument("--seed", type=int)
    s.add_argument("--out", help=f"output directory (default: ${OUT_ENV}, else none)")
    s.add_argument("--jobs", type=int, help="parallel scenarios (default: one per scenario)")
    s.add_argument("--verify", action="store_true", help="check region expectations from the scenario")
    s.set_defaults(func=cmd_run)

    s = sub.add_parser("plot", help="render an SVG")
    s.add_argument("kind", choices=svg.PLOT_KINDS)
    s.add_argument("--map")
    s.add_argument("--cloud")
    s.add_argument("--grid")
    s.add_argument("--path")
    s.add_argument("--trajectory")
    s.add_argument("--run")
    s.add_argument("--width", type=int, default=600)
    s.add_argument("--out", default="-")
    s.set_defaults(func=cmd_plot)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INPUT if exc.code else EXIT_OK
    try:
        return args.func(args)
    except InputError as exc:
        print(f"navstack {args.command}: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except BrokenPipeError:
        return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
