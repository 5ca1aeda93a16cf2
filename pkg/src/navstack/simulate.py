"""Closed-loop scenario engine: map once, plan, then track with sonar override."""

from __future__ import annotations

import io
import math
from dataclasses import dataclass, field
from typing import TextIO

import numpy as np

from navstack.geometry import Pose, wrap_angle
from navstack.gridmap import OccupancyGrid, build_grid
from navstack.ipabd import SegmentMap2D, ipabd
from navstack.planner import GridPath, PlanningError, ReferenceTrajectory, astar, path_to_trajectory
from navstack.scan_geometry import Cloud3D, sweep
from navstack.scenario import Scenario
from navstack.tracking import control, lyapunov, saturate, tracking_error, unicycle_step
from navstack.vfh import ImprovedVFH, front_distance
from navstack.world import Region, SonarReading

RUNLOG_HEADER = "# navstack-runlog v1"
RUN_COLUMNS = ("t", "x", "y", "theta", "x_r", "y_r", "theta_r", "e1", "e2", "e3",
               "v", "omega", "V_p", "mode", "clearance", "d30", "sonar_min")

GOAL_REACHED = "goal_reached"
PLAN_FAILED = "plan_failed"
COLLISION = "collision"
TIMEOUT = "timeout"


@dataclass
class RunLog:
    scenario: str
    seed: int
    rows: list[tuple] = field(default_factory=list)
    verdict: str = ""
    reason: str = ""
    path_cost: float = math.nan
    min_clearance: float = math.inf
    completion_time: float = math.nan
    body_radius: float = 0.4
    regions: dict[str, Region] = field(default_factory=dict)
    event_times: list[float] = field(default_factory=list)
    cloud: Cloud3D | None = None
    segmap: SegmentMap2D | None = None
    grid: OccupancyGrid | None = None
    path: GridPath | None = None
    trajectory: ReferenceTrajectory | None = None
    vfh_lines: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return self.verdict == GOAL_REACHED

    def column(self, name: str) -> np.ndarray:
        i = RUN_COLUMNS.index(name)
        if name == "mode":
            return np.array([r[i] for r in self.rows])
        return np.array([r[i] for r in self.rows], dtype=float)

    def summary(self) -> dict:
        return {
            "verdict": self.verdict,
            "reason": self.reason,
            "path_cost": self.path_cost,
            "min_clearance": self.min_clearance,
            "completion_time": self.completion_time,
        }

    def write(self, fh: TextIO) -> None:
        fh.write(RUNLOG_HEADER + "\n")
        fh.write(f"# scenario={self.scenario} seed={self.seed}\n")
        fh.write(",".join(RUN_COLUMNS) + "\n")
        for r in self.rows:
            fh.write(",".join(v if isinstance(v, str) else f"{v:.9g}" for v in r) + "\n")
        for k, v in self.summary().items():
            fh.write(f"# summary {k}={v if isinstance(v, str) else format(v, '.9g')}\n")

    def dumps(self) -> str:
        buf = io.StringIO()
        self.write(buf)
        return buf.getvalue()

    @classmethod
    def read(cls, fh: TextIO) -> "RunLog":
        if fh.readline().rstrip("\n") != RUNLOG_HEADER:
            raise ValueError("not a navstack run log")
        meta = dict(t.split("=", 1) for t in fh.readline()[1:].split())
        log = cls(meta["scenario"], int(meta["seed"]))
        head = fh.readline().rstrip("\n").split(",")
        if tuple(head) != RUN_COLUMNS:
            raise ValueError("unexpected run log columns")
        mi = RUN_COLUMNS.index("mode")
        for line in fh:
            line = line.rstrip("\n")
            if line.startswith("# summary "):
                k, v = line[len("# summary "):].split("=", 1)
                setattr(log, k, v if k in ("verdict", "reason") else float(v))
            elif line and not line.startswith("#"):
                vals = line.split(",")
                log.rows.append(tuple(v if i == mi else float(v) for i, v in enumerate(vals)))
        return log


def disk_visits(xy: np.ndarray, region: Region, radius: float) -> bool:
    """True when a disk swept along the polyline ``xy`` touches ``region``."""
    if len(xy) == 1:
        return region.distance_to_segment(tuple(xy[0]), tuple(xy[0])) <= radius
    # cheap reject per step on its bounding box, then exact capsule tests
    a, b = xy[:-1], xy[1:]
    lo = np.minimum(a, b) - radius
    hi = np.maximum(a, b) + radius
    near = (hi[:, 0] >= region.x0) & (lo[:, 0] <= region.x1) & (hi[:, 1] >= region.y0) & (lo[:, 1] <= region.y1)
    for i in np.nonzero(near)[0]:
        if region.distance_to_segment(tuple(xy[i]), tuple(xy[i + 1])) <= radius:
            return True
    return False


def assert_region_traversal(log: RunLog, region_name: str, expectation: str, source: str = "run") -> bool:
    """Check the robot's swept disk against a named region.

    ``source`` selects the executed run (``"run"``) or the planned reference (``"plan"``).
    """
    if region_name not in log.regions:
        raise KeyError(f"unknown region {region_name!r}")
    if expectation not in ("visited", "avoided"):
        raise ValueError("expectation must be 'visited' or 'avoided'")
    if source == "plan":
        if log.trajectory is None:
            return False
        xy = np.column_stack([log.trajectory.x, log.trajectory.y])
    else:
        if not log.rows:
            return expectation == "avoided"
        xy = np.column_stack([log.column("x"), log.column("y")])
    visited = disk_visits(xy, log.regions[region_name], log.body_radius)
    return visited if expectation == "visited" else not visited


def _noisy(readings: list[SonarReading], sigma: float, rng, ring) -> list[SonarReading]:
    out = []
    for r in readings:
        if r.status == "miss":
            out.append(r)
            continue
        d = r.range_m + rng.normal(0.0, sigma)
        status = "ok" if ring.min_range <= d <= ring.max_range else ("too_close" if d < ring.min_range else "miss")
        out.append(SonarReading(r.bearing_deg, d if status != "miss" else math.inf, status))
    return out


class _PathIndex:
    """Nearest-sample queries along the reference polyline."""

    def __init__(self, traj: ReferenceTrajectory):
        self.xy = np.column_stack([traj.x, traj.y])
        self.s = traj.arc_length()
        self.t = traj.t

    def nearest(self, p, s_lo: float = -math.inf, s_hi: float = math.inf):
        m = (self.s >= s_lo) & (self.s <= s_hi)
        idx = np.nonzero(m)[0]
        if len(idx) == 0:
            return -1, math.inf
        d = np.hypot(self.xy[idx, 0] - p[0], self.xy[idx, 1] - p[1])
        j = int(np.argmin(d))
        return int(idx[j]), float(d[j])

    def index_at(self, s: float) -> int:
        return min(int(np.searchsorted(self.s, s)), len(self.s) - 1)


def capture(sc: Scenario, pose: Pose, rng) -> Cloud3D:
    """One laser sweep of the initial world, with the scenario's range noise applied."""
    cloud = sweep(sc.world_at(0.0), pose, sc.sweep)
    if sc.noise_sigma > 0 and len(cloud):
        noisy = np.maximum(cloud.rng + rng.normal(0.0, sc.noise_sigma, len(cloud)), 1e-6)
        noisy = np.minimum(noisy, sc.sweep.max_range)
        cloud = Cloud3D(cloud.cfg, cloud.pose, cloud.j, cloud.k, cloud.alpha, cloud.beta, noisy)
    return cloud


def plan_scenario(sc: Scenario, rng=None) -> RunLog:
    """Mapping and planning stages only: sweep, IPaBD, grid, A*, reference trajectory.

    The returned log has no rows; its verdict is ``plan_failed`` or empty.
    """
    rng = np.random.default_rng(sc.seed) if rng is None else rng
    log = RunLog(sc.name, sc.seed, body_radius=sc.robot.body_radius, regions=dict(sc.world.regions),
                 event_times=sorted(e.t for e in sc.events))
    if sc.mode != "full":
        return log
    log.cloud = capture(sc, sc.start, rng)
    log.segmap = ipabd(log.cloud, sc.effective_z_limit)
    log.grid = build_grid(log.segmap, sc.cellsize, sc.map_bounds, sc.dilation)
    try:
        start = log.grid.world_to_cell(*sc.start.xy())
        goal = log.grid.world_to_cell(*sc.goal)
        log.path = astar(log.grid, start, goal)
        log.trajectory = path_to_trajectory(log.path, sc.v_cruise, grid=log.grid)
    except PlanningError as exc:
        log.verdict, log.reason = PLAN_FAILED, str(exc)
        return log
    log.path_cost = log.path.cost
    return log


def run_scenario(sc: Scenario) -> RunLog:
    """Execute a scenario end to end; the result is fully determined by the scenario and seed."""
    rng = np.random.default_rng(sc.seed)
    log = plan_scenario(sc, rng)
    if log.verdict == PLAN_FAILED:
        return log
    _closed_loop(sc, log, log.trajectory, rng)
    return log


def _closed_loop(sc: Scenario, log: RunLog, traj: ReferenceTrajectory | None, rng) -> None:
    dt = sc.control_dt
    ring = sc.sonar
    arb = sc.arbitration
    radius = sc.robot.body_radius
    height = sc.robot.body_height
    avoider = ImprovedVFH(sc.vfh)
    pose = sc.start
    mode = "avoid" if traj is None else "track"
    pidx = _PathIndex(traj) if traj is not None else None
    tau = 0.0
    s_prog = 0.0
    s_block = 0.0
    target_s = 0.0
    t_end = traj.t[-1] if traj is not None else 0.0
    n_steps = int(round(sc.duration / dt))
    for i in range(n_steps + 1):
        t = i * dt
        world = sc.world_at(t)
        readings = world.sonar_scan(pose, ring)
        if sc.noise_sigma > 0:
            readings = _noisy(readings, sc.noise_sigma, rng, ring)
        valid = [(r.bearing_deg, r.range_m) for r in readings if r.valid]
        returns = [(r.bearing_deg, r.range_m) for r in readings if r.status != "miss"]
        d30 = front_distance(returns, sc.vfh)
        sonar_min = min((r for _, r in returns), default=math.inf)

        if math.hypot(pose.x - sc.goal[0], pose.y - sc.goal[1]) <= sc.goal_tolerance:
            log.verdict = GOAL_REACHED
            log.completion_time = t
            _record(log, t, pose, None, 0.0, 0.0, "goal",
                    world.clearance(pose.xy(), radius, height), d30, sonar_min)
            return
        if i == n_steps:
            break

        if pidx is not None:
            j, _ = pidx.nearest(pose.xy(), s_prog - 0.5, s_prog + arb.lookahead)
            if j >= 0:
                s_prog = max(s_prog, float(pidx.s[j]))

        if mode == "track":
            hit_s = _intrusion(pose, valid, pidx, s_prog, ring, arb)
            if hit_s is not None:
                mode = "avoid"
                s_block = hit_s
                target_s = min(float(pidx.s[-1]), s_block + arb.target_ahead)
                avoider.reset()
        elif pidx is not None:
            j, d = pidx.nearest(pose.xy(), s_block + arb.release_margin, s_block + arb.lookahead + 2.0)
            if j >= 0 and d <= arb.release_distance and d30 > arb.release_d30:
                mode = "track"
                tau = float(pidx.t[j])
                s_prog = max(s_prog, float(pidx.s[j]))

        if mode == "track":
            ref = traj.at(tau) if tau <= t_end else (traj.x[-1], traj.y[-1], traj.theta[-1], 0.0, 0.0)
            e = tracking_error(Pose(ref[0], ref[1], ref[2]), pose)
            v, w = control(e, ref[3], ref[4], sc.gains)
            v, w = saturate(v, w, sc.vfh.v_max, math.radians(sc.vfh.omega_max))
            tau += dt
        else:
            if pidx is not None:
                k = pidx.index_at(target_s)
                target = tuple(pidx.xy[k])
                if math.hypot(pose.x - target[0], pose.y - target[1]) < 0.5 and target_s < pidx.s[-1]:
                    target_s = min(float(pidx.s[-1]), target_s + 1.0)
                    target = tuple(pidx.xy[pidx.index_at(target_s)])
                ref = traj.at(tau)
            else:
                target = sc.goal
                ref = None
            v, w_deg = avoider.step(valid, pose, target, t)
            w = math.radians(w_deg)
            if avoider.records:
                log.vfh_lines.append(avoider.records[-1].to_json())
                avoider.records.clear()

        _record(log, t, pose, ref, v, w, mode, world.clearance(pose.xy(), radius, height), d30, sonar_min)
        nxt = unicycle_step(pose, v, w, dt)
        swept = world.swept_clearance(pose.xy(), nxt.xy(), radius, height)
        log.min_clearance = min(log.min_clearance, swept)
        pose = nxt
        if swept < 0:
            log.verdict = COLLISION
            log.reason = f"robot disk hit a wall at t={t + dt:.2f}"
            _record(log, t + dt, pose, None, 0.0, 0.0, "collision",
                    world.clearance(pose.xy(), radius, height), d30, sonar_min)
            return
    log.verdict = TIMEOUT
    log.reason = f"goal not reached within {sc.duration:g} s"


def _intrusion(pose: Pose, valid, pidx: _PathIndex, s_prog: float, ring, arb):
    """Arc length of the first upcoming reference point a close sonar return sits on, or None."""
    best = None
    for bearing, rng_m in valid:
        if rng_m >= arb.trigger_range:
            continue
        a = pose.theta + math.radians(bearing)
        d = ring.mount_radius + rng_m
        hp = (pose.x + d * math.cos(a), pose.y + d * math.sin(a))
        j, dist = pidx.nearest(hp, s_prog, s_prog + arb.lookahead)
        if j >= 0 and dist <= arb.corridor_halfwidth:
            s = float(pidx.s[j])
            best = s if best is None else min(best, s)
    return best


def _record(log: RunLog, t, pose: Pose, ref, v, w, mode, clearance, d30, sonar_min):
    if ref is None:
        ref = (math.nan, math.nan, math.nan)
        e1 = e2 = e3 = vp = math.nan
    else:
        e = tracking_error(Pose(ref[0], ref[1], ref[2]), pose)
        e1, e2, e3, vp = e.e1, e.e2, e.e3, lyapunov(e)
    log.rows.append((t, pose.x, pose.y, wrap_angle(pose.theta), ref[0], ref[1], ref[2],
                     e1, e2, e3, v, w, vp, mode, clearance,
                     d30 if math.isfinite(d30) else -1.0,
                     sonar_min if math.isfinite(sonar_min) else -1.0))
