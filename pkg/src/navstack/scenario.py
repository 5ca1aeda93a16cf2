"""Scenario description, YAML file format and the built-in experiment scenes."""

from __future__ import annotations

import io
import math
from dataclasses import asdict, dataclass, field, fields, replace
from typing import TextIO

import yaml

from navstack.geometry import Pose
from navstack.scan_geometry import SweepConfig
from navstack.tracking import Gains, RobotParams
from navstack.vfh import VFHConfig
from navstack.world import Region, SonarRing, WallFace, WorldModel, box_faces

SCENARIO_HEADER = "# navstack-scenario v1"
SCENARIO_VERSION = 1


@dataclass
class ObstacleEvent:
    t: float
    faces: list[WallFace]


@dataclass
class Arbitration:
    """When the sonar avoider takes over from the tracker and hands back."""

    trigger_range: float = 1.5
    corridor_halfwidth: float = 0.6
    lookahead: float = 3.0
    release_distance: float = 0.3
    release_d30: float = 1.5
    target_ahead: float = 1.5
    release_margin: float = 0.3


@dataclass
class Scenario:
    name: str
    world: WorldModel
    start: Pose
    goal: tuple[float, float]
    map_bounds: tuple[float, float, float, float]
    robot: RobotParams = field(default_factory=RobotParams)
    sweep: SweepConfig = field(default_factory=SweepConfig)
    z_limit: float | None = None  # defaults to the robot height
    cellsize: float = 0.4
    dilation: int = 2
    v_cruise: float = 0.3
    gains: Gains = field(default_factory=Gains)
    vfh: VFHConfig = field(default_factory=VFHConfig)
    sonar: SonarRing = field(default_factory=SonarRing)
    arbitration: Arbitration = field(default_factory=Arbitration)
    events: list[ObstacleEvent] = field(default_factory=list)
    mode: str = "full"  # "full" pipeline or "avoid" (sonar avoider straight to the goal)
    seed: int = 0
    noise_sigma: float = 0.0
    duration: float = 120.0
    control_dt: float = 0.05
    goal_tolerance: float = 0.2
    expectations: dict[str, str] = field(default_factory=dict)

    def __post_init__(self):
        if self.mode not in ("full", "avoid"):
            raise ValueError(f"unknown mode {self.mode!r}")
        x0, y0, x1, y1 = self.map_bounds
        for label, (x, y) in (("start", self.start.xy()), ("goal", self.goal)):
            if not (x0 <= x <= x1 and y0 <= y <= y1):
                raise ValueError(f"{label} {x, y} lies outside map bounds")
        for region, exp in self.expectations.items():
            if exp not in ("visited", "avoided"):
                raise ValueError(f"expectation for {region!r} must be visited|avoided")
            if region not in self.world.regions:
                raise ValueError(f"expectation names unknown region {region!r}")
        if not 0 < self.control_dt <= 0.1:
            raise ValueError("control_dt must be in (0, 0.1]")

    @property
    def effective_z_limit(self) -> float:
        return self.robot.body_height if self.z_limit is None else self.z_limit

    def world_at(self, t: float) -> WorldModel:
        extra = [f for ev in self.events if ev.t <= t for f in ev.faces]
        return self.world.with_faces(extra) if extra else self.world

    # file format

    def to_dict(self) -> dict:
        def face(f: WallFace):
            return {"p0": list(f.p0), "p1": list(f.p1), "z": [f.z_lo, f.z_hi], "name": f.name}

        return {
            "version": SCENARIO_VERSION,
            "name": self.name,
            "mode": self.mode,
            "start": {"x": self.start.x, "y": self.start.y, "theta_deg": math.degrees(self.start.theta)},
            "goal": list(self.goal),
            "map_bounds": list(self.map_bounds),
            "z_limit": self.z_limit,
            "cellsize": self.cellsize,
            "dilation": self.dilation,
            "v_cruise": self.v_cruise,
            "seed": self.seed,
            "noise_sigma": self.noise_sigma,
            "duration": self.duration,
            "control_dt": self.control_dt,
            "goal_tolerance": self.goal_tolerance,
            "robot": asdict(self.robot),
            "sweep": asdict(self.sweep),
            "gains": asdict(self.gains),
            "vfh": asdict(self.vfh),
            "sonar": {**asdict(self.sonar), "bearings_deg": list(self.sonar.bearings_deg)},
            "arbitration": asdict(self.arbitration),
            "walls": [face(f) for f in self.world.faces],
            "regions": {r.name: [r.x0, r.y0, r.x1, r.y1] for r in self.world.regions.values()},
            "events": [{"t": e.t, "walls": [face(f) for f in e.faces]} for e in self.events],
            "expect": dict(self.expectations),
        }

    def dump(self, fh: TextIO) -> None:
        fh.write(SCENARIO_HEADER + "\n")
        yaml.safe_dump(self.to_dict(), fh, sort_keys=False, default_flow_style=None)

    def dumps(self) -> str:
        buf = io.StringIO()
        self.dump(buf)
        return buf.getvalue()

    @classmethod
    def from_dict(cls, d: dict) -> "Scenario":
        if d.get("version") != SCENARIO_VERSION:
            raise ValueError(f"unsupported scenario version {d.get('version')!r}")

        def face(w):
            return WallFace(tuple(w["p0"]), tuple(w["p1"]), float(w["z"][0]), float(w["z"][1]),
                            w.get("name", ""))

        def sub(kind, key):
            vals = d.get(key) or {}
            known = {f.name for f in fields(kind)}
            unknown = set(vals) - known
            if unknown:
                raise ValueError(f"unknown {key} keys: {sorted(unknown)}")
            if kind is SonarRing and "bearings_deg" in vals:
                vals = {**vals, "bearings_deg": tuple(vals["bearings_deg"])}
            return kind(**vals)

        regions = {n: Region(n, *map(float, r)) for n, r in (d.get("regions") or {}).items()}
        world = WorldModel([face(w) for w in d.get("walls") or []], regions)
        s = d["start"]
        return cls(
            name=d.get("name", "scenario"),
            world=world,
            start=Pose.deg(s["x"], s["y"], s.get("theta_deg", 0.0)),
            goal=tuple(map(float, d["goal"])),
            map_bounds=tuple(map(float, d["map_bounds"])),
            robot=sub(RobotParams, "robot"),
            sweep=sub(SweepConfig, "sweep"),
            z_limit=d.get("z_limit"),
            cellsize=float(d.get("cellsize", 0.4)),
            dilation=int(d.get("dilation", 2)),
            v_cruise=float(d.get("v_cruise", 0.3)),
            gains=sub(Gains, "gains"),
            vfh=sub(VFHConfig, "vfh"),
            sonar=sub(SonarRing, "sonar"),
            arbitration=sub(Arbitration, "arbitration"),
            events=[ObstacleEvent(float(e["t"]), [face(w) for w in e["walls"]]) for e in d.get("events") or []],
            mode=d.get("mode", "full"),
            seed=int(d.get("seed", 0)),
            noise_sigma=float(d.get("noise_sigma", 0.0)),
            duration=float(d.get("duration", 120.0)),
            control_dt=float(d.get("control_dt", 0.05)),
            goal_tolerance=float(d.get("goal_tolerance", 0.2)),
            expectations=dict(d.get("expect") or {}),
        )

    @classmethod
    def load(cls, fh: TextIO) -> "Scenario":
        text = fh.read()
        first = text.split("\n", 1)[0].strip()
        if first != SCENARIO_HEADER:
            raise ValueError(f"scenario must start with {SCENARIO_HEADER!r}")
        return cls.from_dict(yaml.safe_load(text))

    @classmethod
    def loads(cls, text: str) -> "Scenario":
        return cls.load(io.StringIO(text))


# built-in scenes

GATE_WALL_Y = 4.0
GATE_SCENE_BOUNDS = (-5.0, -1.0, 5.0, 9.0)


def gate_world() -> WorldModel:
    """Three ways through a wall 4 m ahead of the start.

    Gate A sits on the straight line to the goal under a lintel at 1.0-1.3 m;
    gate B, offset to the left, has its lintel at 1.5-1.8 m; corridor C on the
    right is unobstructed but further round.
    """
    y = GATE_WALL_Y
    H = 2.5
    faces = [
        WallFace((-5.4, y), (-4.0, y), 0.0, H, "post_left"),
        WallFace((-1.6, y), (-1.2, y), 0.0, H, "post_ab"),
        WallFace((1.2, y), (2.4, y), 0.0, H, "post_ac"),
        WallFace((4.8, y), (5.4, y), 0.0, H, "post_right"),
        WallFace((-4.0, y), (-1.6, y), 1.5, 1.8, "lintel_b"),
        WallFace((-1.2, y), (1.2, y), 1.0, 1.3, "lintel_a"),
        WallFace((2.4, y), (2.4, y + 2.0), 0.0, H, "corridor_c_left"),
        WallFace((4.8, y), (4.8, y + 2.0), 0.0, H, "corridor_c_right"),
        # room shell
        WallFace((-5.4, -1.4), (5.4, -1.4), 0.0, H, "wall_south"),
        WallFace((5.4, -1.4), (5.4, 9.4), 0.0, H, "wall_east"),
        WallFace((5.4, 9.4), (-5.4, 9.4), 0.0, H, "wall_north"),
        WallFace((-5.4, 9.4), (-5.4, -1.4), 0.0, H, "wall_west"),
    ]
    regions = {
        "A": Region("A", -1.2, y - 0.2, 1.2, y + 0.2),
        "B": Region("B", -4.0, y - 0.2, -1.6, y + 0.2),
        "C": Region("C", 2.4, y - 0.2, 4.8, y + 2.0),
    }
    return WorldModel(faces, regions)


def gate_scenario(robot_height: float = 1.2, **kw) -> Scenario:
    base = dict(
        name="gates",
        world=gate_world(),
        start=Pose.deg(0.0, 0.0, 90.0),
        goal=(0.0, 7.6),
        map_bounds=GATE_SCENE_BOUNDS,
        robot=RobotParams(body_height=robot_height),
        expectations={"B": "visited", "A": "avoided", "C": "avoided"},
        duration=150.0,
    )
    base.update(kw)
    return Scenario(**base)


SUDDEN_OBSTACLE = (-2.0, 2.0)  # on the planned S -> B leg, about 2.5 m ahead at t = 2 s


def sudden_obstacle_scenario(t_insert: float = 2.0, size: float = 0.5, at=SUDDEN_OBSTACLE) -> Scenario:
    box = box_faces(at[0], at[1], size, size, z_hi=1.0, name="O")
    return gate_scenario(name="sudden_obstacle", events=[ObstacleEvent(t_insert, box)],
                         expectations={"B": "visited"})


def doorway_world(door_width: float = 1.2, wall_y: float = 2.0) -> WorldModel:
    h = door_width / 2
    faces = [
        WallFace((-4.0, wall_y), (-h, wall_y), 0.0, 2.5, "wall_left"),
        WallFace((h, wall_y), (4.0, wall_y), 0.0, 2.5, "wall_right"),
    ]
    return WorldModel(faces, {"door": Region("door", -h, wall_y - 0.05, h, wall_y + 0.05)})


def doorway_scenario(door_width: float = 1.2, **kw) -> Scenario:
    base = dict(
        name="doorway",
        world=doorway_world(door_width),
        start=Pose.deg(0.0, 0.0, 90.0),
        goal=(0.0, 4.5),
        map_bounds=(-4.0, -1.0, 4.0, 6.0),
        mode="avoid",
        duration=60.0,
        expectations={"door": "visited"},
    )
    base.update(kw)
    return Scenario(**base)


def enclosed_room_world(half: float = 10.0, height: float = 12.0) -> WorldModel:
    c = [(-half, -half), (half, -half), (half, half), (-half, half)]
    return WorldModel([WallFace(c[i], c[(i + 1) % 4], 0.0, height, f"room.{i}") for i in range(4)])


BUILTIN = {
    "gates": gate_scenario,
    "gates_low_robot": lambda: gate_scenario(robot_height=0.9, name="gates_low_robot",
                                             expectations={"A": "visited"}),
    "sudden_obstacle": sudden_obstacle_scenario,
    "doorway": doorway_scenario,
}


def builtin(name: str) -> Scenario:
    try:
        return BUILTIN[name]()
    except KeyError:
        raise ValueError(f"unknown built-in scenario {name!r}; choose from {sorted(BUILTIN)}") from None


def with_overrides(sc: Scenario, **kw) -> Scenario:
    return replace(sc, **kw)
