"""Improved vector field histogram avoider driven by an eight-sonar ring.

Every cycle a small robot-centred net chart is rebuilt from the sonar
readings (values 0, 2 or 3), turned into a polar histogram, and a steering
direction is picked from the free slots inside a 100 deg window around the
current heading. All angles in this module are degrees.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Callable, Iterable

import numpy as np

from navstack.geometry import Pose, wrap_deg


@dataclass(frozen=True)
class VFHConfig:
    min_range: float = 0.3
    max_range: float = 4.0
    netchart_cellsize: float = 0.1
    sensor_offset: float = 0.4  # sonar faces sit on the body perimeter
    sector_width: float = 5.0
    smoothing: int = 2
    min_slot_sectors: int = 4  # robot angular clearance, 20 deg
    wide_slot_sectors: int = 18
    window_deg: float = 100.0
    case_split_deg: float = 90.0
    rotate_deg: float = 100.0
    turn_gain: float = 10.0
    omega_max: float = 25.0  # deg/s
    v_max: float = 0.5
    stop_distance: float = 0.4
    slow_gain: float = 5.0
    turn_slowdown_at: float = 10.0  # deg/s
    turn_slowdown: float = 2.5
    front_half_angle: float = 30.0

    @property
    def n_sectors(self) -> int:
        n = 360.0 / self.sector_width
        if abs(n - round(n)) > 1e-9:
            raise ValueError("sector_width must divide 360")
        return int(round(n))

    @property
    def b(self) -> float:
        # a - b*min_range = 1 and a - b*max_range = 0
        return 1.0 / (self.max_range - self.min_range)

    @property
    def a(self) -> float:
        return self.max_range * self.b

    @property
    def threshold(self) -> float:
        """Histogram level of a single 2-cell at 1.5 m; sectors strictly below are free."""
        return 4.0 * (self.a - self.b * 1.5)


def beam_pattern(center, perp, cellsize):
    """Value 3 on the beam axis hit cell, 2 on its two perpendicular neighbours."""
    cx, cy = center
    px, py = perp
    return [
        ((cx, cy), 3),
        ((cx + px * cellsize, cy + py * cellsize), 2),
        ((cx - px * cellsize, cy - py * cellsize), 2),
    ]


@dataclass
class NetChart:
    """Square world-aligned grid centred on the robot; ``values[row, col]``."""

    center: tuple[float, float]
    cellsize: float
    half: int
    sensor_offset: float
    values: np.ndarray = None

    def __post_init__(self):
        n = 2 * self.half + 1
        if self.values is None:
            self.values = np.zeros((n, n), dtype=np.int8)
        if self.values.shape != (n, n):
            raise ValueError("net chart shape does not match its half-size")

    @classmethod
    def around(cls, pose: Pose, cfg: VFHConfig) -> "NetChart":
        half = int(math.ceil((cfg.max_range + cfg.sensor_offset) / cfg.netchart_cellsize)) + 1
        return cls((pose.x, pose.y), cfg.netchart_cellsize, half, cfg.sensor_offset)

    def cell_of(self, x: float, y: float) -> tuple[int, int]:
        col = int(round((x - self.center[0]) / self.cellsize)) + self.half
        row = int(round((y - self.center[1]) / self.cellsize)) + self.half
        return col, row

    def cell_offset(self, col: int, row: int) -> tuple[float, float]:
        return ((col - self.half) * self.cellsize, (row - self.half) * self.cellsize)

    def set_max(self, col: int, row: int, value: int) -> None:
        n = 2 * self.half + 1
        if 0 <= col < n and 0 <= row < n:
            self.values[row, col] = max(int(self.values[row, col]), value)

    def nonzero(self):
        rows, cols = np.nonzero(self.values)
        return [(int(c), int(r), int(self.values[r, c])) for r, c in zip(rows, cols)]


def update_netchart(
    chart: NetChart | None,
    readings: Iterable,
    pose: Pose,
    cfg: VFHConfig = VFHConfig(),
    pattern: Callable = beam_pattern,
) -> NetChart:
    """Rebuild the chart around ``pose`` from ``(bearing_deg, range_m)`` readings.

    Readings outside ``[min_range, max_range]`` are ignored. ``chart`` is only
    used for its geometry; values are never carried over between cycles.
    """
    out = NetChart.around(pose, cfg) if chart is None else NetChart(
        (pose.x, pose.y), chart.cellsize, chart.half, chart.sensor_offset)
    for bearing, rng in readings:
        if not (cfg.min_range <= rng <= cfg.max_range):
            continue
        a = pose.theta + math.radians(bearing)
        u = (math.cos(a), math.sin(a))
        d = out.sensor_offset + rng
        hit_col, hit_row = out.cell_of(pose.x + d * u[0], pose.y + d * u[1])
        hx, hy = out.cell_offset(hit_col, hit_row)
        for (x, y), val in pattern((hx, hy), (-u[1], u[0]), out.cellsize):
            col = int(round(x / out.cellsize)) + out.half
            row = int(round(y / out.cellsize)) + out.half
            out.set_max(col, row, val)
    return out


@dataclass
class PolarHistogram:
    h: np.ndarray  # smoothed sector densities
    raw: np.ndarray
    sector_width: float

    @property
    def n(self) -> int:
        return len(self.h)

    def sector_of(self, angle_deg: float) -> int:
        return int(math.floor((angle_deg % 360.0) / self.sector_width)) % self.n


def smooth(raw: np.ndarray, l: int) -> np.ndarray:
    """Circular triangular smoothing over +-l sectors, normalised to a unit centre weight."""
    if l == 0:
        return raw.copy()
    out = np.zeros_like(raw)
    for off in range(-l, l + 1):
        out += (l + 1 - abs(off)) * np.roll(raw, off)
    return out / (l + 1)


def build_histogram(chart: NetChart, cfg: VFHConfig = VFHConfig()) -> PolarHistogram:
    """Each non-zero cell adds ``c^2 (a - b d)`` to the sector containing its bearing."""
    raw = np.zeros(cfg.n_sectors)
    for col, row, c in chart.nonzero():
        dx, dy = chart.cell_offset(col, row)
        dist = max(0.0, math.hypot(dx, dy) - chart.sensor_offset)
        m = c * c * (cfg.a - cfg.b * dist)
        if m <= 0:
            continue
        bearing = math.degrees(math.atan2(dy, dx)) % 360.0
        raw[int(bearing // cfg.sector_width) % cfg.n_sectors] += m
    return PolarHistogram(smooth(raw, cfg.smoothing), raw, cfg.sector_width)


@dataclass(frozen=True)
class Slot:
    start: int  # first free sector
    end: int  # last free sector (inclusive, may wrap below start)
    width: int  # number of sectors
    theta_d: float  # candidate direction, deg in (-180, 180]


@dataclass(frozen=True)
class SteeringDecision:
    kind: str  # "case1" | "case2" | "rotate"
    theta_d: float
    rotate_dir: int = 0  # +1 left, -1 right when kind == "rotate"
    slots: tuple = ()


def find_slots(hist: PolarHistogram, theta_t: float, cfg: VFHConfig = VFHConfig()) -> list[Slot]:
    """Runs of sub-threshold sectors wide enough for the robot, each with its candidate direction."""
    free = hist.h < cfg.threshold
    n = hist.n
    w = hist.sector_width
    if free.all():
        return [Slot(0, n - 1, n, wrap_deg(theta_t))]
    # rotate so index 0 is blocked, then runs never wrap
    s0 = int(np.argmin(free))
    slots = []
    i = 0
    while i < n:
        if free[(s0 + i) % n]:
            j = i
            while j + 1 < n and free[(s0 + j + 1) % n]:
                j += 1
            width = j - i + 1
            if width >= cfg.min_slot_sectors:
                start = (s0 + i) % n
                lo = start * w  # left edge angle, ccw from here
                span = width * w
                slots.append(Slot(start, (s0 + j) % n, width, _candidate(lo, span, theta_t, cfg)))
            i = j + 1
        else:
            i += 1
    return slots


def _candidate(lo: float, span: float, theta_t: float, cfg: VFHConfig) -> float:
    if span <= cfg.wide_slot_sectors * cfg.sector_width:
        return wrap_deg(lo + span / 2)
    margin = cfg.min_slot_sectors * cfg.sector_width / 2
    off = (theta_t - lo) % 360.0
    if margin <= off <= span - margin:
        return wrap_deg(theta_t)
    # target outside the usable part: nearest edge, pulled inward
    d_lo = abs(wrap_deg(theta_t - lo))
    d_hi = abs(wrap_deg(theta_t - (lo + span)))
    return wrap_deg(lo + margin) if d_lo <= d_hi else wrap_deg(lo + span - margin)


def select_direction(hist: PolarHistogram, theta: float, theta_t: float,
                     cfg: VFHConfig = VFHConfig()) -> SteeringDecision:
    slots = find_slots(hist, theta_t, cfg)
    window = [s for s in slots if abs(wrap_deg(theta - s.theta_d)) < cfg.window_deg]
    if not window:
        d = 1 if wrap_deg(theta_t - theta) > 0 else -1
        return SteeringDecision("rotate", wrap_deg(theta + d * cfg.rotate_deg), d, tuple(slots))
    if abs(wrap_deg(theta - theta_t)) < cfg.case_split_deg:
        best = min(window, key=lambda s: (abs(wrap_deg(s.theta_d - theta_t)), s.start))
        return SteeringDecision("case1", best.theta_d, 0, tuple(slots))
    best = min(window, key=lambda s: (abs(wrap_deg(s.theta_d - theta)), s.start))
    return SteeringDecision("case2", best.theta_d, 0, tuple(slots))


def angular_command(theta_d: float, theta: float, cfg: VFHConfig = VFHConfig()) -> float:
    """Turn rate in deg/s: proportional to the heading error, clamped."""
    w = cfg.turn_gain * wrap_deg(theta_d - theta)
    return min(max(w, -cfg.omega_max), cfg.omega_max)


def speed_command(d30: float, omega: float, cfg: VFHConfig = VFHConfig()) -> float:
    """Forward speed in m/s from the front clearance ``d30`` and the turn rate (deg/s)."""
    if d30 < 0:
        raise ValueError("d30 must be >= 0")
    slow_below = cfg.stop_distance + cfg.v_max / cfg.slow_gain
    if d30 >= slow_below:
        base = cfg.v_max
    else:
        base = min(cfg.v_max, max(0.0, cfg.slow_gain * (d30 - cfg.stop_distance)))
    if abs(omega) >= cfg.turn_slowdown_at:
        return base / cfg.turn_slowdown
    return base


def front_distance(readings: Iterable, cfg: VFHConfig = VFHConfig()) -> float:
    """Nearest return among sonars within +-30 deg of the heading; inf when clear.

    ``readings`` are ``(bearing_deg, range_m)``; returns below the sonar
    minimum still count here, so a very close object stops the robot.
    """
    best = math.inf
    for b, r in readings:
        if abs(wrap_deg(b)) <= cfg.front_half_angle and r <= cfg.max_range:
            best = min(best, r)
    return best


@dataclass
class VFHRecord:
    t: float
    pose: tuple
    theta_t: float
    decision: SteeringDecision
    hist: np.ndarray
    omega: float
    v: float

    def to_json(self) -> str:
        d = self.decision
        return json.dumps({
            "t": round(self.t, 6),
            "pose": [round(v, 6) for v in self.pose],
            "theta_t": round(self.theta_t, 6),
            "case": d.kind,
            "theta_d": round(d.theta_d, 6),
            "slots": [[s.start, s.end, s.width, round(s.theta_d, 6)] for s in d.slots],
            "hist": [round(float(v), 6) for v in self.hist],
            "omega": round(self.omega, 6),
            "v": round(self.v, 6),
        }, sort_keys=True)


@dataclass
class ImprovedVFH:
    """One avoider instance; the only cross-cycle state is an in-progress rotation."""

    cfg: VFHConfig = field(default_factory=VFHConfig)
    rotating_to: float | None = None
    records: list[VFHRecord] = field(default_factory=list)
    keep_records: bool = True

    def reset(self):
        self.rotating_to = None

    def step(self, readings, pose: Pose, target, t: float = 0.0) -> tuple[float, float]:
        """Return ``(v m/s, omega deg/s)`` for one cycle.

        ``readings`` are ``(bearing_deg, range_m)`` relative to the heading.
        """
        cfg = self.cfg
        readings = list(readings)
        theta = math.degrees(pose.theta)
        theta_t = math.degrees(math.atan2(target[1] - pose.y, target[0] - pose.x))
        hist = build_histogram(update_netchart(None, readings, pose, cfg), cfg)
        dec = select_direction(hist, theta, theta_t, cfg)
        if dec.kind == "rotate":
            if self.rotating_to is None or abs(wrap_deg(self.rotating_to - theta)) < 1.0:
                self.rotating_to = dec.theta_d
            w = angular_command(self.rotating_to, theta, cfg)
            v = 0.0
        else:
            self.rotating_to = None
            w = angular_command(dec.theta_d, theta, cfg)
            v = speed_command(front_distance(readings, cfg), w, cfg)
        if self.keep_records:
            self.records.append(VFHRecord(t, (pose.x, pose.y, pose.theta), theta_t, dec, hist.h, w, v))
        return v, w
