"""2.5D world: vertical wall faces with z-intervals over a flat floor.

Provides the exact ray caster behind the virtual LRF, the cone sonar model,
and disk clearance/collision queries for the simulator.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, NamedTuple

import numpy as np

from navstack.geometry import Pose, point_segment_distance, segment_segment_distance


@dataclass(frozen=True)
class WallFace:
    """Vertical rectangle standing on segment ``p0``-``p1`` between ``z_lo`` and ``z_hi``."""

    p0: tuple[float, float]
    p1: tuple[float, float]
    z_lo: float = 0.0
    z_hi: float = 2.5
    name: str = ""

    def __post_init__(self):
        if not self.z_lo < self.z_hi:
            raise ValueError(f"wall {self.name!r}: z_lo must be < z_hi")
        if self.p0 == self.p1:
            raise ValueError(f"wall {self.name!r}: degenerate segment")

    def blocks_height(self, lo: float, hi: float) -> bool:
        """True when the face overlaps the vertical band (lo, hi)."""
        return self.z_lo < hi and self.z_hi > lo


def box_faces(cx: float, cy: float, w: float, h: float, z_hi: float = 1.0, name: str = "box"):
    """Four faces of an axis-aligned box standing on the floor."""
    x0, x1 = cx - w / 2, cx + w / 2
    y0, y1 = cy - h / 2, cy + h / 2
    corners = [(x0, y0), (x1, y0), (x1, y1), (x0, y1)]
    return [
        WallFace(corners[i], corners[(i + 1) % 4], 0.0, z_hi, f"{name}.{i}")
        for i in range(4)
    ]


@dataclass(frozen=True)
class Region:
    name: str
    x0: float
    y0: float
    x1: float
    y1: float

    def contains(self, x: float, y: float) -> bool:
        return self.x0 <= x <= self.x1 and self.y0 <= y <= self.y1

    def edges(self):
        c = [(self.x0, self.y0), (self.x1, self.y0), (self.x1, self.y1), (self.x0, self.y1)]
        return [(c[i], c[(i + 1) % 4]) for i in range(4)]

    def distance_to_segment(self, a, b) -> float:
        if self.contains(*a) or self.contains(*b):
            return 0.0
        return min(segment_segment_distance(a, b, e0, e1) for e0, e1 in self.edges())


class SonarReading(NamedTuple):
    bearing_deg: float  # relative to robot heading
    range_m: float  # distance from the sensor face; inf when nothing is in the cone
    status: str  # "ok" | "miss" | "too_close"

    @property
    def valid(self) -> bool:
        return self.status == "ok"


@dataclass(frozen=True)
class SonarRing:
    """Eight sonars on the body perimeter, 45 deg apart, first one facing forward."""

    bearings_deg: tuple[float, ...] = (0.0, 45.0, 90.0, 135.0, 180.0, -135.0, -90.0, -45.0)
    half_angle_deg: float = 12.5
    min_range: float = 0.3
    max_range: float = 4.0
    mount_radius: float = 0.4
    height: float = 0.3

    def __post_init__(self):
        if len(self.bearings_deg) != 8:
            raise ValueError("sonar ring needs exactly eight sensors")


@dataclass
class WorldModel:
    faces: list[WallFace]
    regions: dict[str, Region] = field(default_factory=dict)

    def __post_init__(self):
        self.faces = list(self.faces)
        self._pack()

    def _pack(self):
        f = self.faces
        self._p0 = np.array([w.p0 for w in f], dtype=float).reshape(-1, 2)
        self._p1 = np.array([w.p1 for w in f], dtype=float).reshape(-1, 2)
        self._zlo = np.array([w.z_lo for w in f], dtype=float)
        self._zhi = np.array([w.z_hi for w in f], dtype=float)

    def with_faces(self, extra: Iterable[WallFace]) -> "WorldModel":
        return WorldModel(self.faces + list(extra), dict(self.regions))

    def is_empty(self) -> bool:
        return not self.faces

    # LRF

    def cast_rays(self, origin, dirs: np.ndarray, max_range: float) -> np.ndarray:
        """Nearest hit distance along unit 3D rays from one origin; inf on a miss.

        Hits are faces (inclusive of their edges) and the floor plane z = 0.
        """
        o = np.asarray(origin, dtype=float)
        d = np.asarray(dirs, dtype=float).reshape(-1, 3)
        n = len(d)
        best = np.full(n, np.inf)
        down = d[:, 2] < 0
        with np.errstate(divide="ignore", invalid="ignore"):
            t_floor = np.where(down, -o[2] / d[:, 2], np.inf)
        best = np.minimum(best, t_floor)
        if len(self.faces):
            e = self._p1 - self._p0  # (F, 2)
            w = self._p0 - o[:2]  # (F, 2)
            dx = d[:, 0:1]
            dy = d[:, 1:2]
            denom = dx * e[None, :, 1] - dy * e[None, :, 0]  # (N, F)
            w_x_e = w[:, 0] * e[:, 1] - w[:, 1] * e[:, 0]  # (F,)
            with np.errstate(divide="ignore", invalid="ignore"):
                t = w_x_e[None, :] / denom
                u = (w[None, :, 0] * dy - w[None, :, 1] * dx) / denom
            z = o[2] + t * d[:, 2:3]
            ok = (
                (np.abs(denom) > 1e-12)
                & (t > 1e-9)
                & (u >= -1e-12)
                & (u <= 1 + 1e-12)
                & (z >= self._zlo[None, :])
                & (z <= self._zhi[None, :])
            )
            t = np.where(ok, t, np.inf)
            best = np.minimum(best, t.min(axis=1))
        best[best > max_range] = np.inf
        return best

    # sonar

    def cast_sonar(self, pose: Pose, bearing_deg: float, ring: SonarRing) -> SonarReading:
        """Nearest wall inside one sonar cone, measured from the sensor face."""
        a = pose.theta + math.radians(bearing_deg)
        sx = pose.x + ring.mount_radius * math.cos(a)
        sy = pose.y + ring.mount_radius * math.sin(a)
        h = math.radians(ring.half_angle_deg)
        uL = (math.cos(a + h), math.sin(a + h))
        uR = (math.cos(a - h), math.sin(a - h))
        best = math.inf
        for f in self.faces:
            if not (f.z_lo <= ring.height <= f.z_hi):
                continue
            d = _wedge_segment_distance((sx, sy), uL, uR, f.p0, f.p1)
            best = min(best, d)
        if best > ring.max_range:
            return SonarReading(bearing_deg, math.inf, "miss")
        if best < ring.min_range:
            return SonarReading(bearing_deg, best, "too_close")
        return SonarReading(bearing_deg, best, "ok")

    def sonar_scan(self, pose: Pose, ring: SonarRing) -> list[SonarReading]:
        return [self.cast_sonar(pose, b, ring) for b in ring.bearings_deg]

    # clearance

    def clearance(self, xy, radius: float, height: float) -> float:
        """Distance from a disk of ``radius`` at ``xy`` to the nearest face it could hit."""
        best = math.inf
        for f in self.faces:
            if f.blocks_height(0.0, height):
                best = min(best, point_segment_distance(xy, f.p0, f.p1))
        return best - radius

    def swept_clearance(self, a, b, radius: float, height: float) -> float:
        """Clearance of the capsule swept by the disk moving from ``a`` to ``b``."""
        best = math.inf
        for f in self.faces:
            if f.blocks_height(0.0, height):
                best = min(best, segment_segment_distance(a, b, f.p0, f.p1))
        return best - radius


def _wedge_segment_distance(s, uL, uR, q0, q1) -> float:
    """Distance from apex ``s`` to the part of segment q0-q1 inside the wedge.

    The wedge is bounded by unit rays ``uR`` (clockwise edge) and ``uL``;
    its opening must be below 180 deg.
    """
    t0, t1 = 0.0, 1.0
    qx0, qy0 = q0[0] - s[0], q0[1] - s[1]
    qx1, qy1 = q1[0] - s[0], q1[1] - s[1]
    # inside: cross(uR, p) >= 0 and cross(p, uL) >= 0
    for f0, f1 in (
        (uR[0] * qy0 - uR[1] * qx0, uR[0] * qy1 - uR[1] * qx1),
        (qx0 * uL[1] - qy0 * uL[0], qx1 * uL[1] - qy1 * uL[0]),
    ):
        df = f1 - f0
        if abs(df) < 1e-15:
            if f0 < 0:
                return math.inf
            continue
        tc = -f0 / df
        if df > 0:
            t0 = max(t0, tc)
        else:
            t1 = min(t1, tc)
        if t0 > t1:
            return math.inf
    a = (q0[0] + t0 * (q1[0] - q0[0]), q0[1] + t0 * (q1[1] - q0[1]))
    b = (q0[0] + t1 * (q1[0] - q0[0]), q0[1] + t1 * (q1[1] - q0[1]))
    return point_segment_distance(s, a, b)


def cast_lrf_ray(
    world: WorldModel,
    robot_pose: Pose,
    alpha_deg: float,
    beta_deg: float,
    mount_height: float = 0.4,
    max_range: float = 30.0,
) -> float:
    """Range of a single LRF ray in sensor convention (beta = 90 is straight ahead); inf on a miss."""
    from navstack.scan_geometry import mount_pose, polar_to_cartesian, sensor_to_world

    local = polar_to_cartesian(alpha_deg, beta_deg, 1.0)
    tip = sensor_to_world(local, mount_pose(robot_pose), 0.0)
    d = np.array([[tip[0] - robot_pose.x, tip[1] - robot_pose.y, tip[2]]])
    return float(world.cast_rays((robot_pose.x, robot_pose.y, mount_height), d, max_range)[0])
