"""Pitching 2D laser range finder: sweep lattice, polar -> Cartesian, capture.

Angles are degrees at every public boundary of this module. The scan plane's
ray at beta = 90 deg points along the robot heading, so the sensor frame is
the robot frame yawed by -90 deg (see :func:`mount_pose`).
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, TextIO

import numpy as np

from navstack.geometry import Pose

if TYPE_CHECKING:
    from navstack.world import WorldModel

CLOUD_HEADER = "# cloud3d v1"


@dataclass(frozen=True)
class SweepConfig:
    pitch_min: float = -5.0
    pitch_max: float = 20.0
    pitch_step: float = 0.266
    scan_min: float = 40.0
    scan_max: float = 140.0
    scan_step: float = 1.0
    mount_height: float = 0.4
    max_range: float = 30.0

    def __post_init__(self):
        vals = [getattr(self, f) for f in self.__dataclass_fields__]
        if not all(math.isfinite(v) for v in vals):
            raise ValueError("SweepConfig fields must be finite")
        if not self.pitch_min < self.pitch_max:
            raise ValueError("pitch_min must be < pitch_max")
        if not self.scan_min < self.scan_max:
            raise ValueError("scan_min must be < scan_max")
        if self.pitch_step <= 0 or self.scan_step <= 0:
            raise ValueError("angular steps must be > 0")
        if self.max_range <= 0:
            raise ValueError("max_range must be > 0")

    @property
    def frame_count(self) -> int:
        # 1e-9 guards exact multiples against float round-down
        return int(math.floor((self.pitch_max - self.pitch_min) / self.pitch_step + 1e-9)) + 1

    @property
    def rays_per_frame(self) -> int:
        return int(math.floor((self.scan_max - self.scan_min) / self.scan_step + 1e-9)) + 1

    def pitch(self, j):
        return self.pitch_min + np.asarray(j) * self.pitch_step

    def scan(self, k):
        return self.scan_min + np.asarray(k) * self.scan_step

    def to_header(self) -> str:
        parts = " ".join(f"{f}={getattr(self, f)!r}" for f in self.__dataclass_fields__)
        return f"# sweep {parts}"

    @classmethod
    def from_header(cls, line: str) -> "SweepConfig":
        body = line.lstrip("#").strip()
        if not body.startswith("sweep"):
            raise ValueError(f"not a sweep header: {line!r}")
        kv = dict(tok.split("=", 1) for tok in body.split()[1:])
        return cls(**{k: float(v) for k, v in kv.items()})


def polar_to_cartesian(alpha: float, beta: float, r: float) -> tuple[float, float, float]:
    """Sensor-frame point of a return at pitch ``alpha``, scan angle ``beta`` (deg)."""
    if not (math.isfinite(alpha) and math.isfinite(beta) and math.isfinite(r)):
        raise ValueError("non-finite input")
    if r <= 0:
        raise ValueError("range must be > 0")
    a = math.radians(alpha)
    b = math.radians(beta)
    return (r * math.cos(a) * math.cos(b), r * math.cos(a) * math.sin(b), r * math.sin(a))


def polar_to_cartesian_array(alpha, beta, r) -> np.ndarray:
    a = np.radians(np.asarray(alpha, dtype=float))
    b = np.radians(np.asarray(beta, dtype=float))
    r = np.asarray(r, dtype=float)
    ca = np.cos(a)
    return np.stack([r * ca * np.cos(b), r * ca * np.sin(b), r * np.sin(a)], axis=-1)


def cartesian_to_polar(x: float, y: float, z: float) -> tuple[float, float, float]:
    """Inverse of :func:`polar_to_cartesian` for ``|alpha| < 90``."""
    r = math.sqrt(x * x + y * y + z * z)
    alpha = math.degrees(math.atan2(z, math.hypot(x, y)))
    beta = math.degrees(math.atan2(y, x))
    return alpha, beta, r


def sensor_to_world(point, pose: Pose, mount_height: float) -> tuple[float, float, float]:
    """Rigid transform: rotate by ``pose.theta``, translate, lift by the mount height."""
    if not pose.is_finite():
        raise ValueError("pose must be finite")
    x, y, z = point
    c, s = math.cos(pose.theta), math.sin(pose.theta)
    return (pose.x + c * x - s * y, pose.y + s * x + c * y, z + mount_height)


def sensor_to_world_array(pts: np.ndarray, pose: Pose, mount_height: float) -> np.ndarray:
    c, s = math.cos(pose.theta), math.sin(pose.theta)
    out = np.empty_like(pts, dtype=float)
    out[..., 0] = pose.x + c * pts[..., 0] - s * pts[..., 1]
    out[..., 1] = pose.y + s * pts[..., 0] + c * pts[..., 1]
    out[..., 2] = pts[..., 2] + mount_height
    return out


def mount_pose(robot_pose: Pose) -> Pose:
    """Sensor-frame pose for a robot pose (beta = 90 deg looks along the heading)."""
    return Pose(robot_pose.x, robot_pose.y, robot_pose.theta - math.pi / 2)


@dataclass
class Cloud3D:
    """One pitching sweep. Rays without a return are absent.

    ``xyz`` holds world-frame coordinates (z measured from the floor).
    """

    cfg: SweepConfig
    pose: Pose
    j: np.ndarray
    k: np.ndarray
    alpha: np.ndarray
    beta: np.ndarray
    rng: np.ndarray
    xyz: np.ndarray = field(default=None)

    def __post_init__(self):
        self.j = np.asarray(self.j, dtype=np.int64)
        self.k = np.asarray(self.k, dtype=np.int64)
        self.alpha = np.asarray(self.alpha, dtype=float)
        self.beta = np.asarray(self.beta, dtype=float)
        self.rng = np.asarray(self.rng, dtype=float)
        n = len(self.j)
        if not all(len(a) == n for a in (self.k, self.alpha, self.beta, self.rng)):
            raise ValueError("Cloud3D columns must have equal length")
        if n and (np.any(self.rng <= 0) or np.any(self.rng > self.cfg.max_range)):
            raise ValueError("ranges must satisfy 0 < R <= max_range")
        if n > self.cfg.frame_count * self.cfg.rays_per_frame:
            raise ValueError("more points than the sweep lattice holds")
        if self.xyz is None:
            local = polar_to_cartesian_array(self.alpha, self.beta, self.rng).reshape(n, 3)
            self.xyz = sensor_to_world_array(local, mount_pose(self.pose), self.cfg.mount_height)
        else:
            self.xyz = np.asarray(self.xyz, dtype=float).reshape(n, 3)

    def __len__(self) -> int:
        return len(self.j)

    @classmethod
    def empty(cls, cfg: SweepConfig, pose: Pose) -> "Cloud3D":
        z = np.zeros(0)
        return cls(cfg, pose, z, z, z, z, z)

    def horizontal_range(self) -> np.ndarray:
        """Range projected onto the floor plane, R cos(alpha)."""
        return self.rng * np.cos(np.radians(self.alpha))

    # text I/O

    def write(self, fh: TextIO) -> None:
        fh.write(CLOUD_HEADER + "\n")
        fh.write(self.cfg.to_header() + "\n")
        p = self.pose
        fh.write(f"# pose x={p.x!r} y={p.y!r} theta={p.theta!r}\n")
        fh.write("# j k alpha_deg beta_deg range_m x y z\n")
        for i in range(len(self)):
            x, y, z = self.xyz[i]
            fh.write(
                f"{self.j[i]} {self.k[i]} {self.alpha[i]:.9g} {self.beta[i]:.9g} "
                f"{self.rng[i]:.9g} {x:.9g} {y:.9g} {z:.9g}\n"
            )

    def dumps(self) -> str:
        buf = io.StringIO()
        self.write(buf)
        return buf.getvalue()

    @classmethod
    def read(cls, fh: TextIO) -> "Cloud3D":
        first = fh.readline().rstrip("\n")
        if first != CLOUD_HEADER:
            raise ValueError(f"bad cloud header: {first!r}")
        cfg = SweepConfig.from_header(fh.readline())
        pose_line = fh.readline().lstrip("#").split()
        if not pose_line or pose_line[0] != "pose":
            raise ValueError("missing pose line")
        kv = dict(tok.split("=", 1) for tok in pose_line[1:])
        pose = Pose(float(kv["x"]), float(kv["y"]), float(kv["theta"]))
        rows = [ln.split() for ln in fh if ln.strip() and not ln.startswith("#")]
        if rows:
            arr = np.array(rows, dtype=float)
            if arr.shape[1] != 8:
                raise ValueError("cloud rows need 8 columns")
        else:
            arr = np.zeros((0, 8))
        return cls(
            cfg, pose, arr[:, 0].astype(np.int64), arr[:, 1].astype(np.int64),
            arr[:, 2], arr[:, 3], arr[:, 4], xyz=arr[:, 5:8],
        )

    @classmethod
    def loads(cls, text: str) -> "Cloud3D":
        return cls.read(io.StringIO(text))


def sweep_rays(pose: Pose, cfg: SweepConfig):
    """Ray lattice of one sweep: indices, angles, world origin and unit directions."""
    jj, kk = np.meshgrid(np.arange(cfg.frame_count), np.arange(cfg.rays_per_frame), indexing="ij")
    jj = jj.ravel()
    kk = kk.ravel()
    alpha = cfg.pitch(jj)
    beta = cfg.scan(kk)
    local = polar_to_cartesian_array(alpha, beta, np.ones_like(alpha))
    dirs = sensor_to_world_array(local, mount_pose(pose), 0.0)
    dirs[:, 0] -= pose.x
    dirs[:, 1] -= pose.y
    origin = np.array([pose.x, pose.y, cfg.mount_height])
    return jj, kk, alpha, beta, origin, dirs


def sweep(world: "WorldModel", pose: Pose, cfg: SweepConfig | None = None) -> Cloud3D:
    """Capture one up-pitching cycle from ``pose`` against ``world``."""
    cfg = cfg or SweepConfig()
    jj, kk, alpha, beta, origin, dirs = sweep_rays(pose, cfg)
    ranges = world.cast_rays(origin, dirs, cfg.max_range)
    hit = np.isfinite(ranges)
    return Cloud3D(cfg, pose, jj[hit], kk[hit], alpha[hit], beta[hit], ranges[hit])
