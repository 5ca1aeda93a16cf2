"""IPaBD: compress a pitching-LRF cloud to a 2D boundary map of line segments.

The pipeline keeps, for every scan ray index, the nearest floor-plane range
among returns that lie strictly above the floor and no higher than the
robot, then splits the resulting polyline into straight segments.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass, field
from typing import TextIO

import numpy as np

from navstack.geometry import Pose, points_segment_distance
from navstack.scan_geometry import Cloud3D, mount_pose

FLOOR_EPSILON = 0.02


@dataclass(frozen=True)
class PolarPixel2D:
    beta: float  # scan angle, deg
    range: float  # floor-plane distance from the sensor axis, m
    k: int = -1  # ray index the pixel came from

    def __post_init__(self):
        if not self.range > 0:
            raise ValueError("pixel range must be > 0")


@dataclass(frozen=True)
class LineSegment2D:
    x1: float
    y1: float
    x2: float
    y2: float

    def __post_init__(self):
        if self.x1 == self.x2 and self.y1 == self.y2:
            raise ValueError("segment nodal points must be distinct")

    @property
    def length(self) -> float:
        return math.hypot(self.x2 - self.x1, self.y2 - self.y1)

    @property
    def p1(self):
        return (self.x1, self.y1)

    @property
    def p2(self):
        return (self.x2, self.y2)


@dataclass
class SegmentMap2D:
    segments: list[LineSegment2D] = field(default_factory=list)
    source_pose: Pose = Pose(0.0, 0.0, 0.0)
    z_limit: float = 0.0

    def __len__(self):
        return len(self.segments)

    def write(self, fh: TextIO) -> None:
        p = self.source_pose
        fh.write("# segmap v1\n")
        fh.write(f"# pose x={float(p.x)!r} y={float(p.y)!r} theta={float(p.theta)!r} z_limit={float(self.z_limit)!r}\n")
        for s in self.segments:
            fh.write(f"{s.x1:.6f} {s.y1:.6f} {s.x2:.6f} {s.y2:.6f}\n")

    def dumps(self) -> str:
        buf = io.StringIO()
        self.write(buf)
        return buf.getvalue()

    @classmethod
    def read(cls, fh: TextIO) -> "SegmentMap2D":
        pose = Pose(0.0, 0.0, 0.0)
        z_limit = 0.0
        segs = []
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                toks = line[1:].split()
                if toks and toks[0] == "pose":
                    kv = dict(t.split("=", 1) for t in toks[1:])
                    pose = Pose(float(kv["x"]), float(kv["y"]), float(kv["theta"]))
                    z_limit = float(kv.get("z_limit", 0.0))
                continue
            vals = line.split()
            if len(vals) != 4:
                raise ValueError(f"line {lineno}: expected 'x1 y1 x2 y2'")
            segs.append(LineSegment2D(*map(float, vals)))
        return cls(segs, pose, z_limit)

    @classmethod
    def loads(cls, text: str) -> "SegmentMap2D":
        return cls.read(io.StringIO(text))


def admissible_mask(z: np.ndarray, z_limit: float, floor_epsilon: float = FLOOR_EPSILON) -> np.ndarray:
    return (z > floor_epsilon) & (z <= z_limit)


def compress(
    cloud: Cloud3D,
    z_limit: float,
    floor_epsilon: float = FLOOR_EPSILON,
    filter_first: bool = True,
) -> list[PolarPixel2D]:
    """Project the cloud onto the floor plane and keep the nearest return per ray index.

    With ``filter_first`` (default) floor and over-height returns are removed
    before the per-ray minimum is taken; otherwise the minimum is taken over
    all returns and discarded if it is not admissible.
    """
    if not z_limit > 0:
        raise ValueError("z_limit must be > 0")
    if len(cloud) == 0:
        return []
    k = cloud.k
    rho = cloud.horizontal_range()
    ok = admissible_mask(cloud.xyz[:, 2], z_limit, floor_epsilon)
    if filter_first:
        k, rho = k[ok], rho[ok]
        keep = np.ones(len(k), dtype=bool)
    else:
        keep = ok
    if len(k) == 0:
        return []
    # lexsort: primary key k, secondary rho -> first row of each k group is its minimum
    order = np.lexsort((rho, k))
    ks, rs, keeps = k[order], rho[order], keep[order]
    first = np.ones(len(ks), dtype=bool)
    first[1:] = ks[1:] != ks[:-1]
    out = []
    cfg = cloud.cfg
    for kk, rr, kp in zip(ks[first], rs[first], keeps[first]):
        if kp and rr > 0:
            out.append(PolarPixel2D(float(cfg.scan(kk)), float(rr), int(kk)))
    out.sort(key=lambda p: p.beta)
    return out


def pixels_to_world(pixels: list[PolarPixel2D], pose: Pose) -> np.ndarray:
    """World x-y of floor-plane pixels seen from robot ``pose``."""
    if not pixels:
        return np.zeros((0, 2))
    b = np.radians([p.beta for p in pixels])
    r = np.array([p.range for p in pixels])
    mp = mount_pose(pose)
    c, s = math.cos(mp.theta), math.sin(mp.theta)
    lx, ly = r * np.cos(b), r * np.sin(b)
    return np.column_stack([mp.x + c * lx - s * ly, mp.y + s * lx + c * ly])


def break_clusters(
    pts: np.ndarray,
    ranges: np.ndarray,
    scan_step_deg: float = 1.0,
    min_break: float = 0.10,
) -> list[np.ndarray]:
    """Split an ordered scan into clusters at adaptive distance breakpoints."""
    if len(pts) == 0:
        return []
    gaps = np.hypot(*np.diff(pts, axis=0).T)
    rmax = np.maximum(ranges[1:], ranges[:-1])
    thresh = np.maximum(min_break, 2.0 * rmax * math.sin(math.radians(scan_step_deg)))
    cuts = np.nonzero(gaps > thresh)[0] + 1
    return [c for c in np.split(pts, cuts)]


def split_and_merge(pts: np.ndarray, fit_epsilon: float = 0.03) -> list[tuple[int, int]]:
    """Iterative end-point fit over an ordered cluster.

    Returns index pairs ``(i, j)`` of segment end points; every point between
    ``i`` and ``j`` lies within ``fit_epsilon`` of the chord ``pts[i]-pts[j]``.
    """
    n = len(pts)
    if n < 2:
        return []
    spans = []
    stack = [(0, n - 1)]
    while stack:
        i, j = stack.pop()
        if j - i < 2:
            spans.append((i, j))
            continue
        d = points_segment_distance(pts[i + 1 : j], pts[i], pts[j])
        m = int(np.argmax(d))
        if d[m] > fit_epsilon:
            stack.append((i + 1 + m, j))
            stack.append((i, i + 1 + m))
        else:
            spans.append((i, j))
    spans.sort()
    merged = [spans[0]]
    for i, j in spans[1:]:
        a, _ = merged[-1]
        inner = pts[a + 1 : j]
        if len(inner) == 0 or points_segment_distance(inner, pts[a], pts[j]).max() <= fit_epsilon:
            merged[-1] = (a, j)
        else:
            merged.append((i, j))
    return merged


def segment(
    pixels: list[PolarPixel2D],
    pose: Pose,
    fit_epsilon: float = 0.03,
    min_break: float = 0.10,
    scan_step_deg: float = 1.0,
    z_limit: float = 0.0,
) -> SegmentMap2D:
    """Group ordered pixels into clusters and fit line segments to each."""
    betas = [p.beta for p in pixels]
    if any(b2 < b1 for b1, b2 in zip(betas, betas[1:])):
        raise ValueError("pixels must be sorted by beta")
    pts = pixels_to_world(pixels, pose)
    ranges = np.array([p.range for p in pixels], dtype=float)
    segs: list[LineSegment2D] = []
    for cluster in break_clusters(pts, ranges, scan_step_deg, min_break):
        if len(cluster) < 2:
            continue
        for i, j in split_and_merge(cluster, fit_epsilon):
            a, b = cluster[i], cluster[j]
            if a[0] == b[0] and a[1] == b[1]:
                continue
            segs.append(LineSegment2D(float(a[0]), float(a[1]), float(b[0]), float(b[1])))
    return SegmentMap2D(segs, pose, z_limit)


def ipabd(cloud: Cloud3D, z_limit: float, **kw) -> SegmentMap2D:
    """Full pipeline: compress then segment, using the cloud's own pose and scan step."""
    fe = kw.pop("floor_epsilon", FLOOR_EPSILON)
    ff = kw.pop("filter_first", True)
    pixels = compress(cloud, z_limit, floor_epsilon=fe, filter_first=ff)
    return segment(pixels, cloud.pose, scan_step_deg=cloud.cfg.scan_step, z_limit=z_limit, **kw)
