"""Deterministic SVG plots of maps, grids, paths and run logs.

Output is plain text with fixed number formatting so identical inputs give
byte-identical files.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable
from xml.sax.saxutils import escape

import numpy as np

from navstack.gridmap import DILATED, OCCUPIED, OccupancyGrid
from navstack.ipabd import SegmentMap2D
from navstack.planner import GridPath, ReferenceTrajectory
from navstack.scan_geometry import Cloud3D

PLOT_KINDS = ("map2d", "grid", "path", "trajectory-overlay", "vfh-run")

MODE_COLORS = {"track": "#1f77b4", "avoid": "#d62728", "goal": "#2ca02c", "collision": "#000000"}


def _f(v: float) -> str:
    s = f"{v:.3f}".rstrip("0").rstrip(".")
    return "0" if s in ("-0", "") else s


class Canvas:
    """World-to-pixel mapping with y pointing up and an element list."""

    def __init__(self, bounds, width: int = 600, margin: int = 20, title: str = ""):
        x0, y0, x1, y1 = bounds
        if not (x1 > x0 and y1 > y0):
            raise ValueError("empty plot bounds")
        self.bounds = bounds
        self.scale = (width - 2 * margin) / (x1 - x0)
        self.margin = margin
        self.width = width
        self.height = int(math.ceil((y1 - y0) * self.scale)) + 2 * margin
        self.items: list[str] = []
        self.title = title

    def px(self, x: float, y: float) -> tuple[float, float]:
        x0, y0, _, y1 = self.bounds
        return (self.margin + (x - x0) * self.scale, self.margin + (y1 - y) * self.scale)

    def line(self, a, b, stroke="#000", width=1.0, extra=""):
        (u0, v0), (u1, v1) = self.px(*a), self.px(*b)
        self.items.append(f'<line x1="{_f(u0)}" y1="{_f(v0)}" x2="{_f(u1)}" y2="{_f(v1)}" '
                          f'stroke="{stroke}" stroke-width="{_f(width)}"{extra}/>')

    def polyline(self, pts: Iterable, stroke="#000", width=1.0, extra=""):
        coords = " ".join(f"{_f(u)},{_f(v)}" for u, v in (self.px(x, y) for x, y in pts))
        if coords:
            self.items.append(f'<polyline points="{coords}" fill="none" stroke="{stroke}" '
                              f'stroke-width="{_f(width)}"{extra}/>')

    def circle(self, x, y, r_px=2.0, fill="#000"):
        u, v = self.px(x, y)
        self.items.append(f'<circle cx="{_f(u)}" cy="{_f(v)}" r="{_f(r_px)}" fill="{fill}"/>')

    def rect(self, x, y, w, h, fill="#888"):
        # (x, y) is the lower-left corner in world units
        u, v = self.px(x, y + h)
        self.items.append(f'<rect x="{_f(u)}" y="{_f(v)}" width="{_f(w * self.scale)}" '
                          f'height="{_f(h * self.scale)}" fill="{fill}"/>')

    def text(self, x, y, s, size=12):
        u, v = self.px(x, y)
        self.items.append(f'<text x="{_f(u)}" y="{_f(v)}" font-size="{size}" '
                          f'font-family="sans-serif">{escape(s)}</text>')

    def render(self) -> str:
        head = (f'<svg xmlns="http://www.w3.org/2000/svg" width="{self.width}" height="{self.height}" '
                f'viewBox="0 0 {self.width} {self.height}">')
        body = ['<rect width="100%" height="100%" fill="#fff"/>']
        if self.title:
            body.append(f'<title>{escape(self.title)}</title>')
        return "\n".join([head, *body, *self.items, "</svg>"]) + "\n"


def _pad(bounds, pad=0.5):
    x0, y0, x1, y1 = bounds
    if x1 - x0 < 1e-9:
        x0, x1 = x0 - 1, x1 + 1
    if y1 - y0 < 1e-9:
        y0, y1 = y0 - 1, y1 + 1
    return (x0 - pad, y0 - pad, x1 + pad, y1 + pad)


def _union(*boxes):
    boxes = [b for b in boxes if b is not None]
    if not boxes:
        return (-1.0, -1.0, 1.0, 1.0)
    a = np.array(boxes)
    return (a[:, 0].min(), a[:, 1].min(), a[:, 2].max(), a[:, 3].max())


def _box_of(xy) -> tuple | None:
    xy = np.asarray(xy, dtype=float).reshape(-1, 2)
    xy = xy[np.isfinite(xy).all(axis=1)]
    if len(xy) == 0:
        return None
    return (xy[:, 0].min(), xy[:, 1].min(), xy[:, 0].max(), xy[:, 1].max())


def _segmap_box(segmap: SegmentMap2D | None):
    if segmap is None or not segmap.segments:
        return None
    pts = [(s.x1, s.y1) for s in segmap.segments] + [(s.x2, s.y2) for s in segmap.segments]
    return _box_of(pts)


def _draw_segments(cv: Canvas, segmap: SegmentMap2D, stroke="#333", width=2.0):
    for s in segmap.segments:
        cv.line((s.x1, s.y1), (s.x2, s.y2), stroke, width)
        cv.circle(s.x1, s.y1, 2.0, stroke)
        cv.circle(s.x2, s.y2, 2.0, stroke)


def render_map2d(segmap: SegmentMap2D, cloud: Cloud3D | None = None, width: int = 600) -> str:
    """Boundary segments, optionally over the floor projection of the raw cloud."""
    box = _union(_segmap_box(segmap), _box_of(cloud.xyz[:, :2]) if cloud is not None and len(cloud) else None,
                 _box_of([segmap.source_pose.xy()]))
    cv = Canvas(_pad(box), width, title="2D map")
    if cloud is not None:
        for x, y in cloud.xyz[:, :2]:
            cv.circle(float(x), float(y), 0.8, "#aaa")
    _draw_segments(cv, segmap)
    p = segmap.source_pose
    cv.circle(p.x, p.y, 4.0, "#2ca02c")
    return cv.render()


def _draw_grid(cv: Canvas, grid: OccupancyGrid):
    a = grid.cellsize
    for row in range(grid.height):
        for col in range(grid.width):
            c = grid.cells[row, col]
            if c == OCCUPIED:
                cv.rect(grid.x_min + col * a, grid.y_min + row * a, a, a, "#333")
            elif c == DILATED:
                cv.rect(grid.x_min + col * a, grid.y_min + row * a, a, a, "#bbb")


def render_grid(grid: OccupancyGrid, path: GridPath | None = None, width: int = 600) -> str:
    cv = Canvas(grid.bounds, width, margin=20, title="occupancy grid")
    _draw_grid(cv, grid)
    if path is not None:
        pts = [grid.grid_to_world(c, r) for c, r in path.cells]
        cv.polyline(pts, "#1f77b4", 2.5)
        cv.circle(*pts[0], 4.0, "#2ca02c")
        cv.circle(*pts[-1], 4.0, "#d62728")
    return cv.render()


def render_path(grid: OccupancyGrid, path: GridPath, width: int = 600) -> str:
    return render_grid(grid, path, width)


def render_trajectory_overlay(traj: ReferenceTrajectory, actual_xy=None, segmap: SegmentMap2D | None = None,
                              width: int = 600) -> str:
    """Reference trajectory (dashed) with the executed path on top."""
    ref = np.column_stack([traj.x, traj.y])
    box = _union(_box_of(ref), _box_of(actual_xy) if actual_xy is not None else None, _segmap_box(segmap))
    cv = Canvas(_pad(box), width, title="trajectory tracking")
    if segmap is not None:
        _draw_segments(cv, segmap, "#888", 1.5)
    cv.polyline(ref, "#888", 2.0, ' stroke-dasharray="6,4"')
    if actual_xy is not None and len(actual_xy):
        cv.polyline(actual_xy, "#1f77b4", 1.5)
        cv.circle(*actual_xy[0], 3.0, "#2ca02c")
    return cv.render()


def render_vfh_run(run, segmap: SegmentMap2D | None = None, width: int = 600) -> str:
    """Executed path of a run log, coloured by controller mode."""
    x, y = run.column("x"), run.column("y")
    modes = run.column("mode")
    xy = np.column_stack([x, y])
    ref = np.column_stack([run.column("x_r"), run.column("y_r")])
    box = _union(_box_of(xy), _box_of(ref), _segmap_box(segmap))
    cv = Canvas(_pad(box), width, title=f"run {run.scenario}")
    if segmap is not None:
        _draw_segments(cv, segmap, "#888", 1.5)
    finite = np.isfinite(ref).all(axis=1)
    if finite.any():
        cv.polyline(ref[finite], "#888", 1.5, ' stroke-dasharray="6,4"')
    start = 0
    for i in range(1, len(modes) + 1):
        if i == len(modes) or modes[i] != modes[start]:
            seg = xy[start:min(i + 1, len(xy))]
            cv.polyline(seg, MODE_COLORS.get(str(modes[start]), "#555"), 2.0)
            start = i
    if len(xy):
        cv.circle(*xy[0], 3.5, "#2ca02c")
        cv.circle(*xy[-1], 3.5, MODE_COLORS.get(str(modes[-1]), "#555"))
        cv.text(box[0] - 0.4, box[3] + 0.2, f"{run.scenario}: {run.verdict}")
    return cv.render()


@dataclass
class PlotSpec:
    kind: str
    inputs: dict[str, str] = field(default_factory=dict)
    out: str = "-"
    width: int = 600

    def __post_init__(self):
        if self.kind not in PLOT_KINDS:
            raise ValueError(f"unknown plot kind {self.kind!r}; choose from {', '.join(PLOT_KINDS)}")
        for name, p in self.inputs.items():
            if p != "-" and not Path(p).is_file():
                raise FileNotFoundError(f"{name} input {p!r} does not exist")
