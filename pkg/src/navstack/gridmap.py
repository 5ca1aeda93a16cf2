"""Occupancy grid built from a segment map: supercover rasterization and dilation."""

from __future__ import annotations

import io
import math
from dataclasses import dataclass
from typing import TextIO

import numpy as np

from navstack.ipabd import LineSegment2D, SegmentMap2D

FREE = 0
OCCUPIED = 1
DILATED = 2

_CHARS = {FREE: ".", OCCUPIED: "#", DILATED: "+"}
_CODES = {v: k for k, v in _CHARS.items()}


@dataclass
class OccupancyGrid:
    """``cells[row, col]``: row indexes y (upwards from ``y_min``), col indexes x."""

    cellsize: float
    x_min: float
    y_min: float
    cells: np.ndarray

    def __post_init__(self):
        if not self.cellsize > 0:
            raise ValueError("cellsize must be > 0")
        self.cells = np.asarray(self.cells, dtype=np.uint8)

    @classmethod
    def empty(cls, cellsize: float, bounds) -> "OccupancyGrid":
        x0, y0, x1, y1 = bounds
        w = int(math.ceil((x1 - x0) / cellsize - 1e-9))
        h = int(math.ceil((y1 - y0) / cellsize - 1e-9))
        if w <= 0 or h <= 0:
            raise ValueError("bounds must have positive extent")
        return cls(cellsize, x0, y0, np.zeros((h, w), dtype=np.uint8))

    @property
    def width(self) -> int:
        return self.cells.shape[1]

    @property
    def height(self) -> int:
        return self.cells.shape[0]

    @property
    def bounds(self):
        return (self.x_min, self.y_min,
                self.x_min + self.width * self.cellsize, self.y_min + self.height * self.cellsize)

    def world_to_grid(self, x: float, y: float) -> tuple[float, float]:
        """Continuous grid coordinates, ``(x - x_min) / cellsize``."""
        return ((x - self.x_min) / self.cellsize, (y - self.y_min) / self.cellsize)

    def world_to_cell(self, x: float, y: float) -> tuple[int, int]:
        """``(col, row)`` of the cell containing a world point."""
        gx, gy = self.world_to_grid(x, y)
        return (int(math.floor(gx)), int(math.floor(gy)))

    def grid_to_world(self, col: int, row: int) -> tuple[float, float]:
        """World coordinates of a cell center."""
        return (self.x_min + (col + 0.5) * self.cellsize, self.y_min + (row + 0.5) * self.cellsize)

    def in_bounds(self, col: int, row: int) -> bool:
        return 0 <= col < self.width and 0 <= row < self.height

    def is_free(self, col: int, row: int) -> bool:
        return self.in_bounds(col, row) and self.cells[row, col] == FREE

    def blocked(self) -> np.ndarray:
        return self.cells != FREE

    def copy(self) -> "OccupancyGrid":
        return OccupancyGrid(self.cellsize, self.x_min, self.y_min, self.cells.copy())

    # text raster

    def write(self, fh: TextIO) -> None:
        fh.write(f"{self.cellsize!r} {self.x_min!r} {self.y_min!r} {self.width} {self.height}\n")
        # top row first so the file reads like a map
        for row in range(self.height - 1, -1, -1):
            fh.write("".join(_CHARS[int(v)] for v in self.cells[row]) + "\n")

    def dumps(self) -> str:
        buf = io.StringIO()
        self.write(buf)
        return buf.getvalue()

    @classmethod
    def read(cls, fh: TextIO) -> "OccupancyGrid":
        head = fh.readline().split()
        if len(head) != 5:
            raise ValueError("grid header must be 'cellsize x_min y_min width height'")
        cs, x0, y0 = map(float, head[:3])
        w, h = int(head[3]), int(head[4])
        rows = [ln.rstrip("\n") for ln in fh if ln.strip()]
        if len(rows) != h or any(len(r) != w for r in rows):
            raise ValueError("grid raster does not match header size")
        cells = np.array([[_CODES[c] for c in r] for r in reversed(rows)], dtype=np.uint8)
        return cls(cs, x0, y0, cells.reshape(h, w))

    @classmethod
    def loads(cls, text: str) -> "OccupancyGrid":
        return cls.read(io.StringIO(text))


def supercover_cells(gx0: float, gy0: float, gx1: float, gy1: float, eps: float = 1e-9):
    """All ``(col, row)`` whose closed unit square meets the segment, in grid units."""
    c0 = int(math.floor(min(gx0, gx1) - eps))
    c1 = int(math.floor(max(gx0, gx1) + eps))
    r0 = int(math.floor(min(gy0, gy1) - eps))
    r1 = int(math.floor(max(gy0, gy1) + eps))
    cols, rows = np.meshgrid(np.arange(c0, c1 + 1), np.arange(r0, r1 + 1))
    cols = cols.ravel()
    rows = rows.ravel()
    # Liang-Barsky clip of the segment against each box [col, col+1] x [row, row+1]
    dx, dy = gx1 - gx0, gy1 - gy0
    t0 = np.zeros(len(cols))
    t1 = np.ones(len(cols))
    hit = np.ones(len(cols), dtype=bool)
    for p, lo, hi, d in ((gx0, cols - eps, cols + 1 + eps, dx), (gy0, rows - eps, rows + 1 + eps, dy)):
        if abs(d) < 1e-15:
            hit &= (p >= lo) & (p <= hi)
            continue
        ta = (lo - p) / d
        tb = (hi - p) / d
        t0 = np.maximum(t0, np.minimum(ta, tb))
        t1 = np.minimum(t1, np.maximum(ta, tb))
    hit &= t0 <= t1
    return list(zip(cols[hit].tolist(), rows[hit].tolist()))


def rasterize(segmap: SegmentMap2D | list[LineSegment2D], cellsize: float, bounds) -> OccupancyGrid:
    """Mark every cell a segment passes through (corner touches included) as occupied."""
    segs = segmap.segments if isinstance(segmap, SegmentMap2D) else list(segmap)
    grid = OccupancyGrid.empty(cellsize, bounds)
    x0, y0, x1, y1 = bounds
    for i, s in enumerate(segs):
        for x, y in (s.p1, s.p2):
            if not (x0 <= x <= x1 and y0 <= y <= y1):
                raise ValueError(f"segment {i} ({s.x1:.3f},{s.y1:.3f})-({s.x2:.3f},{s.y2:.3f}) lies outside bounds")
        a = grid.world_to_grid(*s.p1)
        b = grid.world_to_grid(*s.p2)
        for col, row in supercover_cells(a[0], a[1], b[0], b[1]):
            if grid.in_bounds(col, row):
                grid.cells[row, col] = OCCUPIED
    return grid


def clip_to_bounds(segmap: SegmentMap2D, bounds) -> SegmentMap2D:
    """Liang-Barsky clip every segment to ``bounds``; fully outside segments are dropped."""
    x0, y0, x1, y1 = bounds
    out = []
    for s in segmap.segments:
        dx, dy = s.x2 - s.x1, s.y2 - s.y1
        t0, t1 = 0.0, 1.0
        ok = True
        for p, q in ((-dx, s.x1 - x0), (dx, x1 - s.x1), (-dy, s.y1 - y0), (dy, y1 - s.y1)):
            if p == 0:
                if q < 0:
                    ok = False
                    break
                continue
            r = q / p
            if p < 0:
                t0 = max(t0, r)
            else:
                t1 = min(t1, r)
        if not ok or t0 >= t1:
            continue
        a = (min(max(s.x1 + t0 * dx, x0), x1), min(max(s.y1 + t0 * dy, y0), y1))
        b = (min(max(s.x1 + t1 * dx, x0), x1), min(max(s.y1 + t1 * dy, y0), y1))
        if a != b:
            out.append(LineSegment2D(a[0], a[1], b[0], b[1]))
    return SegmentMap2D(out, segmap.source_pose, segmap.z_limit)


def dilate(grid: OccupancyGrid, radius: int = 2) -> OccupancyGrid:
    """Free cells within Chebyshev distance ``radius`` of an occupied cell become dilated."""
    if radius < 0:
        raise ValueError("radius must be >= 0")
    out = grid.copy()
    if radius == 0:
        return out
    occ = grid.cells == OCCUPIED
    h, w = occ.shape
    # separable max filter: a square structuring element is a row pass then a column pass
    pad = np.pad(occ, radius)
    rows = np.zeros((h + 2 * radius, w), dtype=bool)
    for d in range(2 * radius + 1):
        rows |= pad[:, d : d + w]
    near = np.zeros((h, w), dtype=bool)
    for d in range(2 * radius + 1):
        near |= rows[d : d + h, :]
    out.cells[near & (grid.cells == FREE)] = DILATED
    return out


def build_grid(segmap: SegmentMap2D, cellsize: float, bounds, dilation_radius: int = 2,
               clip: bool = True) -> OccupancyGrid:
    if clip:
        segmap = clip_to_bounds(segmap, bounds)
    return dilate(rasterize(segmap, cellsize, bounds), dilation_radius)
