"""Grid A* and conversion of the planned cell path into a timed reference."""

from __future__ import annotations

import csv
import heapq
import io
import math
from dataclasses import dataclass
from typing import TextIO

import numpy as np

from navstack.geometry import wrap_angle
from navstack.gridmap import FREE, OccupancyGrid, supercover_cells

SQRT2 = math.sqrt(2.0)
TRAJECTORY_DT = 0.05
V_CRUISE = 0.3
OMEGA_MAX = math.radians(25.0)


class PlanningError(Exception):
    pass


class InvalidEndpoint(PlanningError):
    pass


class NoPath(PlanningError):
    pass


class StationaryGoal(PlanningError):
    pass


@dataclass
class GridPath:
    cells: list[tuple[int, int]]  # (col, row)
    n_straight: int
    n_diagonal: int
    cellsize: float
    waypoints: list[tuple[float, float]]

    @property
    def cost(self) -> float:
        return path_cost(self.n_straight, self.n_diagonal, self.cellsize)

    def write_csv(self, fh: TextIO) -> None:
        fh.write(f"# gridpath v1 cost={self.cost!r} straight={self.n_straight} "
                 f"diagonal={self.n_diagonal} cellsize={self.cellsize!r}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["col", "row", "x", "y"])
        for (c, r), (x, y) in zip(self.cells, self.waypoints):
            w.writerow([c, r, f"{x:.6f}", f"{y:.6f}"])

    def dumps(self) -> str:
        buf = io.StringIO()
        self.write_csv(buf)
        return buf.getvalue()

    @classmethod
    def read_csv(cls, fh: TextIO) -> "GridPath":
        head = fh.readline()
        if not head.startswith("# gridpath"):
            raise ValueError("missing gridpath header")
        kv = dict(t.split("=", 1) for t in head.split()[3:])
        rows = list(csv.DictReader(fh))
        cells = [(int(r["col"]), int(r["row"])) for r in rows]
        pts = [(float(r["x"]), float(r["y"])) for r in rows]
        return cls(cells, int(kv["straight"]), int(kv["diagonal"]), float(kv["cellsize"]), pts)


def path_cost(n_straight: int, n_diagonal: int, cellsize: float) -> float:
    return (n_straight + n_diagonal * SQRT2) * cellsize


_MOVES = [(1, 0), (-1, 0), (0, 1), (0, -1), (1, 1), (1, -1), (-1, 1), (-1, -1)]


def _octile(c, goal) -> float:
    dx = abs(c[0] - goal[0])
    dy = abs(c[1] - goal[1])
    return (max(dx, dy) - min(dx, dy)) + SQRT2 * min(dx, dy)


def neighbors(grid: OccupancyGrid, cell):
    """8-connected free neighbours; a diagonal needs both orthogonal cells free."""
    c, r = cell
    for dc, dr in _MOVES:
        nc, nr = c + dc, r + dr
        if not grid.is_free(nc, nr):
            continue
        if dc and dr and not (grid.is_free(c + dc, r) and grid.is_free(c, r + dr)):
            continue
        yield (nc, nr), bool(dc and dr)


def astar(grid: OccupancyGrid, start, goal) -> GridPath:
    """Minimum-cost 8-connected path from ``start`` to ``goal`` cells ``(col, row)``."""
    start = tuple(start)
    goal = tuple(goal)
    for name, cell in (("start", start), ("goal", goal)):
        if not grid.in_bounds(*cell):
            raise InvalidEndpoint(f"{name} cell {cell} is outside the grid")
        if grid.cells[cell[1], cell[0]] != FREE:
            raise InvalidEndpoint(f"{name} cell {cell} is not free")
    # g kept as exact (straight, diagonal) step counts; floats only order the heap
    g = {start: (0, 0)}
    parent = {start: None}
    closed = set()
    heap = [(_octile(start, goal), 0.0, start[1], start[0], start)]
    while heap:
        _, neg_g, _, _, cur = heapq.heappop(heap)
        if cur in closed:
            continue
        closed.add(cur)
        if cur == goal:
            break
        a, b = g[cur]
        for nb, diag in neighbors(grid, cur):
            if nb in closed:
                continue
            cand = (a, b + 1) if diag else (a + 1, b)
            gv = cand[0] + SQRT2 * cand[1]
            old = g.get(nb)
            if old is None or gv < old[0] + SQRT2 * old[1] - 1e-12:
                g[nb] = cand
                parent[nb] = cur
                heapq.heappush(heap, (gv + _octile(nb, goal), -gv, nb[1], nb[0], nb))
    if goal not in closed:
        raise NoPath(f"no path from {start} to {goal}")
    cells = []
    c = goal
    while c is not None:
        cells.append(c)
        c = parent[c]
    cells.reverse()
    ns, nd = g[goal]
    return GridPath(cells, ns, nd, grid.cellsize, [grid.grid_to_world(*c) for c in cells])


# path -> reference trajectory


def line_of_sight(grid: OccupancyGrid, a, b) -> bool:
    """True when every cell the segment between two cell centers touches is free."""
    for col, row in supercover_cells(a[0] + 0.5, a[1] + 0.5, b[0] + 0.5, b[1] + 0.5):
        if not grid.is_free(col, row):
            return False
    return True


def simplify(cells, grid: OccupancyGrid | None = None) -> list[tuple[int, int]]:
    """Drop collinear cells, then (with a grid) string-pull over free line of sight."""
    if len(cells) <= 2:
        return list(cells)
    out = [cells[0]]
    for prev, cur, nxt in zip(cells, cells[1:], cells[2:]):
        if (cur[0] - prev[0], cur[1] - prev[1]) != (nxt[0] - cur[0], nxt[1] - cur[1]):
            out.append(cur)
    out.append(cells[-1])
    if grid is None:
        return out
    pulled = [out[0]]
    i = 0
    while i < len(out) - 1:
        j = len(out) - 1
        while j > i + 1 and not line_of_sight(grid, out[i], out[j]):
            j -= 1
        pulled.append(out[j])
        i = j
    return pulled


@dataclass
class _Piece:
    kind: str  # "line" | "arc"
    length: float
    speed: float
    x0: float
    y0: float
    heading0: float
    radius: float = 0.0
    turn: float = 0.0  # +1 left, -1 right

    @property
    def omega(self) -> float:
        return self.turn * self.speed / self.radius if self.kind == "arc" else 0.0

    def at(self, s: float):
        h0 = self.heading0
        if self.kind == "line":
            return self.x0 + s * math.cos(h0), self.y0 + s * math.sin(h0), h0
        phi = self.turn * s / self.radius
        # arc center sits to the left (turn=+1) or right of the start heading
        cx = self.x0 - self.turn * self.radius * math.sin(h0)
        cy = self.y0 + self.turn * self.radius * math.cos(h0)
        h = h0 + phi
        return (cx + self.turn * self.radius * math.sin(h),
                cy - self.turn * self.radius * math.cos(h), h)


def build_pieces(points, v_cruise: float, omega_max: float | None, arc_radius: float) -> list[_Piece]:
    """Lines joined by tangent arcs at every interior vertex of a polyline."""
    P = [np.asarray(p, dtype=float) for p in points]
    n = len(P)
    seg_len = [float(np.hypot(*(P[i + 1] - P[i]))) for i in range(n - 1)]
    head = [math.atan2(*(P[i + 1] - P[i])[::-1]) for i in range(n - 1)]
    tangent = [0.0] * n
    radius = [0.0] * n
    turn = [0.0] * n
    for i in range(1, n - 1):
        d = wrap_angle(head[i] - head[i - 1])
        if abs(d) < 1e-9:
            continue
        half = math.tan(abs(d) / 2)
        room_in = seg_len[i - 1] if i == 1 else seg_len[i - 1] / 2
        room_out = seg_len[i] if i == n - 2 else seg_len[i] / 2
        r = min(arc_radius, min(room_in, room_out) / half)
        radius[i] = r
        tangent[i] = r * half
        turn[i] = d
    pieces = []
    for i in range(n - 1):
        L = seg_len[i] - tangent[i] - tangent[i + 1]
        start = P[i] + tangent[i] * np.array([math.cos(head[i]), math.sin(head[i])])
        if L > 1e-12:
            pieces.append(_Piece("line", L, v_cruise, float(start[0]), float(start[1]), head[i]))
        j = i + 1
        if j < n - 1 and radius[j] > 0:
            r = radius[j]
            v = v_cruise if omega_max is None else min(v_cruise, omega_max * r)
            a = P[j] - tangent[j] * np.array([math.cos(head[i]), math.sin(head[i])])
            pieces.append(_Piece("arc", r * abs(turn[j]), v, float(a[0]), float(a[1]), head[i],
                                 radius=r, turn=math.copysign(1.0, turn[j])))
    return pieces


@dataclass
class ReferenceTrajectory:
    t: np.ndarray
    x: np.ndarray
    y: np.ndarray
    theta: np.ndarray
    v: np.ndarray
    omega: np.ndarray

    def __post_init__(self):
        for f in ("t", "x", "y", "theta", "v", "omega"):
            setattr(self, f, np.asarray(getattr(self, f), dtype=float))
        if len(self.t) > 1 and np.any(np.diff(self.t) <= 0):
            raise ValueError("trajectory times must be strictly increasing")

    def __len__(self):
        return len(self.t)

    @property
    def duration(self) -> float:
        return float(self.t[-1] - self.t[0])

    def arc_length(self) -> np.ndarray:
        return np.concatenate([[0.0], np.cumsum(np.hypot(np.diff(self.x), np.diff(self.y)))])

    def at(self, t: float):
        """Linearly interpolated ``(x, y, theta, v, omega)``; clamps outside the time span."""
        if t <= self.t[0]:
            i, f = 0, 0.0
        elif t >= self.t[-1]:
            i, f = len(self.t) - 2, 1.0
        else:
            i = int(np.searchsorted(self.t, t, side="right")) - 1
            f = (t - self.t[i]) / (self.t[i + 1] - self.t[i])
        if len(self.t) == 1:
            return (self.x[0], self.y[0], self.theta[0], self.v[0], self.omega[0])
        j = i + 1
        lerp = lambda a: float(a[i] + f * (a[j] - a[i]))  # noqa: E731
        dth = wrap_angle(self.theta[j] - self.theta[i])
        return (lerp(self.x), lerp(self.y), wrap_angle(self.theta[i] + f * dth),
                lerp(self.v), lerp(self.omega))

    def write_csv(self, fh: TextIO) -> None:
        fh.write("t,x,y,theta,v,omega\n")
        for row in zip(self.t, self.x, self.y, self.theta, self.v, self.omega):
            fh.write(",".join(f"{v:.9g}" for v in row) + "\n")

    def dumps(self) -> str:
        buf = io.StringIO()
        self.write_csv(buf)
        return buf.getvalue()

    @classmethod
    def read_csv(cls, fh: TextIO) -> "ReferenceTrajectory":
        rows = list(csv.DictReader(fh))
        cols = {k: [float(r[k]) for r in rows] for k in ("t", "x", "y", "theta", "v", "omega")}
        return cls(**cols)


def path_to_trajectory(
    path: GridPath | list,
    v_cruise: float = V_CRUISE,
    omega_max: float | None = OMEGA_MAX,
    dt: float = TRAJECTORY_DT,
    arc_radius: float | None = None,
    grid: OccupancyGrid | None = None,
) -> ReferenceTrajectory:
    """Timed reference along a grid path with arc-rounded corners.

    ``path`` is a :class:`GridPath` or a list of world waypoints. With a
    ``grid`` the cell path is first string-pulled over free line of sight.
    ``arc_radius`` defaults to two cells (or 0.8 m for bare waypoints);
    short legs shrink it. Arc speed is capped so ``|omega| <= omega_max``.
    """
    if not v_cruise > 0:
        raise ValueError("v_cruise must be > 0")
    if isinstance(path, GridPath):
        cells = simplify(path.cells, grid)
        cs = path.cellsize
        lookup = dict(zip(path.cells, path.waypoints))
        if grid is not None:
            pts = [grid.grid_to_world(*c) for c in cells]
        else:
            pts = [lookup[c] for c in cells]
        if arc_radius is None:
            arc_radius = 2.0 * cs
    else:
        pts = [tuple(map(float, p)) for p in path]
        if arc_radius is None:
            arc_radius = 0.8
    if len(pts) < 2 or all(p == pts[0] for p in pts):
        raise StationaryGoal("path has a single cell; nothing to track")
    pieces = build_pieces(pts, v_cruise, omega_max, arc_radius)
    durations = np.array([p.length / p.speed for p in pieces])
    t_start = np.concatenate([[0.0], np.cumsum(durations)])
    total = float(t_start[-1])
    n = int(math.floor(total / dt + 1e-9))
    ts = [i * dt for i in range(n + 1)]
    if total - ts[-1] > 1e-9:
        ts.append(total)
    rows = []
    for t in ts:
        k = int(np.searchsorted(t_start, t, side="right")) - 1
        k = min(max(k, 0), len(pieces) - 1)
        pc = pieces[k]
        s = min(pc.length, pc.speed * (t - t_start[k]))
        x, y, h = pc.at(s)
        rows.append((t, x, y, wrap_angle(h), pc.speed, pc.omega))
    arr = np.array(rows)
    return ReferenceTrajectory(*arr.T)
