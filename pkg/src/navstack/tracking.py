"""Kinematic trajectory-tracking controller for a differential-drive robot.

Tracking error is expressed in the robot frame and the feedback law

    v = v_ref cos(e3) + k1 e1
    w = w_ref + k3 e3 + v_ref e2 sin(e3)/e3

makes V = (e1^2 + e2^2 + e3^2)/2 decrease at rate -k1 e1^2 - k3 e3^2.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass, field
from typing import Callable, TextIO

import numpy as np

from navstack.geometry import Pose, wrap_angle

V_LIMIT = 0.5
OMEGA_LIMIT = math.radians(25.0)


@dataclass(frozen=True)
class RobotParams:
    wheel_radius: float = 0.1
    half_axle: float = 0.25
    body_diameter: float = 0.8
    body_height: float = 1.2

    def __post_init__(self):
        for name in ("wheel_radius", "half_axle", "body_diameter", "body_height"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be > 0")

    @property
    def body_radius(self) -> float:
        return self.body_diameter / 2


@dataclass(frozen=True)
class Gains:
    k1: float = 1.0
    k3: float = 0.4

    def __post_init__(self):
        if not (self.k1 > 0 and self.k3 > 0):
            raise ValueError("gains k1, k3 must be > 0")


@dataclass(frozen=True)
class TrackingError:
    e1: float
    e2: float
    e3: float

    def as_array(self) -> np.ndarray:
        return np.array([self.e1, self.e2, self.e3])

    def norm(self) -> float:
        return math.sqrt(self.e1**2 + self.e2**2 + self.e3**2)


def wheel_speeds(v: float, omega: float, params: RobotParams) -> tuple[float, float]:
    """Right and left wheel angular speeds (rad/s) for body command ``(v, omega)``."""
    if not (math.isfinite(v) and math.isfinite(omega)):
        raise ValueError("non-finite command")
    r, R = params.wheel_radius, params.half_axle
    return ((v + R * omega) / r, (v - R * omega) / r)


def tracking_error(q_ref: Pose, q: Pose) -> TrackingError:
    dx = q_ref.x - q.x
    dy = q_ref.y - q.y
    c, s = math.cos(q.theta), math.sin(q.theta)
    return TrackingError(c * dx + s * dy, -s * dx + c * dy, wrap_angle(q_ref.theta - q.theta))


def sinc(x: float) -> float:
    """sin(x)/x with the removable singularity filled in."""
    if abs(x) < 1e-4:
        x2 = x * x
        return 1.0 - x2 / 6.0 + x2 * x2 / 120.0
    return math.sin(x) / x


def control(e: TrackingError, v_ref: float, omega_ref: float, gains: Gains) -> tuple[float, float]:
    v = v_ref * math.cos(e.e3) + gains.k1 * e.e1
    w = omega_ref + gains.k3 * e.e3 + v_ref * e.e2 * sinc(e.e3)
    return v, w


def saturate(v: float, w: float, v_max: float = V_LIMIT, w_max: float = OMEGA_LIMIT):
    return (min(max(v, -v_max), v_max), min(max(w, -w_max), w_max))


def lyapunov(e: TrackingError) -> float:
    return 0.5 * (e.e1**2 + e.e2**2 + e.e3**2)


def lyapunov_rate(e: TrackingError, gains: Gains) -> float:
    """Closed-loop dV/dt of the unsaturated law."""
    return -gains.k1 * e.e1**2 - gains.k3 * e.e3**2


def error_rates(e: TrackingError, v: float, w: float, v_ref: float, w_ref: float) -> np.ndarray:
    """Time derivative of the robot-frame tracking error."""
    return np.array([
        w * e.e2 - v + v_ref * math.cos(e.e3),
        -w * e.e1 + v_ref * math.sin(e.e3),
        w_ref - w,
    ])


def unicycle_step(pose: Pose, v: float, w: float, dt: float) -> Pose:
    """Exact integration of the unicycle under constant ``(v, w)``."""
    th = pose.theta
    if abs(w) < 1e-9:
        x = pose.x + v * dt * math.cos(th)
        y = pose.y + v * dt * math.sin(th)
    else:
        th1 = th + w * dt
        x = pose.x + v / w * (math.sin(th1) - math.sin(th))
        y = pose.y - v / w * (math.cos(th1) - math.cos(th))
    return Pose(x, y, wrap_angle(th + w * dt))


# reference: t -> (x_r, y_r, theta_r, v_r, w_r)
Reference = Callable[[float], tuple]


def line_reference(x0: float, y0: float, heading: float, v: float) -> Reference:
    def ref(t):
        return (x0 + v * t * math.cos(heading), y0 + v * t * math.sin(heading), heading, v, 0.0)
    return ref


def circle_reference(cx: float, cy: float, radius: float, v: float, phase0: float = 0.0,
                     ccw: bool = True) -> Reference:
    """Constant-curvature reference on a circle of ``radius`` around ``(cx, cy)``."""
    w = (v / radius) * (1 if ccw else -1)

    def ref(t):
        ph = phase0 + w * t
        x = cx + radius * math.cos(ph)
        y = cy + radius * math.sin(ph)
        th = ph + (math.pi / 2 if ccw else -math.pi / 2)
        return (x, y, wrap_angle(th), v, w)
    return ref


@dataclass
class ClosedLoopState:
    t: float
    pose: Pose


def _closed_loop_rhs(t, s, reference, gains, limits):
    x, y, th = s
    xr, yr, thr, vr, wr = reference(t)
    e = tracking_error(Pose(xr, yr, thr), Pose(x, y, th))
    v, w = control(e, vr, wr, gains)
    if limits is not None:
        v, w = saturate(v, w, *limits)
    return np.array([v * math.cos(th), v * math.sin(th), w])


def closed_loop_step(
    state: ClosedLoopState,
    reference: Reference,
    dt: float,
    gains: Gains = Gains(),
    limits: tuple[float, float] | None = None,
) -> ClosedLoopState:
    """Advance the continuous closed loop one RK4 step; the law is re-evaluated in every stage."""
    if not dt > 0:
        raise ValueError("dt must be > 0")
    t = state.t
    s = np.array([state.pose.x, state.pose.y, state.pose.theta])
    k1 = _closed_loop_rhs(t, s, reference, gains, limits)
    k2 = _closed_loop_rhs(t + dt / 2, s + dt / 2 * k1, reference, gains, limits)
    k3 = _closed_loop_rhs(t + dt / 2, s + dt / 2 * k2, reference, gains, limits)
    k4 = _closed_loop_rhs(t + dt, s + dt * k3, reference, gains, limits)
    s = s + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
    return ClosedLoopState(t + dt, Pose(float(s[0]), float(s[1]), float(s[2])))


LOG_COLUMNS = ("t", "x", "y", "theta", "x_r", "y_r", "theta_r", "e1", "e2", "e3", "v", "omega", "V_p")


@dataclass
class TrackingLog:
    rows: list[tuple] = field(default_factory=list)

    def record(self, t, pose: Pose, ref, e: TrackingError, v, w):
        self.rows.append((t, pose.x, pose.y, pose.theta, ref[0], ref[1], ref[2],
                          e.e1, e.e2, e.e3, v, w, lyapunov(e)))

    def column(self, name: str) -> np.ndarray:
        i = LOG_COLUMNS.index(name)
        return np.array([r[i] for r in self.rows])

    def write_csv(self, fh: TextIO) -> None:
        fh.write(",".join(LOG_COLUMNS) + "\n")
        for r in self.rows:
            fh.write(",".join(f"{v:.9g}" for v in r) + "\n")

    def dumps(self) -> str:
        buf = io.StringIO()
        self.write_csv(buf)
        return buf.getvalue()


def simulate_tracking(
    reference: Reference,
    initial: Pose,
    duration: float,
    dt: float = 0.01,
    gains: Gains = Gains(),
    limits: tuple[float, float] | None = None,
) -> TrackingLog:
    """Run the closed loop from ``initial`` and log every step (including t = 0)."""
    log = TrackingLog()
    st = ClosedLoopState(0.0, Pose(initial.x, initial.y, wrap_angle(initial.theta)))
    n = int(round(duration / dt))
    for i in range(n + 1):
        r = reference(st.t)
        e = tracking_error(Pose(r[0], r[1], r[2]), st.pose)
        v, w = control(e, r[3], r[4], gains)
        if limits is not None:
            v, w = saturate(v, w, *limits)
        log.record(st.t, st.pose, r, e, v, w)
        if i < n:
            nxt = closed_loop_step(st, reference, dt, gains, limits)
            st = ClosedLoopState((i + 1) * dt, Pose(nxt.pose.x, nxt.pose.y, wrap_angle(nxt.pose.theta)))
    return log
