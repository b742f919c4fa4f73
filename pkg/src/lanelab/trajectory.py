"""Quintic reference trajectories for lane-change execution.

Both channels of a trajectory are degree-five polynomials of time fit to
position/velocity/acceleration boundary conditions at the start and end of
the maneuver window.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import TYPE_CHECKING, NamedTuple

import numpy as np

from .errors import PlanningError

if TYPE_CHECKING:
    from .world import LaneGeometry, Vehicle

# Below this window the boundary system is too ill-conditioned to trust.
MIN_WINDOW = 0.5


@dataclass(frozen=True)
class BoundaryState:
    """Position, velocity and acceleration of both channels at one instant."""

    x: float
    vx: float
    ax: float
    y: float
    vy: float
    ay: float


@dataclass(frozen=True)
class QuinticTrajectory:
    """Twelve polynomial coefficients (high power first) plus the time window."""

    ax_coeffs: tuple[float, ...]  # a5..a0 for x(t)
    ay_coeffs: tuple[float, ...]  # b5..b0 for y(t)
    t_i: float
    t_t: float


class TrajectoryPoint(NamedTuple):
    x: float
    y: float
    vx: float
    vy: float
    ax: float
    ay: float
    clamped: bool


def _time_matrix(t_i: float, t_t: float) -> np.ndarray:
    """6x6 boundary matrix: rows are pos/vel/acc at t_i then at t_t."""
    rows = []
    for t in (t_i, t_t):
        rows.append([t**5, t**4, t**3, t**2, t, 1.0])
        rows.append([5 * t**4, 4 * t**3, 3 * t**2, 2 * t, 1.0, 0.0])
        rows.append([20 * t**3, 12 * t**2, 6 * t, 2.0, 0.0, 0.0])
    return np.array(rows, dtype=float)


def solve_quintic(initial: BoundaryState, terminal: BoundaryState, t_i: float, t_t: float) -> QuinticTrajectory:
    """Fit the quintic coefficients to the given boundary states.

    Raises PlanningError when the window is shorter than MIN_WINDOW or the
    solve fails to reproduce the boundary vector.
    """
    if t_t - t_i < MIN_WINDOW:
        raise PlanningError(f"window {t_t - t_i:.3f}s below {MIN_WINDOW}s, system near-singular")
    T = _time_matrix(t_i, t_t)
    bx = np.array([initial.x, initial.vx, initial.ax, terminal.x, terminal.vx, terminal.ax])
    by = np.array([initial.y, initial.vy, initial.ay, terminal.y, terminal.vy, terminal.ay])
    cx = np.linalg.solve(T, bx)
    cy = np.linalg.solve(T, by)
    for c, b in ((cx, bx), (cy, by)):
        residual = np.max(np.abs(T @ c - b))
        if residual > 1e-9 * max(1.0, float(np.max(np.abs(b)))):
            raise PlanningError(f"boundary residual {residual:.3e} too large")
    return QuinticTrajectory(tuple(cx), tuple(cy), float(t_i), float(t_t))


def eval_trajectory(traj: QuinticTrajectory, t: float) -> TrajectoryPoint:
    """Evaluate position, velocity and acceleration at time t.

    Times outside [t_i, t_t] are clamped to the nearest endpoint and the
    returned point is flagged as clamped.
    """
    clamped = t < traj.t_i or t > traj.t_t
    t = min(max(t, traj.t_i), traj.t_t)
    cx = np.asarray(traj.ax_coeffs)
    cy = np.asarray(traj.ay_coeffs)
    vx_c, vy_c = np.polyder(cx), np.polyder(cy)
    ax_c, ay_c = np.polyder(vx_c), np.polyder(vy_c)
    return TrajectoryPoint(
        float(np.polyval(cx, t)),
        float(np.polyval(cy, t)),
        float(np.polyval(vx_c, t)),
        float(np.polyval(vy_c, t)),
        float(np.polyval(ax_c, t)),
        float(np.polyval(ay_c, t)),
        clamped,
    )


def sample_trajectory(traj: QuinticTrajectory, step: float) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Dense (t, x, y) samples over the whole window, step seconds apart."""
    ts = np.arange(traj.t_i, traj.t_t + step / 2.0, step)
    ts[-1] = traj.t_t
    xs = np.polyval(np.asarray(traj.ax_coeffs), ts)
    ys = np.polyval(np.asarray(traj.ay_coeffs), ts)
    return ts, xs, ys


PLAN_HEADER = "t,x,y,vx,vy,ax,ay"


def export_plan_csv(path, traj: QuinticTrajectory, step: float = 0.1) -> None:
    """Write the planned trajectory as a CSV time series."""
    n = int(round((traj.t_t - traj.t_i) / step))
    lines = [PLAN_HEADER]
    for k in range(n + 1):
        t = min(traj.t_i + k * step, traj.t_t)
        p = eval_trajectory(traj, t)
        lines.append(",".join(repr(float(v)) for v in (t, p.x, p.y, p.vx, p.vy, p.ax, p.ay)))
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def plan_lane_change(ego: Vehicle, target_lane: int, duration: float, geometry: LaneGeometry) -> QuinticTrajectory:
    """Plan a lane change from the ego's current state into target_lane.

    Longitudinally the plan holds the current speed (ending at zero
    acceleration); laterally it moves to the target lane center, arriving
    with zero lateral speed and acceleration. The time axis is relative:
    the plan runs from 0 to duration.
    """
    if ego.v <= 0.0:
        raise PlanningError("cannot plan a lane change at standstill")
    if not 0 <= target_lane < geometry.lane_count:
        raise PlanningError(f"target lane {target_lane} outside road")
    if abs(target_lane - ego.lane) != 1:
        raise PlanningError(f"target lane {target_lane} not adjacent to lane {ego.lane}")
    initial = BoundaryState(
        x=ego.x,
        vx=ego.v * math.cos(ego.heading),
        ax=ego.a,
        y=ego.y,
        vy=ego.v * math.sin(ego.heading),
        ay=0.0,
    )
    terminal = BoundaryState(
        x=ego.x + ego.v * duration,
        vx=ego.v,
        ax=0.0,
        y=geometry.lane_center(target_lane),
        vy=0.0,
        ay=0.0,
    )
    return solve_quintic(initial, terminal, 0.0, duration)
