"""Pure pursuit path tracking and the kinematic bicycle model."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import ConfigError
from .trajectory import QuinticTrajectory, eval_trajectory, sample_trajectory

Pose = tuple[float, float, float]  # x, y, heading

# Dense search step along the trajectory: one tenth of the control period.
SAMPLE_STEP = 0.01
# Proportional gain on the reference-speed error during execution.
SPEED_GAIN = 0.5


@dataclass(frozen=True)
class PurePursuitConfig:
    wheelbase: float = 2.7       # m
    lookahead_gain: float = 0.5  # s, look-ahead grows with speed
    lookahead_min: float = 3.0   # m
    steer_limit: float = 0.6     # rad

    def __post_init__(self) -> None:
        if min(self.wheelbase, self.lookahead_gain, self.lookahead_min, self.steer_limit) <= 0:
            raise ConfigError("pure pursuit parameters must be positive")
        if self.steer_limit >= math.pi / 2:
            raise ConfigError("steer limit must stay below pi/2")


def lookahead_distance(v: float, cfg: PurePursuitConfig) -> float:
    return max(cfg.lookahead_min, cfg.lookahead_gain * v)


def find_lookahead_point(traj: QuinticTrajectory, pose: Pose, l_d: float, sample_step: float = SAMPLE_STEP) -> tuple[float, float]:
    """Pick the pursuit target on the trajectory.

    The trajectory is sampled densely in time; starting from the sample
    nearest the pose, the first sample at least l_d away (straight-line
    distance, the chord of the pursuit circle) is returned. If no sample
    ahead is that far, the endpoint is returned.
    """
    if l_d <= 0.0:
        raise ValueError("look-ahead distance must be positive")
    _, xs, ys = sample_trajectory(traj, sample_step)
    px, py = pose[0], pose[1]
    d2 = (xs - px) ** 2 + (ys - py) ** 2
    start = int(np.argmin(d2))
    far = np.flatnonzero(d2[start:] >= l_d * l_d)
    idx = start + int(far[0]) if far.size else len(xs) - 1
    return float(xs[idx]), float(ys[idx])


def pure_pursuit_steering(pose: Pose, waypoint: tuple[float, float], cfg: PurePursuitConfig, l_d: float) -> float:
    """Front steering angle aiming the wheelbase at the waypoint."""
    if l_d <= 0.0:
        raise ValueError("look-ahead distance must be positive")
    x, y, heading = pose
    alpha = math.atan2(waypoint[1] - y, waypoint[0] - x) - heading
    alpha = math.atan2(math.sin(alpha), math.cos(alpha))
    steer = math.atan(2.0 * cfg.wheelbase * math.sin(alpha) / l_d)
    return min(cfg.steer_limit, max(-cfg.steer_limit, steer))


def bicycle_step(pose: Pose, v: float, accel: float, steer: float, L: float, dt: float) -> tuple[Pose, float]:
    """One kinematic bicycle update.

    Heading turns first, position advances with the current speed along the
    new heading, then speed integrates the acceleration (floored at zero).
    """
    if dt <= 0.0:
        raise ValueError("dt must be positive")
    x, y, heading = pose
    heading = heading + (v / L) * math.tan(steer) * dt
    x = x + v * math.cos(heading) * dt
    y = y + v * math.sin(heading) * dt
    v = max(0.0, v + accel * dt)
    return (x, y, heading), v


def pursuit_controls(traj: QuinticTrajectory, t: float, pose: Pose, v: float, cfg: PurePursuitConfig) -> tuple[float, float]:
    """Acceleration and steering commands for tracking traj at time t.

    Steering is pure pursuit toward the look-ahead point; acceleration is
    the trajectory's feedforward plus a proportional speed correction.
    """
    ref = eval_trajectory(traj, t)
    l_d = lookahead_distance(v, cfg)
    wp = find_lookahead_point(traj, pose, l_d)
    dist = math.hypot(wp[0] - pose[0], wp[1] - pose[1])
    steer = pure_pursuit_steering(pose, wp, cfg, max(dist, cfg.lookahead_min))
    v_ref = math.hypot(ref.vx, ref.vy)
    accel = ref.ax + SPEED_GAIN * (v_ref - v)
    return accel, steer


class TrackResult(NamedTuple):
    times: np.ndarray
    xs: np.ndarray
    ys: np.ndarray
    headings: np.ndarray
    speeds: np.ndarray
    steers: np.ndarray
    lat_accels: np.ndarray


def track_trajectory(traj: QuinticTrajectory, pose: Pose, v: float, cfg: PurePursuitConfig, dt: float = 0.1) -> TrackResult:
    """Closed-loop rollout of bicycle + pure pursuit over the whole window."""
    n = int(round((traj.t_t - traj.t_i) / dt))
    times, xs, ys, headings, speeds, steers, lats = [], [], [], [], [], [], []
    for k in range(n):
        t = traj.t_i + k * dt
        accel, steer = pursuit_controls(traj, t, pose, v, cfg)
        lat = v * v * math.tan(steer) / cfg.wheelbase
        pose, v = bicycle_step(pose, v, accel, steer, cfg.wheelbase, dt)
        times.append(t + dt)
        xs.append(pose[0])
        ys.append(pose[1])
        headings.append(pose[2])
        speeds.append(v)
        steers.append(steer)
        lats.append(lat)
    return TrackResult(*(np.array(a) for a in (times, xs, ys, headings, speeds, steers, lats)))
