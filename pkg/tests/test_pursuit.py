import math

import numpy as np
import pytest

from lanelab.pursuit import (
    PurePursuitConfig,
    bicycle_step,
    find_lookahead_point,
    lookahead_distance,
    pure_pursuit_steering,
    track_trajectory,
)
from lanelab.trajectory import BoundaryState, plan_lane_change, solve_quintic
from lanelab.world import LaneGeometry, Vehicle

CFG = PurePursuitConfig()
GEOM = LaneGeometry()


def straight_traj(v=10.0, duration=8.0):
    return solve_quintic(BoundaryState(0, v, 0, 0, 0, 0),
                         BoundaryState(v * duration, v, 0, 0, 0, 0), 0.0, duration)


def test_lookahead_on_straight_line():
    traj = straight_traj()
    wp = find_lookahead_point(traj, (20.0, 0.0, 0.0), 10.0)
    assert wp[0] == pytest.approx(30.0, abs=0.11)
    assert wp[1] == pytest.approx(0.0, abs=1e-9)


def test_lookahead_saturates_at_endpoint():
    traj = straight_traj()
    wp = find_lookahead_point(traj, (80.0, 0.0, 0.0), 10.0)
    assert wp == pytest.approx((80.0, 0.0))


def test_lookahead_offset_pose_against_bruteforce():
    traj = straight_traj()
    pose = (20.0, 1.0, 0.0)
    got = find_lookahead_point(traj, pose, 10.0)
    # brute force over the same dense sample set
    ts = np.arange(0.0, 8.0 + 0.005, 0.01)
    ts[-1] = 8.0
    xs, ys = 10.0 * ts, np.zeros_like(ts)
    d = np.hypot(xs - pose[0], ys - pose[1])
    start = int(np.argmin(d))
    idx = start + int(np.argmax(d[start:] >= 10.0))
    assert got == pytest.approx((float(xs[idx]), float(ys[idx])), abs=1e-9)
    dist = math.hypot(got[0] - pose[0], got[1] - pose[1])
    assert 10.0 <= dist <= 10.0 + 0.1


def test_steering_zero_for_dead_ahead_waypoint():
    assert pure_pursuit_steering((0, 0, 0), (10, 0), CFG, 10.0) == 0.0


def test_steering_known_angle():
    alpha = math.pi / 6
    wp = (10 * math.cos(alpha), 10 * math.sin(alpha))
    got = pure_pursuit_steering((0, 0, 0), wp, CFG, 10.0)
    assert got == pytest.approx(math.atan(2 * 2.7 * math.sin(alpha) / 10.0), abs=1e-12)
    assert got == pytest.approx(0.2636, abs=1e-3)


def test_steering_vanishes_with_growing_lookahead():
    alpha = 0.4
    prev = None
    for l_d in (5.0, 10.0, 50.0, 500.0, 5e4):
        wp = (l_d * math.cos(alpha), l_d * math.sin(alpha))
        steer = pure_pursuit_steering((0, 0, 0), wp, CFG, l_d)
        if prev is not None:
            assert steer < prev
        prev = steer
    assert prev < 1e-3


def test_steering_stays_within_limit():
    rng = np.random.default_rng(5)
    for _ in range(500):
        pose = (float(rng.uniform(-10, 10)), float(rng.uniform(-10, 10)), float(rng.uniform(-3, 3)))
        wp = (float(rng.uniform(-10, 10)), float(rng.uniform(-10, 10)))
        steer = pure_pursuit_steering(pose, wp, CFG, float(rng.uniform(0.5, 20.0)))
        assert abs(steer) <= CFG.steer_limit


def test_bicycle_straight_line():
    pose, v = bicycle_step((0.0, 0.0, 0.0), 10.0, 0.0, 0.0, 2.7, 0.1)
    assert pose == pytest.approx((1.0, 0.0, 0.0))
    assert v == 10.0


def test_bicycle_speed_floor():
    _, v = bicycle_step((0, 0, 0), 10.0, -20.0, 0.0, 2.7, 0.1)
    assert v == pytest.approx(8.0)
    _, v = bicycle_step((0, 0, 0), 10.0, -200.0, 0.0, 2.7, 0.1)
    assert v == 0.0


def _fit_circle_radius(xs, ys):
    # least squares circle: x^2 + y^2 = 2 a x + 2 b y + c
    A = np.column_stack([2 * xs, 2 * ys, np.ones_like(xs)])
    b = xs**2 + ys**2
    (a, bb, c), *_ = np.linalg.lstsq(A, b, rcond=None)
    return math.sqrt(c + a * a + bb * bb)


def test_bicycle_constant_steer_traces_circle():
    steer, v, L = 0.3, 10.0, 2.7
    pose = (0.0, 0.0, 0.0)
    xs, ys = [], []
    for _ in range(400):
        pose, v = bicycle_step(pose, v, 0.0, steer, L, 0.1)
        xs.append(pose[0])
        ys.append(pose[1])
    radius = _fit_circle_radius(np.array(xs), np.array(ys))
    assert radius == pytest.approx(L / math.tan(steer), rel=0.01)


def test_lookahead_law():
    assert lookahead_distance(20.0, CFG) == 10.0
    assert lookahead_distance(1.0, CFG) == 3.0  # floor


def _ego(v, y=1.875, lane=0):
    return Vehicle(0, 200.0, y, 0.0, v, 0.0, 5.0, 1.8, lane, "ego")


@pytest.mark.parametrize("v,duration", [(15.0, 5.0), (20.0, 5.0), (25.0, 4.5), (33.0, 6.0)])
def test_tracking_closure(v, duration):
    traj = plan_lane_change(_ego(v), 1, duration, GEOM)
    result = track_trajectory(traj, (200.0, 1.875, 0.0), v, CFG, dt=0.1)
    lat_err = abs(result.ys[-1] - GEOM.lane_center(1))
    assert lat_err < 0.15
    assert abs(result.headings[-1]) < math.radians(2.0)
    assert np.max(np.abs(result.steers)) <= CFG.steer_limit


def test_tracking_back_to_first_lane():
    traj = plan_lane_change(_ego(22.0, y=GEOM.lane_center(1), lane=1), 0, 5.0, GEOM)
    result = track_trajectory(traj, (200.0, GEOM.lane_center(1), 0.0), 22.0, CFG, dt=0.1)
    assert abs(result.ys[-1] - GEOM.lane_center(0)) < 0.15
