import numpy as np
import pytest

from lanelab.errors import ConfigError
from lanelab.rewards import (
    AdjustRewardParams,
    DecisionRewardParams,
    car_following_reward,
    decision_reward,
    desired_distance_ego,
    desired_distance_target,
    gap_adjust_reward,
    measure_gap,
)
from lanelab.world import DecisionState

DP = DecisionRewardParams()
AP = AdjustRewardParams()


def obs(dx_leader=200.0, dx_target=200.0, dx_follow=200.0,
        dv_leader=0.0, dv_target=0.0, v_ego=20.0, a_ego=0.0):
    return DecisionState(dx_leader, dx_target, dx_follow, dv_leader, dv_target, v_ego, a_ego)


# --------------------------------------------------------- desired distances

def test_desired_distance_ego_at_standstill():
    assert desired_distance_ego(0.0, DP) == DP.dt_safe == 2.0


def test_desired_distance_ego_known_value():
    got = desired_distance_ego(20.0, DecisionRewardParams(tau=1.0, a_cap=3.0, dt_safe=2.0))
    assert got == pytest.approx(20.0 + 400.0 / 6.0 + 2.0, abs=1e-12)
    assert got == pytest.approx(88.667, abs=1e-3)


def test_desired_distance_ego_strictly_increasing():
    speeds = np.linspace(0, 40, 81)
    values = [desired_distance_ego(float(v), DP) for v in speeds]
    assert all(b > a for a, b in zip(values, values[1:]))


def test_desired_distance_target_known_value():
    p = DecisionRewardParams(t_lc=5.0, tau=1.0, d0=2.0)
    got = desired_distance_target(20.0, 25.0, 15.0, p)
    assert got == pytest.approx(122.0, abs=1e-12)


def test_desired_distance_target_zeroes():
    assert desired_distance_target(0.0, 0.0, 0.0, DP) == DP.d0


def test_desired_distance_target_linear_in_target_speed():
    base = desired_distance_target(20.0, 25.0, 15.0, DP)
    bumped = desired_distance_target(20.0, 25.0 + 3.0, 15.0, DP)
    assert bumped - base == pytest.approx(DP.tau * 3.0, abs=1e-12)


# --------------------------------------------------------- decision reward

def test_decision_stay_at_desired_gap_is_zero():
    s = obs(dx_leader=desired_distance_ego(20.0, DP), dv_leader=0.0)
    gap = measure_gap(s, 5.0, DP)
    assert decision_reward(s, 0, gap, False, DP) == 0.0


def test_decision_change_with_ample_gap_is_zero():
    s = obs(dx_target=30.0, dx_follow=400.0, dv_target=0.0)
    gap = measure_gap(s, 5.0, DP)
    assert gap.d_gap >= gap.d_target
    assert decision_reward(s, 1, gap, False, DP) == 0.0


def test_decision_stay_known_value():
    p = DecisionRewardParams(w1=-0.05, w2=-0.1)
    s = obs(dx_leader=desired_distance_ego(20.0, p) - 10.0, dv_leader=5.0)
    gap = measure_gap(s, 5.0, p)
    assert decision_reward(s, 0, gap, False, p) == pytest.approx(-1.0, abs=1e-12)


def test_decision_collision_branch():
    s = obs()
    gap = measure_gap(s, 5.0, DP)
    assert decision_reward(s, 0, gap, True, DP) == DP.collision_penalty == -100.0
    assert decision_reward(s, 1, gap, True, DP) == -100.0


def test_decision_stay_ignores_target_lane():
    a = obs(dx_leader=40.0, dv_leader=2.0, dx_target=10.0, dx_follow=3.0, dv_target=9.0)
    b = obs(dx_leader=40.0, dv_leader=2.0, dx_target=180.0, dx_follow=70.0, dv_target=-9.0)
    assert decision_reward(a, 0, measure_gap(a, 5.0, DP), False, DP) == \
        decision_reward(b, 0, measure_gap(b, 5.0, DP), False, DP)


def test_decision_change_ignores_ego_leader():
    a = obs(dx_leader=5.0, dv_leader=9.0, dx_target=50.0, dx_follow=20.0, dv_target=1.0)
    b = obs(dx_leader=190.0, dv_leader=-9.0, dx_target=50.0, dx_follow=20.0, dv_target=1.0)
    assert decision_reward(a, 1, measure_gap(a, 5.0, DP), False, DP) == \
        decision_reward(b, 1, measure_gap(b, 5.0, DP), False, DP)


def test_decision_nonpositive_outside_collision():
    rng = np.random.default_rng(0)
    for _ in range(200):
        s = obs(dx_leader=float(rng.uniform(0, 200)), dx_target=float(rng.uniform(0, 200)),
                dx_follow=float(rng.uniform(-20, 200)), dv_leader=float(rng.uniform(-18, 18)),
                dv_target=float(rng.uniform(-18, 18)), v_ego=float(rng.uniform(0, 38)))
        gap = measure_gap(s, 5.0, DP)
        assert decision_reward(s, 0, gap, False, DP) <= 0.0
        assert decision_reward(s, 1, gap, False, DP) <= 0.0
        # the collision branch is worse than any shaped reward here
        assert decision_reward(s, 0, gap, True, DP) == -100.0


def test_measure_gap_geometry():
    s = obs(dx_target=30.0, dx_follow=15.0)
    gap = measure_gap(s, 5.0, DP)
    assert gap.d_gap == pytest.approx(50.0)
    assert gap.d_ego == desired_distance_ego(s.v_ego, DP)
    assert gap.d_target == desired_distance_target(s.v_ego, s.v_ego - s.dv_target, s.dx_target, DP)


# --------------------------------------------------------- car following

def test_car_following_maximum_on_manifold():
    d_ego = 40.0
    assert car_following_reward(140.0, 100.0, 22.0, 22.0, d_ego, AP) == 0.0


def test_car_following_known_value():
    p = AdjustRewardParams(w_dis=0.05, w_dv=0.1)
    got = car_following_reward(150.0, 100.0, 25.0, 20.0, 40.0, p)
    assert got == pytest.approx(-0.05 * 10.0 - 0.1 * 5.0, abs=1e-12)
    assert got == pytest.approx(-1.0)


def test_car_following_nonpositive():
    rng = np.random.default_rng(1)
    for _ in range(200):
        r = car_following_reward(float(rng.uniform(0, 300)), float(rng.uniform(0, 300)),
                                 float(rng.uniform(0, 38)), float(rng.uniform(0, 38)),
                                 float(rng.uniform(2, 120)), AP)
        assert r <= 0.0


def test_car_following_maximized_exactly_on_manifold():
    rng = np.random.default_rng(2)
    for _ in range(100):
        d_ego = float(rng.uniform(5, 100))
        v = float(rng.uniform(5, 35))
        at_opt = car_following_reward(100.0 + d_ego, 100.0, v, v, d_ego, AP)
        off = car_following_reward(100.0 + d_ego + 1.0, 100.0, v, v + 0.5, d_ego, AP)
        assert at_opt == pytest.approx(0.0, abs=1e-12) and off < -0.09


# --------------------------------------------------------- gap adjustment

def test_gap_adjust_zero_at_slot():
    s = obs(dx_leader=45.0, dx_target=60.0, dx_follow=45.0, dv_leader=0.0, dv_target=-3.0, v_ego=20.0)
    # slower front vehicle is the ego-lane leader at 20.0
    assert gap_adjust_reward(s, 20.0, 23.0, AP) == 0.0


def test_gap_adjust_known_value():
    p = AdjustRewardParams(w_dis=0.05, w_dv=0.1)
    s = obs(dx_leader=60.0, dx_target=45.0, dx_follow=25.0, v_ego=20.0)
    got = gap_adjust_reward(s, 20.0, 20.0, p)
    assert got == pytest.approx(-0.05 * 20.0, abs=1e-12)
    assert got == pytest.approx(-1.0)


def test_gap_adjust_symmetric_in_front_gaps():
    a = obs(dx_leader=60.0, dx_target=45.0, dx_follow=25.0, v_ego=20.0)
    b = obs(dx_leader=45.0, dx_target=60.0, dx_follow=25.0, v_ego=20.0)
    assert gap_adjust_reward(a, 21.0, 24.0, AP) == gap_adjust_reward(b, 24.0, 21.0, AP)


def test_gap_adjust_nonpositive():
    rng = np.random.default_rng(3)
    for _ in range(200):
        s = obs(dx_leader=float(rng.uniform(0, 200)), dx_target=float(rng.uniform(0, 200)),
                dx_follow=float(rng.uniform(-20, 200)), v_ego=float(rng.uniform(0, 38)))
        assert gap_adjust_reward(s, float(rng.uniform(0, 38)), float(rng.uniform(0, 38)), AP) <= 0.0


def test_parameter_validation():
    with pytest.raises(ConfigError):
        DecisionRewardParams(w1=0.05)
    with pytest.raises(ConfigError):
        DecisionRewardParams(tau=-1.0)
    with pytest.raises(ConfigError):
        DecisionRewardParams(collision_penalty=10.0)
    with pytest.raises(ConfigError):
        AdjustRewardParams(w_dis=0.0)
