"""Reward functions for the decision layer and both adjustment modules.

All weights enter with their sign: the decision weights are configured
negative so every deviation term is a penalty, and the adjustment weights
are positive magnitudes applied with explicit leading minus signs. Outside
the collision branch every reward here is <= 0, with 0 attained exactly on
the desired manifold.
"""
from __future__ import annotations

from dataclasses import dataclass

from .errors import ConfigError
from .world import DecisionState


@dataclass(frozen=True)
class DecisionRewardParams:
    w1: float = -0.05   # ego-lane gap deviation weight (stay branch)
    w2: float = -0.1    # ego-lane speed difference weight (stay branch)
    w3: float = -0.05   # target-gap shortfall weight (change branch)
    w4: float = -0.1    # target speed difference weight (change branch)
    tau: float = 1.0    # s, reaction time
    d0: float = 2.0     # m, minimum distance
    dt_safe: float = 2.0  # m, safety threshold
    a_cap: float = 3.0  # m/s^2, braking capability used in the desired distance
    t_lc: float = 5.0   # s, total lane-change time
    collision_penalty: float = -100.0

    def __post_init__(self) -> None:
        if min(self.tau, self.d0, self.dt_safe, self.a_cap, self.t_lc) <= 0:
            raise ConfigError("time and distance parameters must be positive")
        if max(self.w1, self.w2, self.w3, self.w4) >= 0:
            raise ConfigError("decision weights must be negative (penalties)")
        if self.collision_penalty >= 0:
            raise ConfigError("collision penalty must be negative")


@dataclass(frozen=True)
class AdjustRewardParams:
    w_dis: float = 0.05  # 1/m
    w_dv: float = 0.1    # s/m

    def __post_init__(self) -> None:
        if self.w_dis <= 0 or self.w_dv <= 0:
            raise ConfigError("adjustment weights must be positive")


@dataclass(frozen=True)
class GapMeasurement:
    d_gap: float     # clear distance from target follower front to target leader rear
    d_target: float  # desired distance in the target lane
    d_ego: float     # desired distance to the ego-lane leader


def desired_distance_ego(v_ego: float, p: DecisionRewardParams) -> float:
    """Reaction distance plus braking distance plus the safety threshold."""
    if v_ego < 0:
        raise ValueError("speed must be non-negative")
    return v_ego * p.tau + v_ego**2 / (2.0 * p.a_cap) + p.dt_safe


def desired_distance_target(v_ego: float, v_target: float, offset: float, p: DecisionRewardParams) -> float:
    """Required target-lane room: travel during the maneuver, the current
    offset to the target leader, and the reaction-scaled closing speed."""
    if v_ego < 0 or v_target < 0:
        raise ValueError("speeds must be non-negative")
    return v_ego * p.t_lc + offset + p.tau * (v_target - v_ego) + p.d0


def measure_gap(s: DecisionState, ego_length: float, p: DecisionRewardParams) -> GapMeasurement:
    """Gap bookkeeping derived from one observation.

    The clear follower-to-leader distance is the two observed gaps plus the
    ego body sitting between the measurement points.
    """
    d_gap = s.dx_target + s.dx_follow + ego_length
    v_target = s.v_ego - s.dv_target
    return GapMeasurement(
        d_gap=d_gap,
        d_target=desired_distance_target(s.v_ego, max(0.0, v_target), s.dx_target, p),
        d_ego=desired_distance_ego(s.v_ego, p),
    )


def decision_reward(s: DecisionState, a_l: int, gap: GapMeasurement, collided: bool, p: DecisionRewardParams) -> float:
    """Safety-centric reward for the stay/change decision.

    Staying is judged on the ego lane only; changing on the target lane
    only. A target gap larger than required incurs no penalty.
    """
    if collided:
        return p.collision_penalty
    if a_l == 0:
        return p.w1 * abs(gap.d_ego - s.dx_leader) + p.w2 * abs(s.dv_leader)
    return p.w3 * max(0.0, gap.d_target - gap.d_gap) + p.w4 * abs(s.dv_target)


def car_following_reward(x_leader: float, x_ego: float, v_leader: float, v_ego: float, d_ego: float, p: AdjustRewardParams) -> float:
    """Penalty for deviating from the desired gap and the leader's speed."""
    r_dis = -p.w_dis * abs(x_leader - x_ego - d_ego)
    r_dv = -p.w_dv * abs(v_ego - v_leader)
    return r_dis + r_dv


def gap_adjust_reward(s: DecisionState, v_leader: float, v_target: float, p: AdjustRewardParams) -> float:
    """Penalty for being away from the merge slot.

    The desired position puts the follower gap equal to the nearer of the
    two front gaps, at the slower of the two front vehicles' speeds.
    """
    r_dis = -p.w_dis * abs(min(s.dx_leader, s.dx_target) - s.dx_follow)
    r_dv = -p.w_dv * abs(s.v_ego - min(v_leader, v_target))
    return r_dis + r_dv
