"""Hierarchical lane-change policy.

One agent step wires the three learned pieces together: a discrete
Q-network decides stay-or-change at a low cadence, a quadratic Q module
produces the longitudinal acceleration for the chosen behavior every
control step, and once the merge slot is aligned a quintic trajectory is
committed and tracked with pure pursuit until the maneuver completes.

Transition bookkeeping is one step delayed: the transition begun by the
previous action is finished on the next call, when the resulting world is
visible and its reward can be computed.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import ConfigError
from .pursuit import PurePursuitConfig, pursuit_controls
from .qmodels import DqnModel, QuadraticQModel, select_continuous, select_discrete
from .replay import Transition
from .rewards import (
    AdjustRewardParams,
    DecisionRewardParams,
    car_following_reward,
    decision_reward,
    desired_distance_ego,
    gap_adjust_reward,
    measure_gap,
)
from .trajectory import QuinticTrajectory, plan_lane_change
from .world import DecisionState, WorldState, check_collision, observe_decision_state

# Phase names
DECIDING = "deciding"
ADJUST_FOLLOW = "adjusting_follow"
ADJUST_GAP = "adjusting_gap"
EXECUTING = "executing"
DONE = "done"
ABORTED = "aborted"

_LEGAL = {
    DECIDING: {ADJUST_FOLLOW, ADJUST_GAP, ABORTED},
    ADJUST_FOLLOW: {DECIDING, ABORTED},
    ADJUST_GAP: {EXECUTING, DECIDING, DONE, ABORTED},
    EXECUTING: {DONE, ABORTED},
    DONE: set(),
    ABORTED: set(),
}

# Agent modes: the full hierarchy, or one adjustment module trained alone.
MODE_FULL = "full"
MODE_FOLLOW = "car_following"
MODE_GAP = "lane_change"

# Replay tags
TAG_DECISION = "decision"
TAG_FOLLOW = "car_following"
TAG_GAP = "lane_change"


@dataclass(frozen=True)
class AgentConfig:
    mode: str = MODE_FULL
    target_lane: int = 1
    decision_interval: int = 10    # control steps between decisions
    align_dist: float = 2.0        # m, slot alignment tolerance
    align_speed: float = 1.0       # m/s
    gap_timeout_steps: int = 80    # unaligned steps before re-deciding
    lane_change_duration: float = 5.0  # s
    settle_steps: int = 30         # post-completion settling, control steps

    def __post_init__(self) -> None:
        if self.mode not in (MODE_FULL, MODE_FOLLOW, MODE_GAP):
            raise ConfigError(f"unknown agent mode {self.mode!r}")
        if self.decision_interval < 1 or self.gap_timeout_steps < 1:
            raise ConfigError("intervals must be positive")
        if min(self.align_dist, self.align_speed, self.lane_change_duration) <= 0:
            raise ConfigError("alignment tolerances and duration must be positive")


@dataclass
class AgentModels:
    dqn: Optional[DqnModel] = None
    q_follow: Optional[QuadraticQModel] = None
    q_gap: Optional[QuadraticQModel] = None


@dataclass(frozen=True)
class AgentSetup:
    models: AgentModels
    cfg: AgentConfig
    decision: DecisionRewardParams
    adjust: AdjustRewardParams
    pursuit: PurePursuitConfig


@dataclass
class _Pending:
    tag: str
    s: np.ndarray
    a: float


@dataclass
class AgentPhase:
    """Mutable agent state threaded through a rollout."""

    kind: str = DECIDING
    a_l: int = 0
    steps_since_decision: int = 0
    gap_steps: int = 0
    trajectory: Optional[QuinticTrajectory] = None
    traj_elapsed: float = 0.0
    done_steps: int = 0
    pending: Optional[_Pending] = None
    decision_open: bool = False
    decision_s: Optional[np.ndarray] = None
    decision_acc: float = 0.0


@dataclass
class HierStepResult:
    accel: float
    steer: float
    phase: AgentPhase
    transitions: list[tuple[str, Transition]]
    r_decision: float
    r_adjust: float
    obs: DecisionState


def begin_episode() -> AgentPhase:
    return AgentPhase()


def _set_kind(phase: AgentPhase, new: str) -> None:
    if new != phase.kind and new not in _LEGAL[phase.kind]:
        raise ValueError(f"illegal phase transition {phase.kind} -> {new}")
    phase.kind = new


def alignment_errors(obs: DecisionState) -> tuple[float, float]:
    """Distance and speed error of the ego relative to the merge slot."""
    dist_err = abs(min(obs.dx_leader, obs.dx_target) - obs.dx_follow)
    v_leader = obs.v_ego - obs.dv_leader
    v_target = obs.v_ego - obs.dv_target
    speed_err = abs(obs.v_ego - min(v_leader, v_target))
    return dist_err, speed_err


def is_aligned(obs: DecisionState, cfg: AgentConfig) -> bool:
    dist_err, speed_err = alignment_errors(obs)
    return dist_err < cfg.align_dist and speed_err < cfg.align_speed


def _module_reward(tag: str, obs: DecisionState, setup: AgentSetup) -> float:
    v_leader = obs.v_ego - obs.dv_leader
    if tag == TAG_FOLLOW:
        d_ego = desired_distance_ego(obs.v_ego, setup.decision)
        return car_following_reward(obs.dx_leader, 0.0, v_leader, obs.v_ego, d_ego, setup.adjust)
    v_target = obs.v_ego - obs.dv_target
    return gap_adjust_reward(obs, v_leader, v_target, setup.adjust)


def _close_decision(phase: AgentPhase, vec: np.ndarray, terminal: bool, transitions: list) -> None:
    if phase.decision_open:
        transitions.append((TAG_DECISION, Transition(phase.decision_s, phase.a_l, phase.decision_acc, vec, terminal)))
        phase.decision_open = False
        phase.decision_acc = 0.0


def hierarchical_step(
    phase: AgentPhase,
    world: WorldState,
    setup: AgentSetup,
    *,
    rng: Optional[np.random.Generator] = None,
    eps: float = 0.0,
    noise_std: float = 0.0,
) -> HierStepResult:
    """One control step of the hierarchy.

    Returns the longitudinal acceleration and steering command, the updated
    phase, transitions completed by this call, and the rewards attached to
    them (both zero on the very first call of an episode, when nothing has
    been finished yet).
    """
    cfg = setup.cfg
    models = setup.models
    obs = observe_decision_state(world, cfg.target_lane)
    vec = obs.as_vector()
    ego = world.ego()
    collided = check_collision(world)
    entered_kind = phase.kind
    aligned = is_aligned(obs, cfg)
    transitions: list[tuple[str, Transition]] = []

    # Rewards for whatever the previous action produced.
    gap_now = measure_gap(obs, ego.length, setup.decision)
    r_dec = decision_reward(obs, phase.a_l, gap_now, collided, setup.decision)
    if phase.pending is not None:
        r_adj = setup.decision.collision_penalty if collided else _module_reward(phase.pending.tag, obs, setup)
    else:
        r_adj = setup.decision.collision_penalty if collided else 0.0

    # Finish the adjustment transition begun last step.
    gap_goal_reached = cfg.mode == MODE_GAP and entered_kind == ADJUST_GAP and aligned
    if phase.pending is not None:
        terminal = collided or gap_goal_reached
        transitions.append((phase.pending.tag, Transition(phase.pending.s, phase.pending.a, r_adj, vec, terminal)))
        phase.pending = None
    if phase.decision_open:
        phase.decision_acc += r_dec

    if collided:
        _close_decision(phase, vec, True, transitions)
        _set_kind(phase, ABORTED)
        return HierStepResult(0.0, 0.0, phase, transitions, r_dec, r_adj, obs)

    if gap_goal_reached:
        # Restricted training mode: reaching the slot ends the episode.
        _set_kind(phase, DONE)
        return HierStepResult(0.0, 0.0, phase, transitions, r_dec, r_adj, obs)

    # Decision cadence: fresh episode, follow interval elapsed, or the gap
    # adjustment timed out without alignment.
    due = phase.kind == DECIDING
    if phase.kind == ADJUST_FOLLOW and phase.steps_since_decision >= cfg.decision_interval:
        due = True
    if cfg.mode == MODE_FULL and phase.kind == ADJUST_GAP and phase.gap_steps >= cfg.gap_timeout_steps:
        due = True
    if due:
        _close_decision(phase, vec, False, transitions)
        if phase.kind != DECIDING:
            _set_kind(phase, DECIDING)
        if cfg.mode == MODE_FOLLOW:
            a_l = 0
        elif cfg.mode == MODE_GAP:
            a_l = 1
        else:
            a_l = select_discrete(models.dqn, vec, eps, rng)
        phase.a_l = a_l
        phase.steps_since_decision = 0
        phase.gap_steps = 0
        _set_kind(phase, ADJUST_GAP if a_l == 1 else ADJUST_FOLLOW)
        if cfg.mode == MODE_FULL:
            phase.decision_open = True
            phase.decision_s = vec

    accel, steer = 0.0, 0.0
    if phase.kind == ADJUST_FOLLOW:
        accel = select_continuous(models.q_follow, vec, noise_std, rng)
        phase.pending = _Pending(TAG_FOLLOW, vec, accel)
        phase.steps_since_decision += 1
    elif phase.kind == ADJUST_GAP:
        # committing needs forward motion; a crawling ego keeps adjusting
        if cfg.mode == MODE_FULL and entered_kind == ADJUST_GAP and aligned and ego.v > 0.5:
            phase.trajectory = plan_lane_change(ego, cfg.target_lane, cfg.lane_change_duration, world.geometry)
            phase.traj_elapsed = 0.0
            _set_kind(phase, EXECUTING)
        else:
            accel = select_continuous(models.q_gap, vec, noise_std, rng)
            phase.pending = _Pending(TAG_GAP, vec, accel)
            phase.gap_steps += 1
            phase.steps_since_decision += 1
    if phase.kind == EXECUTING:
        if phase.trajectory is None:
            raise ValueError("executing without a committed trajectory")
        if phase.traj_elapsed >= phase.trajectory.t_t - 1e-9:
            _close_decision(phase, vec, True, transitions)
            _set_kind(phase, DONE)
        else:
            pose = (ego.x, ego.y, ego.heading)
            accel, steer = pursuit_controls(phase.trajectory, phase.traj_elapsed, pose, ego.v, setup.pursuit)
            phase.traj_elapsed += world.dt
    if phase.kind == DONE:
        # Maneuver complete: keep following whoever is ahead while settling.
        accel = select_continuous(models.q_follow, vec, 0.0, None)
        steer = 0.0
        phase.done_steps += 1

    return HierStepResult(accel, steer, phase, transitions, r_dec, r_adj, obs)


def flush_transitions(phase: AgentPhase, world: WorldState, setup: AgentSetup) -> list[tuple[str, Transition]]:
    """Close any open bookkeeping without marking it terminal.

    Used when an episode is truncated (timeout, end of segment) rather than
    finished by the agent itself.
    """
    obs = observe_decision_state(world, setup.cfg.target_lane)
    vec = obs.as_vector()
    transitions: list[tuple[str, Transition]] = []
    if phase.pending is not None:
        r = _module_reward(phase.pending.tag, obs, setup)
        transitions.append((phase.pending.tag, Transition(phase.pending.s, phase.pending.a, r, vec, False)))
        phase.pending = None
    if phase.decision_open:
        ego = world.ego()
        gap_now = measure_gap(obs, ego.length, setup.decision)
        phase.decision_acc += decision_reward(obs, phase.a_l, gap_now, False, setup.decision)
        _close_decision(phase, vec, False, transitions)
    return transitions
