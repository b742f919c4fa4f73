"""Intelligent Driver Model car-following law."""
from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import ConfigError


@dataclass(frozen=True)
class IdmParams:
    """IDM parameter set, canonical motorway values by default."""

    v0: float = 33.33      # desired speed, m/s
    T: float = 1.5         # desired time headway, s
    a_max: float = 0.73    # maximum acceleration, m/s^2
    b_comf: float = 1.67   # comfortable deceleration, m/s^2
    delta: float = 4.0     # free-road exponent
    s0: float = 2.0        # jam distance, m
    b_hard: float = 8.0    # hard braking bound, m/s^2

    def __post_init__(self) -> None:
        if min(self.v0, self.T, self.a_max, self.b_comf, self.s0, self.b_hard) <= 0:
            raise ConfigError("IDM parameters must be positive")
        if self.delta < 1:
            raise ConfigError("IDM delta must be >= 1")


def desired_gap(v: float, v_lead: float, p: IdmParams) -> float:
    """Dynamic desired gap s* for a follower at v approaching a leader at v_lead."""
    dynamic = v * p.T + v * (v - v_lead) / (2.0 * math.sqrt(p.a_max * p.b_comf))
    return p.s0 + max(0.0, dynamic)


def idm_acceleration(gap: float, v: float, v_lead: float, p: IdmParams) -> float:
    """Longitudinal acceleration for a bumper-to-bumper gap to the leader.

    The result is clamped to [-b_hard, a_max]. A non-positive gap means the
    vehicles already overlap; that is a collision state, not an IDM query.
    """
    if gap <= 0.0:
        raise ValueError(f"non-positive gap {gap}: collision state, IDM undefined")
    s_star = desired_gap(v, v_lead, p)
    accel = p.a_max * (1.0 - (v / p.v0) ** p.delta - (s_star / gap) ** 2)
    return min(p.a_max, max(-p.b_hard, accel))


def free_road_acceleration(v: float, p: IdmParams) -> float:
    """IDM acceleration with no leader (interaction term vanishes)."""
    accel = p.a_max * (1.0 - (v / p.v0) ** p.delta)
    return min(p.a_max, max(-p.b_hard, accel))


def equilibrium_gap(v: float, p: IdmParams) -> float:
    """Gap at which a follower at speed v behind a same-speed leader holds v.

    Only defined below the desired speed; at or above v0 the free-road term
    is non-positive and no finite gap balances it.
    """
    free = 1.0 - (v / p.v0) ** p.delta
    if free <= 0.0:
        raise ValueError("no finite equilibrium gap at or above the desired speed")
    return desired_gap(v, v, p) / math.sqrt(free)
