"""Deterministic multi-lane highway world.

The world is a flat straight road segment. Every vehicle except the ego is
lane-bound and driven by the IDM; the ego is driven externally through a
kinematic bicycle model. Stepping never mutates its input, so a WorldState
is a plain value: same seed and same action sequence reproduce the same
states bit for bit.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from .errors import ConfigError
from .idm import IdmParams, free_road_acceleration, idm_acceleration
from .pursuit import bicycle_step

# Vehicle roles. Ambient vehicles and the three named neighbors never leave
# their lane; the ego is the only externally controlled vehicle.
EGO = "ego"
LEADER = "leader"
TARGET_LEADER = "target_leader"
TARGET_FOLLOWER = "target_follower"
AMBIENT = "ambient"

# Observation value used when a neighbor slot is empty: a large clear
# distance and no speed difference.
MISSING_NEIGHBOR_DISTANCE = 200.0


@dataclass(frozen=True)
class LaneGeometry:
    lane_count: int = 2
    lane_width: float = 3.75       # m
    segment_length: float = 1000.0  # m

    def __post_init__(self) -> None:
        if self.lane_count < 2:
            raise ConfigError("need at least two lanes")
        if self.lane_width <= 0 or self.segment_length <= 0:
            raise ConfigError("lane width and segment length must be positive")

    def lane_center(self, lane: int) -> float:
        return (lane + 0.5) * self.lane_width

    def lane_of(self, y: float) -> int:
        return min(self.lane_count - 1, max(0, int(math.floor(y / self.lane_width))))


@dataclass(frozen=True)
class Vehicle:
    """One vehicle. x is the front-bumper position, y the centerline offset."""

    id: int
    x: float
    y: float
    heading: float
    v: float
    a: float
    length: float
    width: float
    lane: int
    role: str

    def rear(self) -> float:
        return self.x - self.length


@dataclass(frozen=True)
class DecisionState:
    """Seven-component observation fed to both learning layers.

    Distances are bumper-to-bumper clear gaps (collision exactly when a gap
    reaches zero); speed differences are ego minus neighbor. Missing
    neighbors are reported as MISSING_NEIGHBOR_DISTANCE with zero speed
    difference.
    """

    dx_leader: float
    dx_target: float
    dx_follow: float
    dv_leader: float
    dv_target: float
    v_ego: float
    a_ego: float

    def as_vector(self) -> np.ndarray:
        return np.array(
            [self.dx_leader, self.dx_target, self.dx_follow,
             self.dv_leader, self.dv_target, self.v_ego, self.a_ego],
            dtype=float,
        )


@dataclass
class WorldState:
    geometry: LaneGeometry
    vehicles: list[Vehicle]
    t: float
    dt: float
    rng: np.random.Generator = field(compare=False, repr=False, default_factory=np.random.default_rng)
    step_index: int = 0

    def ego(self) -> Optional[Vehicle]:
        for v in self.vehicles:
            if v.role == EGO:
                return v
        return None

    def by_role(self, role: str) -> Optional[Vehicle]:
        for v in self.vehicles:
            if v.role == role:
                return v
        return None


@dataclass(frozen=True)
class ScenarioConfig:
    """Spawn-time description of one scenario."""

    lane_count: int = 2
    lane_width: float = 3.75
    segment_length: float = 1000.0
    dt: float = 0.1
    ego_lane: int = 0
    target_lane: int = 1
    speed_min: float = 20.83   # m/s, lower end of the spawn speed band
    speed_max: float = 37.78   # m/s, upper end of the spawn speed band
    spawn_delay_min: float = 0.1  # s, leader head start before the ego appears
    spawn_delay_max: float = 7.0
    gap_min: float = 25.0      # m, clear target-lane gap at spawn
    gap_max: float = 60.0
    follow_back: float = 20.0  # m, target follower's front bumper behind the ego's
    n_ambient: int = 0
    ambient_spacing_min: float = 30.0
    ambient_spacing_max: float = 80.0
    vehicle_length: float = 5.0
    vehicle_width: float = 1.8
    place_target_vehicles: bool = True
    # Fixed overrides for staged evaluations; None means "draw randomly".
    fixed_ego_speed: Optional[float] = None
    fixed_leader_speed: Optional[float] = None
    fixed_leader_gap: Optional[float] = None
    # Ego longitudinal actuator saturation applied by step_world.
    ego_accel_min: float = -8.0
    ego_accel_max: float = 3.0

    def geometry(self) -> LaneGeometry:
        return LaneGeometry(self.lane_count, self.lane_width, self.segment_length)

    def validate(self) -> None:
        self.geometry()  # raises on degenerate lanes
        if self.dt <= 0:
            raise ConfigError("dt must be positive")
        if not 0 <= self.ego_lane < self.lane_count or not 0 <= self.target_lane < self.lane_count:
            raise ConfigError("ego or target lane outside the road")
        if abs(self.target_lane - self.ego_lane) != 1:
            raise ConfigError("target lane must be adjacent to the ego lane")
        if self.speed_min <= 0 or self.speed_max < self.speed_min:
            raise ConfigError("invalid spawn speed band")
        if self.spawn_delay_min <= 0 or self.spawn_delay_max < self.spawn_delay_min:
            raise ConfigError("invalid spawn delay range")
        if self.vehicle_length <= 0 or self.vehicle_width <= 0:
            raise ConfigError("vehicle dimensions must be positive")
        if self.n_ambient < 0:
            raise ConfigError("ambient count cannot be negative")


@dataclass(frozen=True)
class SpawnDraw:
    """Everything sampled while building a scenario, for audit and replay."""

    leader_speed: float
    ego_speed: float
    t_e: float
    preroll_steps: int
    leader_x: float
    leader_v_at_spawn: float
    gap_length: float
    target_leader_speed: float
    target_follower_speed: float


def _preroll_leader(v: float, steps: int, dt: float, idm: IdmParams) -> tuple[float, float]:
    """Integrate a solo leader from the lane start over the head-start period."""
    x = 0.0
    for _ in range(steps):
        a = free_road_acceleration(v, idm)
        x += v * dt
        v = max(0.0, v + a * dt)
    return x, v


def draw_spawn(seed: int, cfg: ScenarioConfig, idm: IdmParams | None = None) -> SpawnDraw:
    """Sample all spawn quantities for a seed. Same seed, same draw."""
    cfg.validate()
    idm = idm or IdmParams()
    rng = np.random.default_rng(seed)
    leader_speed = cfg.fixed_leader_speed
    if leader_speed is None:
        leader_speed = float(rng.uniform(cfg.speed_min, cfg.speed_max))
    ego_speed = cfg.fixed_ego_speed
    if ego_speed is None:
        ego_speed = float(rng.uniform(cfg.speed_min, cfg.speed_max))
    if cfg.fixed_leader_gap is not None:
        t_e, steps = 0.0, 0
        leader_x = cfg.fixed_leader_gap + cfg.vehicle_length
        leader_v = leader_speed
    else:
        t_e = float(rng.uniform(cfg.spawn_delay_min, cfg.spawn_delay_max))
        steps = max(1, int(round(t_e / cfg.dt)))
        leader_x, leader_v = _preroll_leader(leader_speed, steps, cfg.dt, idm)
    gap_length = 0.0
    tl_speed = tf_speed = 0.0
    if cfg.place_target_vehicles:
        gap_length = float(rng.uniform(cfg.gap_min, cfg.gap_max))
        tl_speed = float(rng.uniform(cfg.speed_min, cfg.speed_max))
        tf_speed = float(rng.uniform(cfg.speed_min, cfg.speed_max))
    return SpawnDraw(leader_speed, ego_speed, t_e, steps, leader_x, leader_v, gap_length, tl_speed, tf_speed)


def spawn_scenario(seed: int, cfg: ScenarioConfig, idm: IdmParams | None = None) -> WorldState:
    """Build the initial world for a seed.

    The leader enters the lane first and runs free-road IDM for the sampled
    head start, so the initial leader-ego distance is the integral of the
    leader's speed over that period. The ego then appears at the lane start.
    Target-lane vehicles bracket a clear gap near the ego.
    """
    idm = idm or IdmParams()
    draw = draw_spawn(seed, cfg, idm)
    geometry = cfg.geometry()
    L, W = cfg.vehicle_length, cfg.vehicle_width
    ego_y = geometry.lane_center(cfg.ego_lane)
    target_y = geometry.lane_center(cfg.target_lane)
    vehicles = [
        Vehicle(0, 0.0, ego_y, 0.0, draw.ego_speed, 0.0, L, W, cfg.ego_lane, EGO),
        Vehicle(1, draw.leader_x, ego_y, 0.0, draw.leader_v_at_spawn, 0.0, L, W, cfg.ego_lane, LEADER),
    ]
    if cfg.place_target_vehicles:
        tf_x = -cfg.follow_back
        tl_x = tf_x + draw.gap_length + L
        vehicles.append(Vehicle(2, tl_x, target_y, 0.0, draw.target_leader_speed, 0.0, L, W, cfg.target_lane, TARGET_LEADER))
        vehicles.append(Vehicle(3, tf_x, target_y, 0.0, draw.target_follower_speed, 0.0, L, W, cfg.target_lane, TARGET_FOLLOWER))
    rng = np.random.default_rng(seed)
    if cfg.n_ambient > 0:
        # extra traffic upstream of everything already placed, per lane
        frontier = {lane: min((v.rear() for v in vehicles if v.lane == lane), default=0.0) for lane in range(cfg.lane_count)}
        next_id = 4
        for i in range(cfg.n_ambient):
            lane = int(rng.integers(0, cfg.lane_count))
            spacing = float(rng.uniform(cfg.ambient_spacing_min, cfg.ambient_spacing_max))
            speed = float(rng.uniform(cfg.speed_min, cfg.speed_max))
            x = frontier.get(lane, 0.0) - spacing
            frontier[lane] = x - L
            vehicles.append(Vehicle(next_id, x, geometry.lane_center(lane), 0.0, speed, 0.0, L, W, lane, AMBIENT))
            next_id += 1
    return WorldState(geometry=geometry, vehicles=vehicles, t=0.0, dt=cfg.dt, rng=rng)


def leader_of(world: WorldState, vehicle: Vehicle) -> Optional[Vehicle]:
    """Nearest vehicle ahead of `vehicle` in its own lane."""
    best = None
    for other in world.vehicles:
        if other.id == vehicle.id or other.lane != vehicle.lane:
            continue
        if other.x > vehicle.x and (best is None or other.x < best.x):
            best = other
    return best


def step_world(
    world: WorldState,
    ego_accel: float = 0.0,
    ego_steer: float = 0.0,
    *,
    idm: IdmParams | None = None,
    wheelbase: float = 2.7,
    accel_limits: tuple[float, float] = (-8.0, 3.0),
    steer_limit: float = 0.6,
) -> WorldState:
    """Advance the world by one dt.

    Non-ego vehicles follow the IDM behind their current lane leader and
    keep heading zero; the ego integrates the bicycle model under the given
    (saturated) inputs. Vehicles whose rear has cleared the segment end are
    retired.
    """
    idm = idm or IdmParams()
    geometry = world.geometry
    updated: list[Vehicle] = []
    for veh in world.vehicles:
        if veh.role == EGO:
            a = min(accel_limits[1], max(accel_limits[0], ego_accel))
            steer = min(steer_limit, max(-steer_limit, ego_steer))
            pose, v = bicycle_step((veh.x, veh.y, veh.heading), veh.v, a, steer, wheelbase, world.dt)
            updated.append(replace(veh, x=pose[0], y=pose[1], heading=pose[2], v=v, a=a, lane=geometry.lane_of(pose[1])))
        else:
            lead = leader_of(world, veh)
            if lead is None:
                a = free_road_acceleration(veh.v, idm)
            else:
                gap = lead.rear() - veh.x
                a = idm_acceleration(gap, veh.v, lead.v, idm) if gap > 0 else -idm.b_hard
            x = veh.x + veh.v * world.dt
            v = max(0.0, veh.v + a * world.dt)
            updated.append(replace(veh, x=x, v=v, a=a))
    step_index = world.step_index + 1
    alive = [v for v in updated if v.x <= geometry.segment_length + v.length]
    return WorldState(
        geometry=geometry,
        vehicles=alive,
        t=step_index * world.dt,
        dt=world.dt,
        rng=world.rng,
        step_index=step_index,
    )


def observe_decision_state(world: WorldState, target_lane: int) -> DecisionState:
    """Extract the seven-component observation around the ego."""
    ego = world.ego()
    if ego is None:
        raise ValueError("world has no ego vehicle")
    leader = None
    target_leader = None
    target_follower = None
    for other in world.vehicles:
        if other.id == ego.id:
            continue
        if other.lane == ego.lane and other.x > ego.x:
            if leader is None or other.x < leader.x:
                leader = other
        if other.lane == target_lane:
            if other.x > ego.x:
                if target_leader is None or other.x < target_leader.x:
                    target_leader = other
            elif target_follower is None or other.x > target_follower.x:
                target_follower = other
    dx_leader = leader.rear() - ego.x if leader else MISSING_NEIGHBOR_DISTANCE
    dv_leader = ego.v - leader.v if leader else 0.0
    dx_target = target_leader.rear() - ego.x if target_leader else MISSING_NEIGHBOR_DISTANCE
    dv_target = ego.v - target_leader.v if target_leader else 0.0
    dx_follow = ego.rear() - target_follower.x if target_follower else MISSING_NEIGHBOR_DISTANCE
    return DecisionState(dx_leader, dx_target, dx_follow, dv_leader, dv_target, ego.v, ego.a)


def _obb_overlap(a: Vehicle, b: Vehicle) -> bool:
    """Oriented-rectangle overlap; touching counts as overlap."""
    def frame(v: Vehicle) -> tuple[float, float, tuple[float, float], tuple[float, float]]:
        c, s = math.cos(v.heading), math.sin(v.heading)
        cx = v.x - 0.5 * v.length * c
        cy = v.y - 0.5 * v.length * s
        return cx, cy, (c, s), (-s, c)

    ax, ay, au, aw = frame(a)
    bx, by, bu, bw = frame(b)
    dx, dy = bx - ax, by - ay
    for axis in (au, aw, bu, bw):
        ra = 0.5 * a.length * abs(au[0] * axis[0] + au[1] * axis[1]) + 0.5 * a.width * abs(aw[0] * axis[0] + aw[1] * axis[1])
        rb = 0.5 * b.length * abs(bu[0] * axis[0] + bu[1] * axis[1]) + 0.5 * b.width * abs(bw[0] * axis[0] + bw[1] * axis[1])
        if abs(dx * axis[0] + dy * axis[1]) > ra + rb + 1e-12:
            return False
    return True


def check_collision(world: WorldState) -> bool:
    """True when the ego rectangle overlaps any other vehicle rectangle."""
    ego = world.ego()
    if ego is None:
        return False
    return any(_obb_overlap(ego, other) for other in world.vehicles if other.id != ego.id)
