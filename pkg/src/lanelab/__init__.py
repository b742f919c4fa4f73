"""Highway lane-change laboratory.

A self-contained playground for tactical lane changing on a multi-lane
highway: a deterministic traffic simulator with IDM-controlled ambient
vehicles, quintic reference trajectories tracked by pure pursuit, small
from-scratch neural networks, and a hierarchical agent that learns when
to change lanes (discrete Q-network) and how to adjust its longitudinal
motion (quadratic continuous-action Q-functions).
"""

__version__ = "0.1.0"

import os as _os

# The networks here are tiny; threaded BLAS only adds contention and makes
# timing erratic. Single-threaded math also keeps runs reproducible. Set
# before numpy first loads; respected lazily by OpenBLAS builds otherwise.
for _var in ("OPENBLAS_NUM_THREADS", "OMP_NUM_THREADS", "MKL_NUM_THREADS"):
    _os.environ.setdefault(_var, "1")

from .errors import ConfigError, DivergenceError, PlanningError
from .idm import IdmParams, idm_acceleration
from .world import (
    DecisionState,
    LaneGeometry,
    ScenarioConfig,
    Vehicle,
    WorldState,
    check_collision,
    observe_decision_state,
    spawn_scenario,
    step_world,
)
from .trajectory import BoundaryState, QuinticTrajectory, eval_trajectory, plan_lane_change, solve_quintic
from .pursuit import PurePursuitConfig, bicycle_step, find_lookahead_point, pure_pursuit_steering
from .qmodels import DqnModel, QuadraticQModel, greedy_action, max_q, quadratic_q_value
from .replay import ReplayBuffer, Transition
from .learning import EpsilonSchedule, epsilon_at, td_target
from .config import RunConfig, TrainConfig, default_config, load_config
