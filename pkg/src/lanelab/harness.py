"""Training, evaluation and artifact plumbing.

Everything here is deterministic given (config, seed): spawning, action
selection, replay sampling and file output all derive from explicitly
seeded generators, and floats are written with repr so emitted files are
reproducible byte for byte.
"""
from __future__ import annotations

import math
import shutil
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, Optional

import numpy as np

try:  # cap BLAS threads even when numpy was imported before this package
    import threadpoolctl

    _BLAS_LIMIT = threadpoolctl.threadpool_limits(limits=1)
except ImportError:  # pragma: no cover - env vars from __init__ still apply
    _BLAS_LIMIT = None

from .agent import (
    ABORTED,
    DONE,
    MODE_FOLLOW,
    MODE_FULL,
    MODE_GAP,
    TAG_DECISION,
    TAG_FOLLOW,
    TAG_GAP,
    AgentModels,
    AgentSetup,
    begin_episode,
    flush_transitions,
    hierarchical_step,
)
from .checkpoint import load_arrays, save_arrays
from .config import RunConfig
from .errors import DivergenceError
from .learning import EpsilonSchedule, epsilon_at, train_step_dqn, train_step_quadratic
from .mlp import adam_init
from .qmodels import DqnModel, QuadraticQModel, sync_target
from .replay import ReplayBuffer, Transition
from .world import MISSING_NEIGHBOR_DISTANCE, WorldState, spawn_scenario, step_world

METRICS_HEADER = "t,phase,a_l,accel,steer,r_decision,r_adjust"
TRAJECTORY_HEADER = "t,id,role,x,y,heading,v,a,lane"
EPISODES_HEADER = "episode,reward,steps,cause,mean_abs_dv,completed"
LOSS_HEADER = "step,loss"

# Training aborts when the loss passes this bound or parameters go non-finite.
LOSS_LIMIT = 1e6
# A car-following episode counts as settled once |dv| drops below this.
SETTLE_DV = 2.0


@dataclass(frozen=True)
class EpisodeMetrics:
    episode: int
    cumulative_reward: float
    steps: int
    cause: str  # collision | done | timeout | segment_end
    mean_abs_dv: float
    completed: bool


@dataclass(frozen=True)
class TraceRow:
    t: float
    v_ego: float
    dv_leader: float
    leader_present: bool
    y: float
    phase: str


def fresh_models(cfg: RunConfig) -> AgentModels:
    bounds = (cfg.train.a_lo, cfg.train.a_hi)
    return AgentModels(
        dqn=DqnModel(seed=0),
        q_follow=QuadraticQModel(action_bounds=bounds, seed=1),
        q_gap=QuadraticQModel(action_bounds=bounds, seed=2),
    )


def make_setup(models: AgentModels, cfg: RunConfig, mode: str | None = None) -> AgentSetup:
    agent_cfg = replace(cfg.agent, mode=mode or cfg.agent.mode, target_lane=cfg.scenario.target_lane)
    return AgentSetup(models, agent_cfg, cfg.decision, cfg.adjust, cfg.pursuit)


def run_episode(
    world: WorldState,
    setup: AgentSetup,
    cfg: RunConfig,
    *,
    train: bool = False,
    rng: Optional[np.random.Generator] = None,
    eps_fn: Optional[Callable[[], float]] = None,
    noise_fn: Optional[Callable[[], float]] = None,
    sinks: Optional[dict[str, ReplayBuffer]] = None,
    trainer: Optional[Callable[[], None]] = None,
    max_steps: Optional[int] = None,
    episode_index: int = 0,
    step_log: Optional[list] = None,
    trace: Optional[list[TraceRow]] = None,
    world_log: Optional[list[WorldState]] = None,
) -> tuple[EpisodeMetrics, dict[str, list[Transition]]]:
    """Roll one episode to termination.

    In train mode exploratory action selection is driven by eps_fn/noise_fn,
    transitions stream into the given replay sinks, and `trainer` runs once
    per control step. In eval mode actions are greedy and no transitions
    are emitted. The reward tallied into the metrics is the decision-layer
    reward for the full hierarchy and the module reward in restricted modes.
    """
    phase = begin_episode()
    collected: dict[str, list[Transition]] = {TAG_DECISION: [], TAG_FOLLOW: [], TAG_GAP: []}
    channel_decision = setup.cfg.mode == MODE_FULL
    limit = max_steps if max_steps is not None else cfg.train.max_episode_steps
    cum = 0.0
    dvs: list[float] = []
    steps = 0
    cause = "timeout"

    def deliver(transitions):
        if not train:
            return
        for tag, tr in transitions:
            collected[tag].append(tr)
            if sinks is not None and tag in sinks:
                sinks[tag].push(tr)

    while steps < limit:
        if world_log is not None:
            world_log.append(world)
        eps = eps_fn() if (train and eps_fn is not None) else 0.0
        noise = noise_fn() if (train and noise_fn is not None) else 0.0
        out = hierarchical_step(phase, world, setup, rng=rng, eps=eps, noise_std=noise)
        steps += 1
        deliver(out.transitions)
        if train and trainer is not None:
            trainer()
        cum += out.r_decision if channel_decision else out.r_adjust
        dvs.append(out.obs.dv_leader)
        if step_log is not None:
            step_log.append((world.t, phase.kind, phase.a_l, out.accel, out.steer, out.r_decision, out.r_adjust))
        if trace is not None:
            ego = world.ego()
            trace.append(TraceRow(world.t, out.obs.v_ego, out.obs.dv_leader,
                                  out.obs.dx_leader < MISSING_NEIGHBOR_DISTANCE, ego.y, phase.kind))
        if phase.kind == ABORTED:
            cause = "collision"
            break
        if phase.kind == DONE and (setup.cfg.mode != MODE_FULL or phase.done_steps > setup.cfg.settle_steps):
            cause = "done"
            break
        world = step_world(
            world,
            out.accel,
            out.steer,
            idm=cfg.idm,
            wheelbase=cfg.pursuit.wheelbase,
            accel_limits=(cfg.scenario.ego_accel_min, cfg.scenario.ego_accel_max),
            steer_limit=cfg.pursuit.steer_limit,
        )
        ego = world.ego()
        if ego is None or ego.x >= cfg.scenario.segment_length:
            if ego is not None:
                deliver(flush_transitions(phase, world, setup))
            cause = "segment_end"
            break
    else:
        deliver(flush_transitions(phase, world, setup))
    if world_log is not None and (not world_log or world_log[-1] is not world):
        world_log.append(world)
    tail = dvs[-50:] if dvs else [0.0]
    metrics = EpisodeMetrics(
        episode=episode_index,
        cumulative_reward=cum,
        steps=steps,
        cause=cause,
        mean_abs_dv=float(np.mean(np.abs(tail))),
        completed=cause == "done",
    )
    return metrics, collected


@dataclass
class TrainResult:
    models: AgentModels
    losses: list[float] = field(default_factory=list)
    episodes: list[EpisodeMetrics] = field(default_factory=list)
    control_steps: int = 0
    schedule_step: int = 0


def _guard(loss: float, model, step: int, *, check_params: bool) -> None:
    # the loss is inspected every update; the full parameter sweep is
    # amortized since a blow-up is visible in the loss within a step or two
    if not math.isfinite(loss) or loss > LOSS_LIMIT or (check_params and not model.all_finite()):
        raise DivergenceError(f"training diverged at control step {step}: loss={loss}")


def train_adjustment(module_id: str, cfg: RunConfig, *, verbose: bool = False) -> TrainResult:
    """Train one longitudinal adjustment module on phase-restricted episodes.

    car_following pins the ego to its lane behind a leader (no target-lane
    traffic); lane_change scripts the change decision, disables execution,
    and rewards progress toward the merge slot. One gradient step runs per
    control step once the buffer can fill a batch.
    """
    if module_id not in (MODE_FOLLOW, MODE_GAP):
        raise ValueError(f"unknown adjustment module {module_id!r}")
    tr = cfg.train
    rng = np.random.default_rng(tr.seed)
    model = QuadraticQModel(action_bounds=(tr.a_lo, tr.a_hi), seed=int(rng.integers(2**31)))
    target = model.copy()
    adam = adam_init(model.arrays(), lr=tr.lr)
    buffer = ReplayBuffer(tr.buffer_capacity, seed=int(rng.integers(2**31)))
    noise_sched = EpsilonSchedule(tr.noise_start, tr.noise_end, tr.noise_decay_steps)
    scenario = replace(cfg.scenario, place_target_vehicles=(module_id == MODE_GAP))
    run_cfg = replace(cfg, scenario=scenario)
    models = AgentModels(q_follow=model) if module_id == MODE_FOLLOW else AgentModels(q_gap=model)
    setup = make_setup(models, run_cfg, mode=module_id)
    tag = TAG_FOLLOW if module_id == MODE_FOLLOW else TAG_GAP
    result = TrainResult(models=models)
    state = {"step": 0, "updates": 0}

    def noise_fn() -> float:
        return epsilon_at(noise_sched, state["step"])

    def trainer() -> None:
        state["step"] += 1
        batch = buffer.sample(tr.batch_size)
        if batch is None:
            return
        _, loss = train_step_quadratic(model, target, batch, tr.gamma, adam)
        result.losses.append(loss)
        state["updates"] += 1
        _guard(loss, model, state["step"], check_params=state["updates"] % 50 == 0)
        if state["updates"] % tr.target_sync_interval == 0:
            sync_target(model, target)

    while state["step"] < tr.total_steps:
        world = spawn_scenario(int(rng.integers(2**31)), scenario, cfg.idm)
        remaining = tr.total_steps - state["step"]
        metrics, _ = run_episode(
            world, setup, run_cfg,
            train=True, rng=rng, noise_fn=noise_fn,
            sinks={tag: buffer}, trainer=trainer,
            max_steps=min(tr.max_episode_steps, remaining),
            episode_index=len(result.episodes),
        )
        result.episodes.append(metrics)
        if verbose and len(result.episodes) % 25 == 0:
            print(f"[{module_id}] step {state['step']}/{tr.total_steps} "
                  f"ep {metrics.episode} reward {metrics.cumulative_reward:.1f} cause {metrics.cause}")
    result.control_steps = state["step"]
    result.schedule_step = state["step"]
    return result


def train_decision(cfg: RunConfig, frozen_following: QuadraticQModel, frozen_lane_change: QuadraticQModel, *, verbose: bool = False) -> TrainResult:
    """Train the stay/change Q-network with both controllers frozen."""
    tr = cfg.train
    rng = np.random.default_rng(tr.seed)
    dqn = DqnModel(seed=int(rng.integers(2**31)))
    target = dqn.copy()
    adam = adam_init(dqn.arrays(), lr=tr.lr)
    buffer = ReplayBuffer(tr.buffer_capacity, seed=int(rng.integers(2**31)))
    eps_sched = EpsilonSchedule(tr.eps_start, tr.eps_end, tr.eps_decay_steps)
    models = AgentModels(dqn=dqn, q_follow=frozen_following, q_gap=frozen_lane_change)
    setup = make_setup(models, cfg, mode=MODE_FULL)
    result = TrainResult(models=models)
    state = {"step": 0, "updates": 0}

    def eps_fn() -> float:
        return epsilon_at(eps_sched, state["step"])

    def trainer() -> None:
        state["step"] += 1
        batch = buffer.sample(tr.batch_size)
        if batch is None:
            return
        _, loss = train_step_dqn(dqn, target, batch, tr.gamma, adam)
        result.losses.append(loss)
        state["updates"] += 1
        _guard(loss, dqn, state["step"], check_params=state["updates"] % 50 == 0)
        if state["updates"] % tr.target_sync_interval == 0:
            sync_target(dqn, target)

    while state["step"] < tr.total_steps:
        world = spawn_scenario(int(rng.integers(2**31)), cfg.scenario, cfg.idm)
        remaining = tr.total_steps - state["step"]
        metrics, _ = run_episode(
            world, setup, cfg,
            train=True, rng=rng, eps_fn=eps_fn,
            sinks={TAG_DECISION: buffer}, trainer=trainer,
            max_steps=min(tr.max_episode_steps, remaining),
            episode_index=len(result.episodes),
        )
        result.episodes.append(metrics)
        if verbose and len(result.episodes) % 25 == 0:
            print(f"[decision] step {state['step']}/{tr.total_steps} "
                  f"ep {metrics.episode} reward {metrics.cumulative_reward:.1f} cause {metrics.cause}")
    result.control_steps = state["step"]
    result.schedule_step = state["step"]
    return result


@dataclass
class EvalReport:
    episodes: list[EpisodeMetrics]
    traces: list[list[TraceRow]]
    collision_rate: float
    completion_rate: float
    settled_fraction: float
    mean_settling_time: Optional[float]  # seconds, over settled episodes


def settle_step(trace: list[TraceRow], threshold: float = SETTLE_DV) -> Optional[int]:
    """First step at which the leader is present and |dv| is below threshold."""
    for i, row in enumerate(trace):
        if row.leader_present and abs(row.dv_leader) < threshold:
            return i
    return None


def evaluate(models: AgentModels, cfg: RunConfig, n_episodes: int, seed: int) -> EvalReport:
    """Greedy rollouts over fresh seeds with per-step kinematic traces."""
    episodes: list[EpisodeMetrics] = []
    traces: list[list[TraceRow]] = []
    setup = make_setup(models, cfg)
    for i in range(n_episodes):
        world = spawn_scenario(seed + i, cfg.scenario, cfg.idm)
        trace: list[TraceRow] = []
        metrics, _ = run_episode(world, setup, cfg, episode_index=i, trace=trace)
        episodes.append(metrics)
        traces.append(trace)
    n = max(1, len(episodes))
    collisions = sum(1 for m in episodes if m.cause == "collision")
    completions = sum(1 for m in episodes if m.completed)
    settle_steps = [settle_step(t) for t in traces]
    settled = [s for s in settle_steps if s is not None]
    return EvalReport(
        episodes=episodes,
        traces=traces,
        collision_rate=collisions / n,
        completion_rate=completions / n,
        settled_fraction=len(settled) / n,
        mean_settling_time=float(np.mean(settled)) * cfg.scenario.dt if settled else None,
    )


# ---------------------------------------------------------------------------
# file output

def _r(x: float) -> str:
    return repr(float(x))


def write_metrics_csv(path: Path, step_log: list) -> None:
    lines = [METRICS_HEADER]
    for t, kind, a_l, accel, steer, r_dec, r_adj in step_log:
        lines.append(f"{_r(t)},{kind},{a_l},{_r(accel)},{_r(steer)},{_r(r_dec)},{_r(r_adj)}")
    path.write_text("\n".join(lines) + "\n")


def write_trajectory_csv(path: Path, worlds: list[WorldState]) -> None:
    lines = [TRAJECTORY_HEADER]
    for w in worlds:
        for v in w.vehicles:
            lines.append(f"{_r(w.t)},{v.id},{v.role},{_r(v.x)},{_r(v.y)},{_r(v.heading)},{_r(v.v)},{_r(v.a)},{v.lane}")
    path.write_text("\n".join(lines) + "\n")


def write_episodes_csv(path: Path, episodes: list[EpisodeMetrics]) -> None:
    lines = [EPISODES_HEADER]
    for m in episodes:
        lines.append(f"{m.episode},{_r(m.cumulative_reward)},{m.steps},{m.cause},{_r(m.mean_abs_dv)},{int(m.completed)}")
    path.write_text("\n".join(lines) + "\n")


def write_loss_csv(path: Path, losses: list[float]) -> None:
    lines = [LOSS_HEADER]
    for i, loss in enumerate(losses):
        lines.append(f"{i},{_r(loss)}")
    path.write_text("\n".join(lines) + "\n")


# ---------------------------------------------------------------------------
# checkpoints

_NET_FILES = {
    "car_following": "q_follow",
    "lane_change": "q_gap",
    "dqn": "dqn",
}


def save_models(ckpt_dir: Path, models: AgentModels, meta: Optional[dict] = None) -> None:
    """One file per quadratic sub-network and per DQN, plus a manifest."""
    ckpt_dir = Path(ckpt_dir)
    ckpt_dir.mkdir(parents=True, exist_ok=True)
    present = []
    bounds = None
    for name, attr in _NET_FILES.items():
        model = getattr(models, attr)
        if model is None:
            continue
        present.append(name)
        if isinstance(model, QuadraticQModel):
            bounds = model.action_bounds
            named = model.named_arrays()
            for prefix in ("A", "B", "C"):
                block = {k.split(".", 1)[1]: v for k, v in named.items() if k.startswith(prefix + ".")}
                save_arrays(ckpt_dir / f"{name}_{prefix}.txt", block)
        else:
            save_arrays(ckpt_dir / f"{name}.txt", model.named_arrays())
    lines = [f"nets = {','.join(present)}"]
    if bounds is not None:
        lines.append(f"a_lo = {_r(bounds[0])}")
        lines.append(f"a_hi = {_r(bounds[1])}")
    for key, value in (meta or {}).items():
        lines.append(f"{key} = {value}")
    (ckpt_dir / "manifest.txt").write_text("\n".join(lines) + "\n")


def read_manifest(ckpt_dir: Path) -> dict[str, str]:
    path = Path(ckpt_dir) / "manifest.txt"
    if not path.exists():
        raise FileNotFoundError(str(path))
    out = {}
    for line in path.read_text().splitlines():
        if "=" in line:
            key, value = line.split("=", 1)
            out[key.strip()] = value.strip()
    return out


def load_models(ckpt_dir: Path) -> AgentModels:
    ckpt_dir = Path(ckpt_dir)
    manifest = read_manifest(ckpt_dir)
    nets = [n for n in manifest.get("nets", "").split(",") if n]
    bounds = (float(manifest.get("a_lo", -4.0)), float(manifest.get("a_hi", 2.0)))
    models = AgentModels()
    for name in nets:
        attr = _NET_FILES[name]
        if name == "dqn":
            model = DqnModel(seed=0)
            model.load_named(load_arrays(ckpt_dir / "dqn.txt"))
        else:
            model = QuadraticQModel(action_bounds=bounds, seed=0)
            named = {}
            for prefix in ("A", "B", "C"):
                for key, arr in load_arrays(ckpt_dir / f"{name}_{prefix}.txt").items():
                    named[f"{prefix}.{key}"] = arr
            model.load_named(named)
        setattr(models, attr, model)
    return models


# ---------------------------------------------------------------------------
# rollout and export

def rollout(models: Optional[AgentModels], cfg: RunConfig, seed: int, out_dir: Path) -> dict[str, Path]:
    """One greedy episode, with trajectory and per-step metrics written out."""
    from .config import dump_config

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    if models is None:
        models = fresh_models(cfg)
    setup = make_setup(models, cfg)
    world = spawn_scenario(seed, cfg.scenario, cfg.idm)
    step_log: list = []
    worlds: list[WorldState] = []
    metrics, _ = run_episode(world, setup, cfg, step_log=step_log, world_log=worlds)
    paths = {
        "trajectory": out_dir / "trajectory.csv",
        "metrics": out_dir / "metrics.csv",
        "config": out_dir / "config.txt",
    }
    write_trajectory_csv(paths["trajectory"], worlds)
    write_metrics_csv(paths["metrics"], step_log)
    paths["config"].write_text(dump_config(cfg))
    return paths


def export(run_dir: Path, what: str, out_dir: Optional[Path] = None) -> list[Path]:
    """Re-emit a run artifact in its documented format.

    metrics/trajectory are validated against their headers and copied;
    checkpoint is loaded and saved again (an exact round trip).
    """
    run_dir = Path(run_dir)
    if not run_dir.is_dir():
        raise FileNotFoundError(str(run_dir))
    out = Path(out_dir) if out_dir is not None else run_dir / "export"
    out.mkdir(parents=True, exist_ok=True)
    if what in ("metrics", "trajectory"):
        src = run_dir / f"{what}.csv"
        if not src.exists():
            raise FileNotFoundError(str(src))
        header = METRICS_HEADER if what == "metrics" else TRAJECTORY_HEADER
        first = src.read_text().splitlines()[0]
        if first != header:
            raise ValueError(f"{src}: unexpected header {first!r}")
        dst = out / src.name
        shutil.copyfile(src, dst)
        return [dst]
    if what == "checkpoint":
        src = run_dir / "checkpoints"
        if not src.is_dir():
            raise FileNotFoundError(str(src))
        models = load_models(src)
        manifest = read_manifest(src)
        meta = {k: v for k, v in manifest.items() if k not in ("nets", "a_lo", "a_hi")}
        dst = out / "checkpoints"
        save_models(dst, models, meta)
        return sorted(dst.iterdir())
    raise ValueError(f"unknown export kind {what!r}")
