"""Command-line surface.

Commands: train-following, train-lanechange, train-decision, eval, rollout,
export. Exit codes: 0 success, 1 training divergence, 2 configuration error.
"""
from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from pathlib import Path

from .agent import MODE_FOLLOW, MODE_GAP
from .config import RunConfig, default_config, dump_config, load_config
from .errors import ConfigError, DivergenceError
from .harness import (
    evaluate,
    export,
    fresh_models,
    load_models,
    rollout,
    save_models,
    train_adjustment,
    train_decision,
    write_episodes_csv,
    write_loss_csv,
)


def _add_common(p: argparse.ArgumentParser, *, needs_out: bool = True) -> None:
    p.add_argument("--config", type=Path, default=None, help="key-value config file")
    p.add_argument("--seed", type=int, default=None, help="override train.seed")
    p.add_argument("--steps", type=int, default=None, help="override train.total_steps")
    p.add_argument("--checkpoint", type=Path, default=None, help="checkpoint directory")
    p.add_argument("--out", type=Path, required=needs_out, help="output directory")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="lanelab", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("train-following", "train-lanechange", "train-decision"):
        p = sub.add_parser(name)
        _add_common(p)
        p.add_argument("--quiet", action="store_true")
    p = sub.add_parser("eval")
    _add_common(p)
    p.add_argument("--episodes", type=int, default=None, help="override train.eval_episodes")
    p = sub.add_parser("rollout")
    _add_common(p)
    p = sub.add_parser("export")
    p.add_argument("run_dir", type=Path)
    p.add_argument("--what", choices=("metrics", "trajectory", "checkpoint"), required=True)
    p.add_argument("--out", type=Path, default=None)
    return parser


def _resolve_config(args) -> RunConfig:
    cfg = load_config(args.config) if args.config else default_config()
    train = cfg.train
    if getattr(args, "seed", None) is not None:
        train = replace(train, seed=args.seed)
    if getattr(args, "steps", None) is not None:
        train = replace(train, total_steps=args.steps)
    return replace(cfg, train=train)


def _write_run(out: Path, cfg: RunConfig, result) -> None:
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.txt").write_text(dump_config(cfg))
    write_loss_csv(out / "loss.csv", result.losses)
    write_episodes_csv(out / "episodes.csv", result.episodes)
    meta = {"gamma": repr(cfg.train.gamma), "eps_step": result.schedule_step, "noise_step": result.schedule_step}
    save_models(out / "checkpoints", result.models, meta)


def _cmd_train_adjustment(args, module_id: str) -> int:
    cfg = _resolve_config(args)
    result = train_adjustment(module_id, cfg, verbose=not args.quiet)
    _write_run(args.out, cfg, result)
    final = result.episodes[-1].cumulative_reward if result.episodes else float("nan")
    print(f"trained {module_id}: {result.control_steps} steps, "
          f"{len(result.episodes)} episodes, last episode reward {final:.2f}")
    print(f"artifacts in {args.out}")
    return 0


def _cmd_train_decision(args) -> int:
    cfg = _resolve_config(args)
    if args.checkpoint is None:
        raise ConfigError("train-decision needs --checkpoint with both adjustment modules")
    frozen = load_models(args.checkpoint)
    if frozen.q_follow is None or frozen.q_gap is None:
        raise ConfigError(f"{args.checkpoint} must hold car_following and lane_change modules")
    result = train_decision(cfg, frozen.q_follow, frozen.q_gap, verbose=not args.quiet)
    _write_run(args.out, cfg, result)
    print(f"trained decision layer: {result.control_steps} steps, {len(result.episodes)} episodes")
    print(f"artifacts in {args.out}")
    return 0


def _cmd_eval(args) -> int:
    cfg = _resolve_config(args)
    models = load_models(args.checkpoint) if args.checkpoint else fresh_models(cfg)
    if models.q_follow is None:
        models.q_follow = fresh_models(cfg).q_follow
    if models.q_gap is None:
        models.q_gap = fresh_models(cfg).q_gap
    if models.dqn is None:
        models.dqn = fresh_models(cfg).dqn
    n = args.episodes if args.episodes is not None else cfg.train.eval_episodes
    report = evaluate(models, cfg, n, cfg.train.seed)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.txt").write_text(dump_config(cfg))
    write_episodes_csv(out / "eval_episodes.csv", report.episodes)
    traces_dir = out / "traces"
    traces_dir.mkdir(exist_ok=True)
    for i, trace in enumerate(report.traces):
        lines = ["t,v_ego,dv_leader,leader_present,y,phase"]
        for row in trace:
            lines.append(f"{row.t!r},{row.v_ego!r},{row.dv_leader!r},{int(row.leader_present)},{row.y!r},{row.phase}")
        (traces_dir / f"ep_{i:03d}.csv").write_text("\n".join(lines) + "\n")
    settling = "n/a" if report.mean_settling_time is None else f"{report.mean_settling_time:.1f}s"
    summary = (
        f"episodes = {len(report.episodes)}\n"
        f"collision_rate = {report.collision_rate!r}\n"
        f"completion_rate = {report.completion_rate!r}\n"
        f"settled_fraction = {report.settled_fraction!r}\n"
        f"mean_settling_time = {settling}\n"
    )
    (out / "report.txt").write_text(summary)
    print(summary, end="")
    return 0


def _cmd_rollout(args) -> int:
    cfg = _resolve_config(args)
    models = load_models(args.checkpoint) if args.checkpoint else None
    paths = rollout(models, cfg, cfg.train.seed, args.out)
    print(f"rollout seed {cfg.train.seed}: wrote {paths['trajectory']} and {paths['metrics']}")
    return 0


def _cmd_export(args) -> int:
    written = export(args.run_dir, args.what, args.out)
    for path in written:
        print(path)
    return 0


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "train-following":
            return _cmd_train_adjustment(args, MODE_FOLLOW)
        if args.command == "train-lanechange":
            return _cmd_train_adjustment(args, MODE_GAP)
        if args.command == "train-decision":
            return _cmd_train_decision(args)
        if args.command == "eval":
            return _cmd_eval(args)
        if args.command == "rollout":
            return _cmd_rollout(args)
        if args.command == "export":
            return _cmd_export(args)
        raise ConfigError(f"unknown command {args.command!r}")
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except DivergenceError as exc:
        print(f"divergence: {exc}", file=sys.stderr)
        return 1


def main_entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    main_entry()
