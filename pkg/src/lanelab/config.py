"""Run configuration: defaults, plain-text config files, dotted-key overrides.

A config file holds `section.field = value` lines ('#' starts a comment).
Every field of every section is addressable; unknown keys are rejected so
typos fail loudly. Dumping and re-loading a config reproduces it exactly.
"""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

from .agent import AgentConfig
from .errors import ConfigError
from .idm import IdmParams
from .pursuit import PurePursuitConfig
from .rewards import AdjustRewardParams, DecisionRewardParams
from .world import ScenarioConfig


@dataclass(frozen=True)
class TrainConfig:
    lr: float = 0.0005
    buffer_capacity: int = 5000
    batch_size: int = 64
    eps_start: float = 1.0
    eps_end: float = 0.1
    eps_decay_steps: int = 300_000
    noise_start: float = 1.0
    noise_end: float = 0.05
    noise_decay_steps: int = 300_000
    gamma: float = 0.99
    target_sync_interval: int = 1000
    total_steps: int = 100_000
    seed: int = 0
    a_lo: float = -4.0
    a_hi: float = 2.0
    max_episode_steps: int = 600
    eval_episodes: int = 100

    def __post_init__(self) -> None:
        if min(self.buffer_capacity, self.batch_size, self.eps_decay_steps,
               self.noise_decay_steps, self.target_sync_interval,
               self.max_episode_steps) < 1:
            raise ConfigError("counts must be positive")
        if self.total_steps < 0 or self.eval_episodes < 0 or self.seed < 0:
            raise ConfigError("steps, episodes and seed must be non-negative")
        if self.lr <= 0:
            raise ConfigError("learning rate must be positive")
        if not 0.0 <= self.gamma < 1.0:
            raise ConfigError("gamma must lie in [0, 1)")
        if self.a_lo >= self.a_hi:
            raise ConfigError("empty action interval")


@dataclass(frozen=True)
class RunConfig:
    scenario: ScenarioConfig = field(default_factory=ScenarioConfig)
    idm: IdmParams = field(default_factory=IdmParams)
    decision: DecisionRewardParams = field(default_factory=DecisionRewardParams)
    adjust: AdjustRewardParams = field(default_factory=AdjustRewardParams)
    pursuit: PurePursuitConfig = field(default_factory=PurePursuitConfig)
    agent: AgentConfig = field(default_factory=AgentConfig)
    train: TrainConfig = field(default_factory=TrainConfig)


_SECTIONS = ("scenario", "idm", "decision", "adjust", "pursuit", "agent", "train")


def default_config() -> RunConfig:
    return RunConfig()


def _coerce(current, text: str, key: str):
    try:
        if text.lower() == "none":
            return None
        if isinstance(current, bool):
            if text.lower() in ("true", "1", "yes"):
                return True
            if text.lower() in ("false", "0", "no"):
                return False
            raise ValueError(text)
        if isinstance(current, int):
            return int(text)
        if isinstance(current, float) or current is None:
            return float(text)
        return text
    except ValueError as exc:
        raise ConfigError(f"bad value for {key}: {text!r}") from exc


def apply_overrides(cfg: RunConfig, overrides: dict[str, str]) -> RunConfig:
    """Apply dotted-key string overrides, validating every key and value."""
    staged: dict[str, dict[str, object]] = {}
    for key, text in overrides.items():
        if "." not in key:
            raise ConfigError(f"key {key!r} must look like section.field")
        section, name = key.split(".", 1)
        if section not in _SECTIONS:
            raise ConfigError(f"unknown config section {section!r}")
        block = getattr(cfg, section)
        names = {f.name for f in fields(block)}
        if name not in names:
            raise ConfigError(f"unknown config key {key!r}")
        staged.setdefault(section, {})[name] = _coerce(getattr(block, name), text.strip(), key)
    updates = {}
    for section, kv in staged.items():
        try:
            updates[section] = replace(getattr(cfg, section), **kv)
        except ConfigError:
            raise
        except Exception as exc:
            raise ConfigError(f"invalid {section} config: {exc}") from exc
    return replace(cfg, **updates)


def parse_config_text(text: str, base: RunConfig | None = None) -> RunConfig:
    overrides: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        overrides[key] = value
    return apply_overrides(base or default_config(), overrides)


def load_config(path: str | Path) -> RunConfig:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    return parse_config_text(path.read_text())


def _fmt(value) -> str:
    if value is None:
        return "none"
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def dump_config(cfg: RunConfig) -> str:
    """Render the full config as a loadable key-value file."""
    lines = []
    for section in _SECTIONS:
        block = getattr(cfg, section)
        for f in dataclasses.fields(block):
            lines.append(f"{section}.{f.name} = {_fmt(getattr(block, f.name))}")
    return "\n".join(lines) + "\n"
