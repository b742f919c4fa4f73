"""Temporal-difference training for both value models."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .mlp import AdamState, adam_update, mlp_backward
from .qmodels import DqnModel, QuadraticQModel
from .replay import Transition


@dataclass(frozen=True)
class EpsilonSchedule:
    """Linear decay from eps_start to eps_end over decay_steps, then flat."""

    eps_start: float = 1.0
    eps_end: float = 0.1
    decay_steps: int = 300_000

    def __post_init__(self) -> None:
        if not 0.0 <= self.eps_end <= self.eps_start <= 1.0:
            raise ValueError("need 0 <= eps_end <= eps_start <= 1")
        if self.decay_steps < 1:
            raise ValueError("decay_steps must be positive")


def epsilon_at(sched: EpsilonSchedule, step: int) -> float:
    if step < 0:
        raise ValueError("step must be non-negative")
    if step >= sched.decay_steps:
        return sched.eps_end
    frac = step / sched.decay_steps
    return sched.eps_start + (sched.eps_end - sched.eps_start) * frac


def td_target(r: float, s_next, terminal: bool, gamma: float, target_model) -> float:
    """Bootstrapped regression target: r, plus the discounted best value at s_next."""
    if not 0.0 <= gamma < 1.0:
        raise ValueError("gamma must lie in [0, 1)")
    if terminal:
        return float(r)
    return float(r) + gamma * float(target_model.max_value(s_next))


def _stack(batch: list[Transition]):
    s = np.stack([np.asarray(t.s, dtype=float) for t in batch])
    a = np.array([t.a for t in batch], dtype=float)
    r = np.array([t.r for t in batch], dtype=float)
    s_next = np.stack([np.asarray(t.s_next, dtype=float) for t in batch])
    cont = np.array([0.0 if t.terminal else 1.0 for t in batch])
    return s, a, r, s_next, cont


def _batch_max_q(model: QuadraticQModel, states: np.ndarray) -> np.ndarray:
    A, B, C = model.terms(states)
    lo, hi = model.action_bounds
    g = np.clip(B, lo, hi)
    return A * (B - g) ** 2 + C


def quadratic_loss_and_grads(
    model: QuadraticQModel,
    target_model: QuadraticQModel,
    batch: list[Transition],
    gamma: float,
) -> tuple[float, list[np.ndarray]]:
    """Mean squared TD error and its gradients through all three networks.

    The gradient list is aligned with model.arrays().
    """
    if not batch:
        raise ValueError("empty batch")
    s, a, r, s_next, cont = _stack(batch)
    y = r + gamma * _batch_max_q(target_model, s_next) * cont
    (A, cache_a), (B, cache_b), (C, cache_c) = model.terms_with_caches(s)
    q = A * (B - a) ** 2 + C
    diff = q - y
    loss = float(np.mean(diff**2))
    g = (2.0 / len(batch)) * diff
    grads_a = mlp_backward(model.spec_a, model.params_a, cache_a, (g * (B - a) ** 2)[:, None])
    grads_b = mlp_backward(model.spec_b, model.params_b, cache_b, (g * 2.0 * A * (B - a))[:, None])
    grads_c = mlp_backward(model.spec_c, model.params_c, cache_c, g[:, None])
    return loss, grads_a.arrays() + grads_b.arrays() + grads_c.arrays()


def train_step_quadratic(
    model: QuadraticQModel,
    target_model: QuadraticQModel,
    batch: list[Transition],
    gamma: float,
    adam: AdamState,
) -> tuple[QuadraticQModel, float]:
    """One squared-TD-error gradient step through all three networks jointly."""
    loss, grads = quadratic_loss_and_grads(model, target_model, batch, gamma)
    adam_update(model.arrays(), grads, adam)
    return model, loss


def dqn_loss_and_grads(
    dqn: DqnModel,
    target_dqn: DqnModel,
    batch: list[Transition],
    gamma: float,
) -> tuple[float, list[np.ndarray]]:
    """Mean squared TD error on the taken-action outputs, with gradients."""
    if not batch:
        raise ValueError("empty batch")
    s, a, r, s_next, cont = _stack(batch)
    actions = a.astype(int)
    q_next = target_dqn.q_values(s_next)
    y = r + gamma * q_next.max(axis=1) * cont
    q, cache = dqn.q_values_with_cache(s)
    taken = q[np.arange(len(batch)), actions]
    diff = taken - y
    loss = float(np.mean(diff**2))
    grad_out = np.zeros_like(q)
    grad_out[np.arange(len(batch)), actions] = (2.0 / len(batch)) * diff
    grads = mlp_backward(dqn.spec, dqn.params, cache, grad_out)
    return loss, grads.arrays()


def train_step_dqn(
    dqn: DqnModel,
    target_dqn: DqnModel,
    batch: list[Transition],
    gamma: float,
    adam: AdamState,
) -> tuple[DqnModel, float]:
    """One squared-TD-error step on the taken-action outputs only."""
    loss, grads = dqn_loss_and_grads(dqn, target_dqn, batch, gamma)
    adam_update(dqn.arrays(), grads, adam)
    return dqn, loss
