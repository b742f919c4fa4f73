"""Shared test helpers: model pinning and finite-difference oracles."""
from __future__ import annotations

import math

import numpy as np

from lanelab.qmodels import DqnModel, QuadraticQModel


def pin_quadratic(model: QuadraticQModel, a: float, b: float, c: float) -> QuadraticQModel:
    """Force constant A(s)=a, B(s)=b, C(s)=c via the final layers (a < 0)."""
    assert a < 0, "the curvature coefficient is negative by construction"
    model.params_a.weights[-1][:] = 0.0
    model.params_a.biases[-1][:] = math.log(math.expm1(-a))  # softplus inverse
    model.params_b.weights[-1][:] = 0.0
    model.params_b.biases[-1][:] = b
    model.params_c.weights[-1][:] = 0.0
    model.params_c.biases[-1][:] = c
    return model


def randomize_quadratic(model: QuadraticQModel, rng: np.random.Generator) -> QuadraticQModel:
    """Random but sanely scaled model.

    The model scales its own inputs to O(1), so 1/sqrt(fan) weights keep
    activations moderate; the curvature net's output layer stays in a mild
    negative range so Q values land where float comparisons are meaningful.
    """
    for params in (model.params_a, model.params_b, model.params_c):
        for w, b in zip(params.weights, params.biases):
            w[:] = rng.normal(0.0, 1.0 / math.sqrt(w.shape[0]), size=w.shape)
            b[:] = rng.normal(0.0, 0.3, size=b.shape)
    wa, ba = model.params_a.weights[-1], model.params_a.biases[-1]
    wa[:] = rng.normal(0.0, 0.1, size=wa.shape)
    ba[:] = rng.normal(-1.0, 0.5, size=ba.shape)
    return model


def pin_dqn(dqn: DqnModel, q0: float, q1: float) -> DqnModel:
    dqn.params.weights[-1][:] = 0.0
    dqn.params.biases[-1][:] = (q0, q1)
    return dqn


def numeric_grad(loss_fn, array: np.ndarray, index: tuple, h: float = 1e-5) -> float:
    """Central finite difference of loss_fn w.r.t. one array entry."""
    orig = array[index]
    array[index] = orig + h
    up = loss_fn()
    array[index] = orig - h
    down = loss_fn()
    array[index] = orig
    return (up - down) / (2.0 * h)


def rel_err(a: float, b: float, floor: float = 1e-8) -> float:
    return abs(a - b) / max(abs(a), abs(b), floor)


def random_states(rng: np.random.Generator, n: int) -> np.ndarray:
    """Plausible observation vectors: gaps, speed differences, speed, accel."""
    return np.column_stack([
        rng.uniform(0.0, 200.0, n),    # dx_leader
        rng.uniform(0.0, 200.0, n),    # dx_target
        rng.uniform(-20.0, 200.0, n),  # dx_follow
        rng.uniform(-18.0, 18.0, n),   # dv_leader
        rng.uniform(-18.0, 18.0, n),   # dv_target
        rng.uniform(0.0, 38.0, n),     # v_ego
        rng.uniform(-8.0, 3.0, n),     # a_ego
    ])
