"""Small dense networks: forward pass, reverse-mode gradients, Adam.

Everything is float64 numpy, sized for desk-scale networks where
reproducibility matters more than speed. Inputs may be a single vector or
a (batch, features) matrix; outputs match.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

ACTIVATIONS = ("relu", "softplus", "tanh")
OUTPUT_TRANSFORMS = ("identity", "negated_softplus")


@dataclass(frozen=True)
class MlpSpec:
    layer_sizes: tuple[int, ...]
    hidden_activation: str = "relu"
    output_transform: str = "identity"

    def __post_init__(self) -> None:
        if len(self.layer_sizes) < 2 or any(n < 1 for n in self.layer_sizes):
            raise ValueError("need at least two layers, all sizes >= 1")
        if self.hidden_activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {self.hidden_activation!r}")
        if self.output_transform not in OUTPUT_TRANSFORMS:
            raise ValueError(f"unknown output transform {self.output_transform!r}")


class MlpParams:
    """Per-layer weight and bias arrays. Also used as a gradient container."""

    def __init__(self, weights: list[np.ndarray], biases: list[np.ndarray]):
        self.weights = weights
        self.biases = biases

    def copy(self) -> "MlpParams":
        return MlpParams([w.copy() for w in self.weights], [b.copy() for b in self.biases])

    def arrays(self) -> list[np.ndarray]:
        out: list[np.ndarray] = []
        for w, b in zip(self.weights, self.biases):
            out.append(w)
            out.append(b)
        return out

    def named(self) -> dict[str, np.ndarray]:
        named: dict[str, np.ndarray] = {}
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            named[f"W{i}"] = w
            named[f"b{i}"] = b
        return named

    @classmethod
    def from_named(cls, named: dict[str, np.ndarray]) -> "MlpParams":
        n = len(named) // 2
        return cls([named[f"W{i}"] for i in range(n)], [named[f"b{i}"] for i in range(n)])

    def all_finite(self) -> bool:
        return all(np.all(np.isfinite(a)) for a in self.arrays())


def init_params(spec: MlpSpec, rng: np.random.Generator) -> MlpParams:
    """Glorot-uniform weights, zero biases."""
    weights, biases = [], []
    for fan_in, fan_out in zip(spec.layer_sizes[:-1], spec.layer_sizes[1:]):
        bound = np.sqrt(6.0 / (fan_in + fan_out))
        weights.append(rng.uniform(-bound, bound, size=(fan_in, fan_out)))
        biases.append(np.zeros(fan_out))
    return MlpParams(weights, biases)


def softplus(z: np.ndarray) -> np.ndarray:
    return np.logaddexp(0.0, z)


# softplus underflows to exactly 0 below about -745; keep the negated
# transform strictly negative for every finite input.
_TINY = np.finfo(float).tiny


def negated_softplus(z: np.ndarray) -> np.ndarray:
    return -np.maximum(softplus(z), _TINY)


def sigmoid(z: np.ndarray) -> np.ndarray:
    return np.exp(-np.logaddexp(0.0, -z))


def _activate(name: str, z: np.ndarray) -> np.ndarray:
    if name == "relu":
        return np.maximum(0.0, z)
    if name == "softplus":
        return softplus(z)
    return np.tanh(z)


def _activate_grad(name: str, z: np.ndarray) -> np.ndarray:
    if name == "relu":
        return z > 0.0  # bool mask; multiplication promotes it
    if name == "softplus":
        return sigmoid(z)
    return 1.0 - np.tanh(z) ** 2


@dataclass
class ForwardCache:
    inputs: list[np.ndarray] = field(default_factory=list)   # input to each affine layer
    pre_acts: list[np.ndarray] = field(default_factory=list)  # affine outputs before nonlinearity
    squeezed: bool = False


def mlp_forward(spec: MlpSpec, params: MlpParams, x: np.ndarray) -> tuple[np.ndarray, ForwardCache]:
    """Affine/activation stack with the configured output transform.

    negated_softplus maps the final pre-activation z to -log(1 + e^z),
    which is strictly negative for every finite z.
    """
    x = np.asarray(x, dtype=float)
    squeezed = x.ndim == 1
    X = np.atleast_2d(x)
    if X.shape[1] != spec.layer_sizes[0]:
        raise ValueError(f"input width {X.shape[1]} != {spec.layer_sizes[0]}")
    cache = ForwardCache(squeezed=squeezed)
    n_layers = len(params.weights)
    for i, (w, b) in enumerate(zip(params.weights, params.biases)):
        cache.inputs.append(X)
        Z = X @ w
        Z += b
        cache.pre_acts.append(Z)
        if i < n_layers - 1:
            X = _activate(spec.hidden_activation, Z)
        elif spec.output_transform == "negated_softplus":
            X = negated_softplus(Z)
        else:
            X = Z
    out = X[0] if squeezed else X
    return out, cache


def mlp_backward(spec: MlpSpec, params: MlpParams, cache: ForwardCache, output_gradient: np.ndarray) -> MlpParams:
    """Gradients of sum(output * output_gradient) w.r.t. every parameter."""
    G = np.asarray(output_gradient, dtype=float)
    if cache.squeezed:
        G = np.atleast_2d(G)
    if G.shape != cache.pre_acts[-1].shape:
        raise ValueError(f"output gradient shape {G.shape} != {cache.pre_acts[-1].shape}")
    z_last = cache.pre_acts[-1]
    if spec.output_transform == "negated_softplus":
        dZ = G * (-sigmoid(z_last))
    else:
        dZ = G
    grad_w: list[np.ndarray] = [None] * len(params.weights)  # type: ignore[list-item]
    grad_b: list[np.ndarray] = [None] * len(params.biases)   # type: ignore[list-item]
    for i in range(len(params.weights) - 1, -1, -1):
        grad_w[i] = cache.inputs[i].T @ dZ
        grad_b[i] = dZ.sum(axis=0)
        if i > 0:
            dX = dZ @ params.weights[i].T
            dX *= _activate_grad(spec.hidden_activation, cache.pre_acts[i - 1])
            dZ = dX
    return MlpParams(grad_w, grad_b)


@dataclass
class AdamState:
    """Moment estimates aligned with a flat list of parameter arrays."""

    m: list[np.ndarray]
    v: list[np.ndarray]
    step: int
    lr: float
    beta1: float
    beta2: float
    eps: float
    scratch: list[np.ndarray] = field(default_factory=list, repr=False)


def adam_init(arrays: list[np.ndarray], lr: float = 5e-4, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8) -> AdamState:
    return AdamState(
        m=[np.zeros_like(a) for a in arrays],
        v=[np.zeros_like(a) for a in arrays],
        step=0,
        lr=lr,
        beta1=beta1,
        beta2=beta2,
        eps=eps,
    )


def adam_update(params: list[np.ndarray], grads: list[np.ndarray], state: AdamState) -> tuple[list[np.ndarray], AdamState]:
    """One bias-corrected Adam step, applied in place."""
    if len(params) != len(grads) or len(params) != len(state.m):
        raise ValueError("parameter, gradient and moment counts differ")
    state.step += 1
    if not state.scratch:
        state.scratch = [np.empty_like(a) for a in params]
    c1 = 1.0 - state.beta1 ** state.step
    c2 = 1.0 - state.beta2 ** state.step
    for p, g, m, v, tmp in zip(params, grads, state.m, state.v, state.scratch):
        if p.shape != g.shape:
            raise ValueError(f"shape mismatch {p.shape} vs {g.shape}")
        m *= state.beta1
        np.multiply(g, 1.0 - state.beta1, out=tmp)
        m += tmp
        v *= state.beta2
        np.multiply(g, g, out=tmp)
        tmp *= 1.0 - state.beta2
        v += tmp
        np.sqrt(v, out=tmp)
        tmp *= 1.0 / np.sqrt(c2)
        tmp += state.eps
        np.divide(m, tmp, out=tmp)
        tmp *= state.lr / c1
        p -= tmp
    return params, state
