"""Value models: the quadratic continuous-action head and the discrete DQN.

The quadratic model scores Q(s, a) = A(s) * (B(s) - a)^2 + C(s) with three
small networks. A is forced negative by its output transform, so Q is
strictly concave in the action and the greedy action is B(s) clamped to
the action bounds, with no search.
"""
from __future__ import annotations

import copy

import numpy as np

from .checkpoint import digest_arrays
from .mlp import MlpParams, MlpSpec, init_params, mlp_forward

# Final-layer pinning applied at construction: zero output weights plus
# these biases give A ~ -softplus(-10) (tiny but negative), B = 0 and
# C = -60 for every state.
A_PIN_BIAS = -10.0
B_PIN_BIAS = 0.0
C_PIN_BIAS = -60.0

# Fixed feature scaling applied inside the models. Observations stay raw
# (gaps in meters, speeds in m/s); dividing by these constants puts every
# input at O(1), without which the distance features (hundreds of meters)
# dominate the first layer and TD training destabilizes.
INPUT_SCALE = np.array([100.0, 100.0, 100.0, 10.0, 10.0, 10.0, 3.0])


def _pin_output(params: MlpParams, bias: float) -> None:
    params.weights[-1][:] = 0.0
    params.biases[-1][:] = bias


def _vec(s) -> np.ndarray:
    if hasattr(s, "as_vector"):
        return s.as_vector()
    return np.asarray(s, dtype=float)


def _input_scale(state_dim: int) -> np.ndarray:
    if state_dim == INPUT_SCALE.shape[0]:
        return INPUT_SCALE
    return np.ones(state_dim)


class QuadraticQModel:
    """Concave-in-action Q-function with a closed-form greedy action."""

    def __init__(
        self,
        state_dim: int = 7,
        action_bounds: tuple[float, float] = (-4.0, 2.0),
        hidden_a: int = 150,
        hidden_b: int = 200,
        hidden_c: int = 150,
        seed: int | None = 0,
    ):
        if action_bounds[0] >= action_bounds[1]:
            raise ValueError("empty action interval")
        self.state_dim = state_dim
        self.action_bounds = (float(action_bounds[0]), float(action_bounds[1]))
        self.input_scale = _input_scale(state_dim)
        self.spec_a = MlpSpec((state_dim, hidden_a, 1), "relu", "negated_softplus")
        self.spec_b = MlpSpec((state_dim, hidden_b, hidden_b, 1), "relu", "identity")
        self.spec_c = MlpSpec((state_dim, hidden_c, 1), "relu", "identity")
        rng = np.random.default_rng(seed)
        self.params_a = init_params(self.spec_a, rng)
        self.params_b = init_params(self.spec_b, rng)
        self.params_c = init_params(self.spec_c, rng)
        _pin_output(self.params_a, A_PIN_BIAS)
        _pin_output(self.params_b, B_PIN_BIAS)
        _pin_output(self.params_c, C_PIN_BIAS)

    def terms(self, s) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """(A, B, C) for one state (scalars) or a batch (arrays)."""
        x = _vec(s) / self.input_scale
        a, _ = mlp_forward(self.spec_a, self.params_a, x)
        b, _ = mlp_forward(self.spec_b, self.params_b, x)
        c, _ = mlp_forward(self.spec_c, self.params_c, x)
        if x.ndim == 1:
            return float(a[0]), float(b[0]), float(c[0])
        return a[:, 0], b[:, 0], c[:, 0]

    def terms_with_caches(self, x: np.ndarray):
        x = np.asarray(x, dtype=float) / self.input_scale
        a, ca = mlp_forward(self.spec_a, self.params_a, x)
        b, cb = mlp_forward(self.spec_b, self.params_b, x)
        c, cc = mlp_forward(self.spec_c, self.params_c, x)
        return (a[:, 0], ca), (b[:, 0], cb), (c[:, 0], cc)

    def max_value(self, s):
        return max_q(self, s)

    def arrays(self) -> list[np.ndarray]:
        return self.params_a.arrays() + self.params_b.arrays() + self.params_c.arrays()

    def named_arrays(self) -> dict[str, np.ndarray]:
        named = {}
        for prefix, params in (("A", self.params_a), ("B", self.params_b), ("C", self.params_c)):
            for name, arr in params.named().items():
                named[f"{prefix}.{name}"] = arr
        return named

    def load_named(self, named: dict[str, np.ndarray]) -> None:
        for target, other in zip(self.arrays(), QuadraticQModel._order_named(named)):
            if target.shape != other.shape:
                raise ValueError("checkpoint shape mismatch")
            target[:] = other

    @staticmethod
    def _order_named(named: dict[str, np.ndarray]) -> list[np.ndarray]:
        out = []
        for prefix in ("A", "B", "C"):
            n = sum(1 for k in named if k.startswith(prefix + ".W"))
            for i in range(n):
                out.append(named[f"{prefix}.W{i}"])
                out.append(named[f"{prefix}.b{i}"])
        return out

    def copy(self) -> "QuadraticQModel":
        return copy.deepcopy(self)

    def all_finite(self) -> bool:
        return all(np.all(np.isfinite(a)) for a in self.arrays())

    def digest(self) -> str:
        return digest_arrays(self.named_arrays())


def quadratic_q_value(model: QuadraticQModel, s, a: float) -> float:
    A, B, C = model.terms(s)
    return A * (B - a) ** 2 + C


def greedy_action(model: QuadraticQModel, s) -> float:
    """The action maximizing Q(s, .), clamped to the action bounds."""
    _, B, _ = model.terms(s)
    lo, hi = model.action_bounds
    return float(min(hi, max(lo, B)))


def max_q(model: QuadraticQModel, s) -> float:
    """Q at the greedy action; equals C(s) whenever B(s) is in bounds."""
    A, B, C = model.terms(s)
    lo, hi = model.action_bounds
    g = min(hi, max(lo, B))
    return A * (B - g) ** 2 + C


def select_continuous(model: QuadraticQModel, s, noise_std: float, rng: np.random.Generator | None = None) -> float:
    """Greedy action with optional Gaussian exploration, kept in bounds."""
    if noise_std < 0:
        raise ValueError("noise_std must be non-negative")
    a = greedy_action(model, s)
    if noise_std > 0:
        if rng is None:
            raise ValueError("exploration requires an rng")
        a += rng.normal(0.0, noise_std)
    lo, hi = model.action_bounds
    return float(min(hi, max(lo, a)))


class DqnModel:
    """Two-hidden-layer Q-network over the two discrete decisions."""

    def __init__(self, state_dim: int = 7, n_actions: int = 2, hidden: int = 128, seed: int | None = 0):
        self.spec = MlpSpec((state_dim, hidden, hidden, n_actions), "relu", "identity")
        self.params = init_params(self.spec, np.random.default_rng(seed))
        self.input_scale = _input_scale(state_dim)

    def q_values(self, s) -> np.ndarray:
        out, _ = mlp_forward(self.spec, self.params, _vec(s) / self.input_scale)
        return out

    def q_values_with_cache(self, s):
        return mlp_forward(self.spec, self.params, _vec(s) / self.input_scale)

    def max_value(self, s) -> float:
        q = self.q_values(s)
        return float(np.max(q, axis=-1))

    def arrays(self) -> list[np.ndarray]:
        return self.params.arrays()

    def named_arrays(self) -> dict[str, np.ndarray]:
        return self.params.named()

    def load_named(self, named: dict[str, np.ndarray]) -> None:
        loaded = MlpParams.from_named(named)
        for target, other in zip(self.arrays(), loaded.arrays()):
            if target.shape != other.shape:
                raise ValueError("checkpoint shape mismatch")
            target[:] = other

    def copy(self) -> "DqnModel":
        return copy.deepcopy(self)

    def all_finite(self) -> bool:
        return self.params.all_finite()

    def digest(self) -> str:
        return digest_arrays(self.named_arrays())


def select_discrete(dqn: DqnModel, s, eps: float, rng: np.random.Generator | None = None) -> int:
    """Epsilon-greedy over the two decisions; exact ties resolve to 0 (stay)."""
    if not 0.0 <= eps <= 1.0:
        raise ValueError("eps must lie in [0, 1]")
    if eps > 0:
        if rng is None:
            raise ValueError("exploration requires an rng")
        if rng.random() < eps:
            return int(rng.integers(0, 2))
    q = dqn.q_values(s)
    return 1 if q[1] > q[0] else 0


def sync_target(online, target):
    """Overwrite the target model's parameters with a deep copy of online's."""
    for dst, src in zip(target.arrays(), online.arrays()):
        dst[:] = src
    return target


def model_digest(model) -> str:
    return model.digest()
