import numpy as np
import pytest

from conftest import numeric_grad, pin_quadratic, randomize_quadratic, random_states, rel_err
from lanelab.learning import (
    EpsilonSchedule,
    dqn_loss_and_grads,
    epsilon_at,
    quadratic_loss_and_grads,
    td_target,
    train_step_dqn,
    train_step_quadratic,
)
from lanelab.mlp import adam_init
from lanelab.qmodels import (
    DqnModel,
    QuadraticQModel,
    greedy_action,
    max_q,
    quadratic_q_value,
    select_continuous,
    select_discrete,
    sync_target,
)
from lanelab.replay import ReplayBuffer, Transition


def small_model(seed=0, randomized=False):
    m = QuadraticQModel(hidden_a=12, hidden_b=16, hidden_c=12, seed=seed)
    if randomized:
        randomize_quadratic(m, np.random.default_rng(seed))
    return m


# ------------------------------------------------------------- quadratic Q

def test_vertex_value_is_c():
    m = small_model(randomized=True)
    rng = np.random.default_rng(1)
    for s in random_states(rng, 20):
        A, B, C = m.terms(s)
        assert quadratic_q_value(m, s, B) == pytest.approx(C, abs=1e-12)


def test_pinned_value_hand_computed():
    m = pin_quadratic(small_model(), -1.0, 2.0, 5.0)
    s = np.zeros(7)
    assert quadratic_q_value(m, s, 0.0) == pytest.approx(1.0, abs=1e-9)


def test_off_vertex_below_c():
    m = small_model(randomized=True)
    rng = np.random.default_rng(2)
    for s in random_states(rng, 20):
        A, B, C = m.terms(s)
        assert quadratic_q_value(m, s, B + 1.3) < C
        assert quadratic_q_value(m, s, B - 0.7) < C


def test_concavity_midpoint_property():
    m = small_model(randomized=True)
    rng = np.random.default_rng(3)
    for s in random_states(rng, 20):
        a1, a2 = rng.uniform(-4, 2, 2)
        mid = quadratic_q_value(m, s, (a1 + a2) / 2)
        avg = (quadratic_q_value(m, s, a1) + quadratic_q_value(m, s, a2)) / 2
        assert mid >= avg - 1e-12
        if abs(a1 - a2) > 1e-6:
            assert mid > avg


def test_greedy_never_beaten_by_grid():
    rng = np.random.default_rng(4)
    for trial in range(50):
        m = small_model(seed=trial, randomized=True)
        s = random_states(rng, 1)[0]
        g = greedy_action(m, s)
        best = max(quadratic_q_value(m, s, a) for a in np.linspace(-4, 2, 601))
        assert best <= quadratic_q_value(m, s, g) + 1e-9


def test_greedy_clamps_to_bounds():
    m = pin_quadratic(small_model(), -1.0, 10.0, 0.0)
    assert greedy_action(m, np.zeros(7)) == 2.0
    m2 = pin_quadratic(small_model(), -1.0, 0.5, 0.0)
    assert greedy_action(m2, np.zeros(7)) == 0.5


def test_max_q_identity_and_clamped_case():
    m = small_model(randomized=True)
    rng = np.random.default_rng(5)
    for s in random_states(rng, 30):
        A, B, C = m.terms(s)
        if -4.0 <= B <= 2.0:
            assert max_q(m, s) == C
    clamped = pin_quadratic(small_model(), -1.0, 10.0, 0.0)
    assert max_q(clamped, np.zeros(7)) == pytest.approx(-64.0, abs=1e-9)


def test_fresh_model_pinned_initialization():
    m = QuadraticQModel(seed=123)
    rng = np.random.default_rng(6)
    for s in random_states(rng, 100):
        A, B, C = m.terms(s)
        assert abs(A) < 1e-3
        assert abs(B) < 1e-3
        assert abs(C + 60.0) < 1e-3
        assert A < 0.0
        assert max_q(m, s) == pytest.approx(-60.0, abs=1e-3)


# ------------------------------------------------------------- td target

def test_td_target_cases():
    m = pin_quadratic(small_model(), -1.0, 0.0, -60.0)
    s = np.zeros(7)
    assert td_target(-100.0, s, True, 0.99, m) == -100.0
    assert td_target(1.0, s, False, 0.99, m) == pytest.approx(-58.4, abs=1e-9)
    assert td_target(3.5, s, False, 0.0, m) == 3.5


def test_td_target_discrete_max():
    from conftest import pin_dqn
    dqn = pin_dqn(DqnModel(hidden=8), 2.0, 7.0)
    assert td_target(1.0, np.zeros(7), False, 0.5, dqn) == pytest.approx(4.5)


# ------------------------------------------------------------- replay buffer

def _tr(i):
    return Transition(np.array([float(i)]), 0.0, 0.0, np.array([float(i)]), False)


def test_buffer_fifo_eviction_at_capacity():
    buf = ReplayBuffer(5000, seed=0)
    for i in range(5001):
        buf.push(_tr(i))
    assert len(buf) == 5000
    stored = [int(t.s[0]) for t in buf]
    assert 0 not in stored
    assert stored == list(range(1, 5001))


def test_buffer_push_and_order():
    buf = ReplayBuffer(10, seed=0)
    buf.push(_tr(0))
    assert len(buf) == 1
    for i in range(1, 7):
        buf.push(_tr(i))
    assert [int(t.s[0]) for t in buf] == list(range(7))


def test_buffer_sample_not_ready():
    buf = ReplayBuffer(10, seed=0)
    buf.push(_tr(0))
    assert buf.sample(2) is None
    assert buf.sample(1) == [_tr(0)]


def test_buffer_sampling_deterministic():
    def filled(seed):
        buf = ReplayBuffer(100, seed=seed)
        for i in range(100):
            buf.push(_tr(i))
        return buf

    a, b = filled(7), filled(7)
    batch_a = [int(t.s[0]) for t in a.sample(32)]
    batch_b = [int(t.s[0]) for t in b.sample(32)]
    assert batch_a == batch_b


def test_buffer_sampling_uniform():
    buf = ReplayBuffer(10, seed=42)
    for i in range(10):
        buf.push(_tr(i))
    counts = np.zeros(10)
    draws = 100_000
    for _ in range(draws // 10):
        for t in buf.sample(10):
            counts[int(t.s[0])] += 1
    # binomial: mean n*p, sd sqrt(n*p*(1-p)); stay within 5 sigma
    expect = draws / 10
    sigma = np.sqrt(draws * 0.1 * 0.9)
    assert np.all(np.abs(counts - expect) < 5 * sigma)


# ------------------------------------------------------------- schedules

def test_epsilon_schedule_endpoints_and_midpoint():
    sched = EpsilonSchedule()
    assert epsilon_at(sched, 0) == 1.0
    assert epsilon_at(sched, 300_000) == 0.1
    assert epsilon_at(sched, 600_000) == 0.1
    assert epsilon_at(sched, 150_000) == pytest.approx(0.55)


def test_epsilon_monotone_nonincreasing():
    sched = EpsilonSchedule()
    values = [epsilon_at(sched, s) for s in range(0, 400_000, 2_500)]
    assert all(a >= b for a, b in zip(values, values[1:]))


def test_epsilon_schedule_validation():
    with pytest.raises(ValueError):
        EpsilonSchedule(eps_start=0.1, eps_end=0.5)
    with pytest.raises(ValueError):
        epsilon_at(EpsilonSchedule(), -1)


# ------------------------------------------------------------- action selection

def test_select_discrete_argmax_and_tiebreak():
    from conftest import pin_dqn
    dqn = pin_dqn(DqnModel(hidden=8), 3.0, 5.0)
    assert select_discrete(dqn, np.zeros(7), 0.0) == 1
    tie = pin_dqn(DqnModel(hidden=8), 4.0, 4.0)
    assert select_discrete(tie, np.zeros(7), 0.0) == 0


def test_select_discrete_uniform_at_full_epsilon():
    from conftest import pin_dqn
    dqn = pin_dqn(DqnModel(hidden=8), 3.0, 5.0)
    rng = np.random.default_rng(8)
    draws = 100_000
    ones = sum(select_discrete(dqn, np.zeros(7), 1.0, rng) for _ in range(draws))
    assert abs(ones / draws - 0.5) < 0.01


def test_select_continuous_greedy_and_bounds():
    m = pin_quadratic(small_model(), -1.0, 0.8, 0.0)
    assert select_continuous(m, np.zeros(7), 0.0) == pytest.approx(0.8)
    rng = np.random.default_rng(9)
    for _ in range(200):
        a = select_continuous(m, np.zeros(7), 3.0, rng)
        assert -4.0 <= a <= 2.0


def test_select_continuous_mean_near_greedy():
    m = pin_quadratic(small_model(), -1.0, 0.5, 0.0)
    rng = np.random.default_rng(10)
    draws = [select_continuous(m, np.zeros(7), 0.5, rng) for _ in range(10_000)]
    assert abs(np.mean(draws) - 0.5) < 0.02


# ------------------------------------------------------------- training steps

def _batch_for(model, rng, n=8, terminal_value=None):
    batch = []
    for s in random_states(rng, n):
        a = float(rng.uniform(-4, 2))
        s2 = random_states(rng, 1)[0]
        r = float(rng.uniform(-3, 0))
        batch.append(Transition(s, a, r, s2, False))
    return batch


def test_train_quadratic_consistent_batch_noop():
    model = small_model(randomized=True)
    target = model.copy()
    rng = np.random.default_rng(11)
    S = random_states(rng, 6)
    acts = rng.uniform(-4, 2, 6)
    # terminal rewards equal to the batched predictions: zero TD error
    A, B, C = model.terms(S)
    rewards = A * (B - acts) ** 2 + C
    batch = [Transition(S[i], float(acts[i]), float(rewards[i]), S[i], True) for i in range(6)]
    before = [arr.copy() for arr in model.arrays()]
    adam = adam_init(model.arrays())
    _, loss = train_step_quadratic(model, target, batch, 0.99, adam)
    assert loss == 0.0
    for arr, prev in zip(model.arrays(), before):
        assert np.array_equal(arr, prev)


def test_train_quadratic_loss_nonnegative_and_target_untouched():
    model = small_model(randomized=True)
    target = small_model(seed=5, randomized=True)
    target_digest = target.digest()
    rng = np.random.default_rng(12)
    adam = adam_init(model.arrays())
    for _ in range(5):
        _, loss = train_step_quadratic(model, target, _batch_for(model, rng), 0.99, adam)
        assert loss >= 0.0
    assert target.digest() == target_digest


def test_quadratic_gradients_match_finite_differences():
    model = small_model(randomized=True)
    target = small_model(seed=3, randomized=True)
    rng = np.random.default_rng(13)
    batch = [Transition(random_states(rng, 1)[0], 0.7, -1.0, random_states(rng, 1)[0], False)]
    loss, grads = quadratic_loss_and_grads(model, target, batch, 0.99)

    def loss_fn():
        return quadratic_loss_and_grads(model, target, batch, 0.99)[0]

    arrays = model.arrays()
    for arr, g in zip(arrays, grads):
        for _ in range(3):
            idx = tuple(int(rng.integers(0, s)) for s in arr.shape)
            num = numeric_grad(loss_fn, arr, idx)
            if abs(num) < 1e-12 and abs(g[idx]) < 1e-12:
                continue
            assert rel_err(num, g[idx]) < 1e-4


def test_train_dqn_consistent_batch_noop():
    dqn = DqnModel(hidden=16, seed=2)
    target = dqn.copy()
    rng = np.random.default_rng(14)
    S = random_states(rng, 6)
    actions = rng.integers(0, 2, 6)
    q = dqn.q_values(S)  # batched, the same path the update uses
    batch = [Transition(S[i], int(actions[i]), float(q[i, actions[i]]), S[i], True) for i in range(6)]
    before = [a.copy() for a in dqn.arrays()]
    adam = adam_init(dqn.arrays())
    _, loss = train_step_dqn(dqn, target, batch, 0.99, adam)
    assert loss == 0.0
    for arr, prev in zip(dqn.arrays(), before):
        assert np.array_equal(arr, prev)


def test_dqn_gradients_match_finite_differences():
    dqn = DqnModel(hidden=12, seed=4)
    target = DqnModel(hidden=12, seed=9)
    rng = np.random.default_rng(15)
    batch = [Transition(random_states(rng, 1)[0], 1, -2.0, random_states(rng, 1)[0], False),
             Transition(random_states(rng, 1)[0], 0, -0.5, random_states(rng, 1)[0], True)]
    _, grads = dqn_loss_and_grads(dqn, target, batch, 0.99)

    def loss_fn():
        return dqn_loss_and_grads(dqn, target, batch, 0.99)[0]

    for arr, g in zip(dqn.arrays(), grads):
        for _ in range(3):
            idx = tuple(int(rng.integers(0, s)) for s in arr.shape)
            num = numeric_grad(loss_fn, arr, idx)
            if abs(num) < 1e-12 and abs(g[idx]) < 1e-12:
                continue
            assert rel_err(num, g[idx]) < 1e-4


def test_dqn_loss_nonnegative():
    dqn = DqnModel(hidden=12, seed=4)
    target = dqn.copy()
    rng = np.random.default_rng(16)
    adam = adam_init(dqn.arrays())
    for _ in range(5):
        batch = [Transition(random_states(rng, 1)[0], int(rng.integers(0, 2)),
                            float(rng.uniform(-5, 0)), random_states(rng, 1)[0], False)
                 for _ in range(8)]
        _, loss = train_step_dqn(dqn, target, batch, 0.99, adam)
        assert loss >= 0.0


# ------------------------------------------------------------- target sync

def test_sync_target_agreement_and_isolation():
    online = small_model(seed=21, randomized=True)
    target = small_model(seed=22, randomized=True)
    sync_target(online, target)
    rng = np.random.default_rng(17)
    states = random_states(rng, 100)
    for s in states:
        assert max_q(online, s) == max_q(target, s)
    # updating online afterwards leaves the target untouched
    snapshot = target.digest()
    online.params_c.biases[-1][:] += 1.0
    assert target.digest() == snapshot
    assert max_q(online, states[0]) != max_q(target, states[0])


def test_sync_target_idempotent():
    online = small_model(seed=23, randomized=True)
    target = small_model(seed=24, randomized=True)
    sync_target(online, target)
    once = target.digest()
    sync_target(online, target)
    assert target.digest() == once
