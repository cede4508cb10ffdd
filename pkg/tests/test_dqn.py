import numpy as np
import pytest
from scipy import stats

from oracles import central_diff, max_rel_err, train_bandit_dqn
from pricelab.learn.dqn import (
    DQNBrain, DQNParams, ReplayBuffer, dqn_select_action, dqn_td_targets, dqn_update, huber_loss,
)
from pricelab.learn.nn import MLPSpec, init_params, mlp_forward


def test_greedy_and_ties(rng):
    assert dqn_select_action([1, 3, 2], 0.0, rng) == 1
    assert dqn_select_action([5, 5], 0.0, rng) == 0


def test_select_errors(rng):
    with pytest.raises(ValueError):
        dqn_select_action([], 0.1, rng)
    with pytest.raises(ValueError):
        dqn_select_action([1.0], 1.5, rng)


def test_uniform_exploration():
    rng = np.random.default_rng(99)
    draws = np.array([dqn_select_action(np.arange(7.0), 1.0, rng) for _ in range(60_000)])
    freq = np.bincount(draws, minlength=7) / draws.size
    assert np.abs(freq - 1 / 7).max() < 0.01
    assert stats.chisquare(np.bincount(draws, minlength=7)).pvalue > 1e-3


def _batch(rng, n=8, obs=3):
    return {
        "obs": rng.normal(size=(n, obs)),
        "actions": rng.integers(0, 4, n),
        "rewards": rng.normal(size=n),
        "next_obs": rng.normal(size=(n, obs)),
        "truncated": rng.random(n) < 0.3,
    }


def test_td_targets(rng):
    spec = MLPSpec((3, 8, 4), "relu")
    theta = init_params(spec, rng, scheme="uniform")
    b = _batch(rng)
    assert np.array_equal(dqn_td_targets(b, spec, theta, 0.0), b["rewards"])
    y = dqn_td_targets(b, spec, theta, 0.99)
    loop = [b["rewards"][i] + 0.99 * mlp_forward(spec, theta, b["next_obs"][i]).max() for i in range(8)]
    np.testing.assert_allclose(y, loop, rtol=0, atol=1e-12)


def test_td_target_arithmetic():
    spec = MLPSpec((1, 2), "linear")
    theta = np.array([0.0, 0.0, 2.0, -1.0])  # constant outputs (2, -1)
    b = {"rewards": np.array([1.0]), "next_obs": np.array([[0.3]])}
    assert dqn_td_targets(b, spec, theta, 0.99)[0] == pytest.approx(2.98, abs=1e-12)


def test_truncation_still_bootstraps(rng):
    spec = MLPSpec((3, 8, 4), "relu")
    theta = init_params(spec, rng, scheme="uniform")
    b = _batch(rng)
    b2 = dict(b, truncated=np.ones(8, dtype=bool))
    assert np.array_equal(dqn_td_targets(b, spec, theta, 0.9), dqn_td_targets(b2, spec, theta, 0.9))


def test_huber_gradient_fd(rng):
    spec = MLPSpec((3, 6, 4), "relu")
    for _ in range(10):
        theta = rng.normal(size=spec.n_params)
        b = _batch(rng, 12)
        y = rng.normal(scale=3.0, size=12)
        loss, g = huber_loss(spec, theta, b["obs"], b["actions"], y)
        fd = central_diff(lambda t: huber_loss(spec, t, b["obs"], b["actions"], y)[0], theta)
        assert max_rel_err(g, fd) < 1e-4


def test_perfect_q_is_stationary(rng):
    brain = DQNBrain(3, 4, 100, rng, DQNParams(gamma=0.0))
    b = _batch(rng)
    q = mlp_forward(brain.spec, brain.params, b["obs"])
    b["rewards"] = q[np.arange(8), b["actions"]]
    before = brain.params.copy()
    assert dqn_update(brain, b) == 0.0
    assert np.array_equal(brain.params, before)


def test_loss_decreases_on_fixed_batch(rng):
    brain = DQNBrain(3, 4, 100, rng, DQNParams(lr=1e-3))
    b = _batch(rng, 32)
    losses = [dqn_update(brain, b) for _ in range(100)]
    assert int((np.diff(losses) > 0).sum()) <= 5
    assert losses[-1] < losses[0]


def test_bandit_converges():
    q = train_bandit_dqn()
    np.testing.assert_allclose(q, [0.0, 1.0], atol=0.05)


def test_target_sync_schedule(rng):
    brain = DQNBrain(3, 4, 100, rng, DQNParams(target_update_interval=5, lr=1e-2))
    b = _batch(rng)
    initial = brain.target_params.copy()
    for k in range(1, 13):
        snapshot = brain.target_params.copy()
        dqn_update(brain, b)
        if k % 5 == 0:
            assert np.array_equal(brain.target_params, brain.params)
            assert brain.target_params is not brain.params
        else:
            assert np.array_equal(brain.target_params, snapshot)
    assert not np.array_equal(initial, brain.target_params)


def test_replay_ring_evicts_oldest(rng):
    buf = ReplayBuffer(5, 1)
    for i in range(12):
        buf.add([i], 0, float(i), [i + 1])
        assert len(buf) <= 5
    kept = buf.rewards[buf.ordered_indices()]
    assert kept.tolist() == [7, 8, 9, 10, 11]
    s = buf.sample(5, rng)
    assert sorted(s["rewards"].tolist()) == [7, 8, 9, 10, 11]
    with pytest.raises(ValueError):
        buf.sample(6, rng)


def test_epsilon_schedule(rng):
    brain = DQNBrain(2, 3, 1000, rng)
    assert brain.epsilon() == 1.0
    brain.env_steps = 50
    assert brain.epsilon() == pytest.approx(1.0 - 0.5 * 0.95)
    brain.env_steps = 100
    assert brain.epsilon() == pytest.approx(0.05)
    brain.env_steps = 900
    assert brain.epsilon() == pytest.approx(0.05)


def test_training_cadence(rng):
    brain = DQNBrain(2, 3, 10_000, rng, DQNParams(learning_starts=40, train_freq=4, batch_size=8))
    trained = []
    for t in range(60):
        loss = brain.observe_step(np.zeros(2), t % 3, 1.0, np.zeros(2), False)
        trained.append(loss is not None)
    steps = [i + 1 for i, f in enumerate(trained) if f]
    assert steps == [40, 44, 48, 52, 56, 60]
    assert brain.grad_steps == 6
