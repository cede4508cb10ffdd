"""Proximal policy optimization seller with separate policy and value MLPs.

Both networks share one flat parameter vector (policy block first) and one
Adam optimizer. The policy head emits logits over the action grid.
"""
from dataclasses import dataclass

import numpy as np

from .. import kernels
from .nn import MLPSpec, adam_init, adam_update, backward, clip_grad_norm, forward_with_cache, init_params, mlp_forward


@dataclass(frozen=True)
class PPOParams:
    gamma: float = 0.99
    lr: float = 3e-4
    clip_range: float = 0.2
    gae_lambda: float = 0.95
    n_epochs: int = 10
    batch_size: int = 64
    vf_coef: float = 0.5
    ent_coef: float = 0.01
    normalize_advantage: bool = True
    hidden_sizes: tuple = (64, 64)
    max_grad_norm: float = 0.5

    def __post_init__(self):
        object.__setattr__(self, "hidden_sizes", tuple(self.hidden_sizes))
        if not 0.0 <= self.gamma <= 1.0:
            raise ValueError(f"gamma must lie in [0, 1], got {self.gamma}")
        if not 0.0 <= self.gae_lambda <= 1.0:
            raise ValueError(f"gae_lambda must lie in [0, 1], got {self.gae_lambda}")
        if self.n_epochs < 1 or self.batch_size < 1:
            raise ValueError("n_epochs and batch_size must be >= 1")


def log_softmax(logits):
    z = np.asarray(logits, dtype=np.float64)
    z = z - z.max(axis=-1, keepdims=True)
    return z - np.log(np.exp(z).sum(axis=-1, keepdims=True))


def softmax(logits):
    return np.exp(log_softmax(logits))


def policy_sample(logits, rng):
    """Categorical draw from ``softmax(logits)``; returns ``(index, log_prob)``."""
    logp = log_softmax(logits)
    cdf = np.cumsum(np.exp(logp))
    idx = int(np.searchsorted(cdf, rng.random() * cdf[-1], side="right"))
    idx = min(idx, logp.size - 1)
    return idx, float(logp[idx])


def ppo_gae(rewards, values, bootstrap_value, gamma, lam):
    """Generalized advantage estimates and the matching return targets."""
    return kernels.gae(rewards, values, bootstrap_value, gamma, lam)


class RolloutBuffer:
    def __init__(self, size, obs_size):
        self.size = int(size)
        self.obs = np.zeros((self.size, obs_size))
        self.actions = np.zeros(self.size, dtype=np.int64)
        self.log_probs = np.zeros(self.size)
        self.values = np.zeros(self.size)
        self.rewards = np.zeros(self.size)
        self.pos = 0
        self.last_obs = None

    def add(self, obs, action, log_prob, value, reward):
        if self.pos >= self.size:
            raise RuntimeError("rollout buffer is full")
        i = self.pos
        self.obs[i] = obs
        self.actions[i] = action
        self.log_probs[i] = log_prob
        self.values[i] = value
        self.rewards[i] = reward
        self.pos += 1

    @property
    def full(self):
        return self.pos == self.size

    def finish(self, last_obs):
        self.last_obs = np.asarray(last_obs, dtype=np.float64)

    def reset(self):
        self.pos = 0
        self.last_obs = None


class PPOBrain:
    algorithm = "ppo"

    def __init__(self, obs_size, n_actions, rollout_size, rng, params=PPOParams()):
        self.hp = params
        self.rng = rng
        self.pi_spec = MLPSpec((obs_size, *params.hidden_sizes, n_actions), "tanh")
        self.v_spec = MLPSpec((obs_size, *params.hidden_sizes, 1), "tanh")
        self.split = self.pi_spec.n_params
        self.params = np.concatenate([
            init_params(self.pi_spec, rng, output_gain=0.01),
            init_params(self.v_spec, rng, output_gain=1.0),
        ])
        self.adam = adam_init(self.params.size, params.lr)
        self.rollout = RolloutBuffer(rollout_size, obs_size)
        self._pending = None

    @property
    def pi_params(self):
        return self.params[:self.split]

    @property
    def v_params(self):
        return self.params[self.split:]

    def logits(self, obs):
        return mlp_forward(self.pi_spec, self.pi_params, obs)

    def value(self, obs):
        return float(mlp_forward(self.v_spec, self.v_params, obs)[0])

    def act(self, obs):
        a, logp = policy_sample(self.logits(obs), self.rng)
        self._pending = (np.array(obs, dtype=np.float64), a, logp, self.value(obs))
        return a

    def observe_step(self, obs, action, reward, next_obs, truncated):
        o, a, logp, v = self._pending
        self.rollout.add(o, a, logp, v, reward)
        self._pending = None
        return None

    def end_episode(self, last_obs):
        self.rollout.finish(last_obs)
        stats = ppo_update(self, self.rollout)
        self.rollout.reset()
        return stats


def ppo_loss(pi_spec, v_spec, params, batch, clip, value_coef, entropy_coef):
    """Clipped surrogate + value + entropy loss and its exact gradient.

    ``batch`` holds ``obs``, ``actions``, ``old_log_probs``, ``advantages`` and
    ``returns``. Advantages are used as given (normalize beforehand).
    Returns ``(loss, grad, info)``.
    """
    split = pi_spec.n_params
    obs = batch["obs"]
    actions = np.asarray(batch["actions"])
    adv = np.asarray(batch["advantages"], dtype=np.float64)
    ret = np.asarray(batch["returns"], dtype=np.float64)
    n = actions.shape[0]
    rows = np.arange(n)

    logits, pi_cache = forward_with_cache(pi_spec, params[:split], obs)
    values, v_cache = forward_with_cache(v_spec, params[split:], obs)
    values = values[:, 0]

    logp_all = log_softmax(logits)
    probs = np.exp(logp_all)
    logp = logp_all[rows, actions]
    ratio = np.exp(logp - batch["old_log_probs"])
    clipped = np.clip(ratio, 1.0 - clip, 1.0 + clip)
    surr1 = ratio * adv
    surr2 = clipped * adv
    pg_loss = -np.minimum(surr1, surr2).mean()
    entropy = -(probs * logp_all).sum(axis=1)
    v_err = values - ret
    loss = pg_loss + value_coef * (v_err ** 2).mean() - entropy_coef * entropy.mean()

    # the unclipped branch is active wherever it attains the minimum
    d_ratio = -np.where(surr1 <= surr2, adv, 0.0) / n
    d_logp = d_ratio * ratio
    onehot = np.zeros_like(probs)
    onehot[rows, actions] = 1.0
    d_logits = d_logp[:, None] * (onehot - probs)
    d_logits += entropy_coef * probs * (logp_all + entropy[:, None]) / n
    d_values = (2.0 * value_coef / n) * v_err

    g = np.empty_like(params)
    g[:split] = backward(pi_spec, params[:split], pi_cache, d_logits)
    g[split:] = backward(v_spec, params[split:], v_cache, d_values[:, None])
    info = {
        "pg_loss": float(pg_loss),
        "entropy": float(entropy.mean()),
        "clip_fraction": float((np.abs(ratio - 1.0) > clip).mean()),
    }
    return float(loss), g, info


def ppo_update(brain, rollout):
    """Run the configured epochs of shuffled minibatch steps on one rollout."""
    if not rollout.full or rollout.last_obs is None:
        raise RuntimeError(
            f"rollout incomplete: {rollout.pos}/{rollout.size} steps, "
            f"bootstrap observation {'set' if rollout.last_obs is not None else 'missing'}")
    hp = brain.hp
    bootstrap = brain.value(rollout.last_obs)
    adv, ret = ppo_gae(rollout.rewards, rollout.values, bootstrap, hp.gamma, hp.gae_lambda)

    n = rollout.size
    losses, clips, entropies = [], [], []
    for _ in range(hp.n_epochs):
        order = brain.rng.permutation(n)
        for start in range(0, n, hp.batch_size):
            idx = order[start:start + hp.batch_size]
            a = adv[idx]
            if hp.normalize_advantage and idx.size > 1:
                a = (a - a.mean()) / (a.std() + 1e-8)
            batch = {
                "obs": rollout.obs[idx],
                "actions": rollout.actions[idx],
                "old_log_probs": rollout.log_probs[idx],
                "advantages": a,
                "returns": ret[idx],
            }
            loss, g, info = ppo_loss(brain.pi_spec, brain.v_spec, brain.params, batch,
                                     hp.clip_range, hp.vf_coef, hp.ent_coef)
            g = clip_grad_norm(g, hp.max_grad_norm)
            brain.params, brain.adam = adam_update(brain.params, g, brain.adam)
            losses.append(loss)
            clips.append(info["clip_fraction"])
            entropies.append(info["entropy"])
    return {
        "loss": float(np.mean(losses)),
        "clip_fraction": float(np.mean(clips)),
        "entropy": float(np.mean(entropies)),
    }
