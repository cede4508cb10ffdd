"""Deep Q-network seller: replay buffer, target network, epsilon-greedy."""
from dataclasses import dataclass

import numpy as np

from .nn import MLPSpec, adam_init, adam_update, clip_grad_norm, init_params, mlp_forward, value_and_grad


@dataclass(frozen=True)
class DQNParams:
    gamma: float = 0.99
    lr: float = 1e-4
    batch_size: int = 32
    buffer_size: int = 50_000
    target_update_interval: int = 500
    train_freq: int = 4
    learning_starts: int = 1000
    exploration_fraction: float = 0.1
    exploration_initial_eps: float = 1.0
    exploration_final_eps: float = 0.05
    hidden_sizes: tuple = (64, 64)
    huber_delta: float = 1.0
    max_grad_norm: float = 10.0

    def __post_init__(self):
        object.__setattr__(self, "hidden_sizes", tuple(self.hidden_sizes))
        if not 0.0 <= self.gamma <= 1.0:
            raise ValueError(f"gamma must lie in [0, 1], got {self.gamma}")
        if self.batch_size < 1 or self.buffer_size < self.batch_size:
            raise ValueError("need 1 <= batch_size <= buffer_size")


class ReplayBuffer:
    """Fixed-capacity ring of transitions; the oldest entry is overwritten first."""

    def __init__(self, capacity, obs_size):
        self.capacity = int(capacity)
        self.obs = np.zeros((self.capacity, obs_size))
        self.next_obs = np.zeros((self.capacity, obs_size))
        self.actions = np.zeros(self.capacity, dtype=np.int64)
        self.rewards = np.zeros(self.capacity)
        self.truncated = np.zeros(self.capacity, dtype=bool)
        self.pos = 0
        self.size = 0

    def __len__(self):
        return self.size

    def add(self, obs, action, reward, next_obs, truncated=False):
        i = self.pos
        self.obs[i] = obs
        self.actions[i] = action
        self.rewards[i] = reward
        self.next_obs[i] = next_obs
        self.truncated[i] = truncated
        self.pos = (i + 1) % self.capacity
        self.size = min(self.size + 1, self.capacity)

    def ordered_indices(self):
        """Storage indices from oldest to newest."""
        start = self.pos if self.size == self.capacity else 0
        return (start + np.arange(self.size)) % self.capacity

    def sample(self, batch_size, rng):
        if batch_size > self.size:
            raise ValueError(f"cannot draw {batch_size} from {self.size} transitions")
        idx = rng.choice(self.size, size=batch_size, replace=False)
        return {
            "obs": self.obs[idx],
            "actions": self.actions[idx],
            "rewards": self.rewards[idx],
            "next_obs": self.next_obs[idx],
            "truncated": self.truncated[idx],
        }


def dqn_select_action(q_values, epsilon, rng):
    q = np.asarray(q_values, dtype=np.float64)
    if q.size == 0:
        raise ValueError("q_values is empty")
    if not 0.0 <= epsilon <= 1.0:
        raise ValueError(f"epsilon must lie in [0, 1], got {epsilon}")
    if rng.random() < epsilon:
        return int(rng.integers(q.size))
    return int(np.argmax(q))


def dqn_td_targets(batch, q_spec, target_params, gamma):
    """One-step targets ``r + gamma * max_a' Q_target(s', a')``.

    Truncated transitions still bootstrap: episode ends are time limits in an
    infinite-horizon game, not terminal states.
    """
    q_next = mlp_forward(q_spec, target_params, batch["next_obs"])
    return np.asarray(batch["rewards"], dtype=np.float64) + gamma * q_next.max(axis=1)


def huber_loss(q_spec, params, obs, actions, targets, delta=1.0):
    """Mean Huber loss between ``Q(s, a)`` and ``targets`` and its gradient."""
    actions = np.asarray(actions)
    rows = np.arange(actions.shape[0])

    def loss_fn(out, _theta):
        diff = out[rows, actions] - targets
        a = np.abs(diff)
        quad = a <= delta
        per = np.where(quad, 0.5 * diff * diff, delta * (a - 0.5 * delta))
        d_out = np.zeros_like(out)
        d_out[rows, actions] = np.clip(diff, -delta, delta) / diff.shape[0]
        return per.mean(), d_out, None

    return value_and_grad(q_spec, params, loss_fn, obs)


class DQNBrain:
    def __init__(self, obs_size, n_actions, total_steps, rng, params=DQNParams()):
        self.hp = params
        self.rng = rng
        self.spec = MLPSpec((obs_size, *params.hidden_sizes, n_actions), "relu")
        self.params = init_params(self.spec, rng, scheme="uniform")
        self.target_params = self.params.copy()
        self.adam = adam_init(self.spec.n_params, params.lr)
        self.buffer = ReplayBuffer(params.buffer_size, obs_size)
        self.total_steps = max(int(total_steps), 1)
        self.env_steps = 0
        self.grad_steps = 0

    algorithm = "dqn"

    def epsilon(self):
        hp = self.hp
        horizon = hp.exploration_fraction * self.total_steps
        frac = 1.0 if horizon <= 0 else min(1.0, self.env_steps / horizon)
        return hp.exploration_initial_eps + frac * (hp.exploration_final_eps - hp.exploration_initial_eps)

    def q_values(self, obs):
        return mlp_forward(self.spec, self.params, obs)

    def act(self, obs):
        return dqn_select_action(self.q_values(obs), self.epsilon(), self.rng)

    def observe_step(self, obs, action, reward, next_obs, truncated):
        """Store the transition and train when the schedule says so."""
        self.buffer.add(obs, action, reward, next_obs, truncated)
        self.env_steps += 1
        hp = self.hp
        if (self.env_steps >= hp.learning_starts and self.env_steps % hp.train_freq == 0
                and len(self.buffer) >= hp.batch_size):
            return dqn_update(self, self.buffer.sample(hp.batch_size, self.rng))
        return None

    def end_episode(self, last_obs):
        return None


def dqn_update(brain, batch):
    """One Adam step on the Huber TD loss; syncs the target net on schedule."""
    hp = brain.hp
    targets = dqn_td_targets(batch, brain.spec, brain.target_params, hp.gamma)
    loss, g = huber_loss(brain.spec, brain.params, batch["obs"], batch["actions"],
                         targets, hp.huber_delta)
    g = clip_grad_norm(g, hp.max_grad_norm)
    brain.params, brain.adam = adam_update(brain.params, g, brain.adam)
    brain.grad_steps += 1
    if brain.grad_steps % hp.target_update_interval == 0:
        brain.target_params = brain.params.copy()
    return loss
