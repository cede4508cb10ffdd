"""Partially observable multi-seller market environment.

Sellers pick an index into a discrete grid of price adjustments. All prices
are updated simultaneously through ``softplus(p + delta)`` (or the clamped
linear variant), rewards are computed on the new prices, and each seller's
capital accumulates without a floor.
"""
from dataclasses import dataclass, field, replace
from enum import Enum

import numpy as np

from . import kernels
from .econ import DemandSpec, MarketParams, RewardModel


class Scenario(str, Enum):
    A = "A"  # full observation of competitor prices
    B = "B"  # own price only


class UpdateRule(str, Enum):
    SOFTPLUS = "softplus"
    CLAMPED = "clamped"


@dataclass(frozen=True)
class ActionGrid:
    deltas: tuple

    def __len__(self):
        return len(self.deltas)

    def as_array(self):
        return np.asarray(self.deltas, dtype=np.float64)


def build_action_grid(size, max_step=2.0, min_step=0.01):
    """Symmetric grid of ``size`` adjustments with log-spaced magnitudes."""
    if not isinstance(size, (int, np.integer)) or size < 3 or size % 2 == 0:
        raise ValueError(f"action grid size must be an odd integer >= 3, got {size!r}")
    half = (size - 1) // 2
    if half == 1:
        mags = np.array([max_step])
    else:
        mags = np.geomspace(min_step, max_step, half)
        mags[0], mags[-1] = min_step, max_step
    deltas = np.concatenate([-mags[::-1], [0.0], mags])
    return ActionGrid(tuple(float(d) for d in deltas))


def apply_price_update(p_prev, delta):
    return kernels.softplus(float(p_prev) + float(delta))


@dataclass(frozen=True)
class EnvConfig:
    n_agents: int = 3
    scenario: Scenario = Scenario.A
    action_grid: ActionGrid = field(default_factory=lambda: build_action_grid(7))
    init_price_low: float = 0.5
    init_price_high: float = 1.5
    steps_per_episode: int = 365
    market: MarketParams = field(default_factory=MarketParams)
    demand: DemandSpec = field(default_factory=DemandSpec)
    update_rule: UpdateRule = UpdateRule.SOFTPLUS

    def __post_init__(self):
        object.__setattr__(self, "scenario", Scenario(self.scenario))
        object.__setattr__(self, "update_rule", UpdateRule(self.update_rule))
        if self.n_agents < 2:
            raise ValueError(f"need at least 2 sellers, got {self.n_agents}")
        if not self.init_price_low < self.init_price_high:
            raise ValueError("init_price_low must be below init_price_high")
        if self.steps_per_episode < 1:
            raise ValueError("steps_per_episode must be >= 1")

    @property
    def obs_size(self):
        return self.n_agents + 1 if self.scenario is Scenario.A else 2


@dataclass
class EnvState:
    prices: np.ndarray
    capitals: np.ndarray
    step_index: int = 0
    episode_index: int = 0
    # agents whose price was overwritten since the last step
    interventions: frozenset = frozenset()


def observation_vector(prices, agent_index, scenario, cost, p_max):
    if Scenario(scenario) is Scenario.A:
        vals = list(prices) + [cost]
    else:
        vals = [prices[agent_index], cost]
    return np.asarray(vals, dtype=np.float64) / p_max


def observe(state, agent_index, config):
    if not 0 <= agent_index < len(state.prices):
        raise IndexError(f"agent index {agent_index} out of range")
    return observation_vector(state.prices, agent_index, config.scenario,
                              config.market.c, config.market.p_max)


def observe_all(state, config):
    return [observe(state, i, config) for i in range(config.n_agents)]


def reset(config, rng, capitals=None, episode_index=0):
    """Start an episode with fresh uniform prices.

    ``capitals`` carries the ledger over from the previous episode; it starts
    at zero for a new run.
    """
    prices = rng.uniform(config.init_price_low, config.init_price_high, size=config.n_agents)
    if capitals is None:
        capitals = np.zeros(config.n_agents)
    state = EnvState(prices=prices, capitals=np.array(capitals, dtype=np.float64),
                     step_index=0, episode_index=episode_index)
    return state, observe_all(state, config)


def step(state, actions, config):
    """Advance one step. Returns ``(new_state, observations, rewards)``.

    ``step_index`` counts completed steps in the episode; callers reset after
    ``steps_per_episode`` steps.
    """
    grid = config.action_grid.deltas
    if len(actions) != config.n_agents:
        raise ValueError(f"expected {config.n_agents} actions, got {len(actions)}")
    deltas = np.empty(config.n_agents)
    for i, a in enumerate(actions):
        if not 0 <= a < len(grid):
            raise ValueError(f"action index {a} for agent {i} outside [0, {len(grid)})")
        deltas[i] = grid[a]
    prices = kernels.price_update(state.prices, deltas,
                                  config.update_rule is UpdateRule.CLAMPED)
    m = config.market
    rewards = kernels.demand_rewards(prices, config.demand.mu, config.demand.tie_tolerance,
                                     m.m, m.p_max, m.c,
                                     m.reward_model is RewardModel.LITERAL_M)[3]
    new_state = EnvState(prices=prices, capitals=state.capitals + rewards,
                         step_index=state.step_index + 1,
                         episode_index=state.episode_index)
    return new_state, observe_all(new_state, config), rewards


def force_price(state, agent_index, price):
    """Overwrite one seller's price before the next step."""
    if not price > 0:
        raise ValueError(f"forced price must be > 0, got {price}")
    if not 0 <= agent_index < len(state.prices):
        raise IndexError(f"agent index {agent_index} out of range")
    prices = state.prices.copy()
    prices[agent_index] = price
    return replace(state, prices=prices,
                   interventions=state.interventions | {agent_index})
