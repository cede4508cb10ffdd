"""Demand models, seller rewards and the monopoly/competitive benchmarks.

Demand is an expected-value split of the market across sellers. Two models are
shipped and blended with a bias ``mu``:

* Bertrand: the lowest-priced sellers share the market equally.
* Roulette: each seller's share is proportional to its headroom below the
  maximum market price ``p_max``.

The quantity sold at a reference price follows the linear market curve
``q(p) = m * (1 - p / p_max)`` clamped to ``[0, m]``.
"""
from dataclasses import dataclass
from enum import Enum
import math

import numpy as np

from . import kernels


class RewardModel(str, Enum):
    QUANTITY_AT_MIN_PRICE = "quantity_at_min_price"
    LITERAL_M = "literal_m"


@dataclass(frozen=True)
class MarketParams:
    m: int = 200
    p_max: float = 2.0
    c: float = 1.0
    grid_unit: float = 0.01
    reward_model: RewardModel = RewardModel.QUANTITY_AT_MIN_PRICE

    def __post_init__(self):
        object.__setattr__(self, "reward_model", RewardModel(self.reward_model))
        if not self.m >= 1:
            raise ValueError(f"consumer count m must be >= 1, got {self.m}")
        if not (self.c > 0 and self.p_max > self.c):
            raise ValueError(f"need p_max > c > 0, got p_max={self.p_max}, c={self.c}")
        if not self.grid_unit > 0:
            raise ValueError(f"grid_unit must be > 0, got {self.grid_unit}")


@dataclass(frozen=True)
class DemandSpec:
    """Blend configuration. ``omega`` names the blended models in order."""

    mu: float = 0.5
    omega: tuple = ("bertrand", "roulette")
    tie_tolerance: float = 1e-9

    def __post_init__(self):
        if not 0.0 <= self.mu <= 1.0:
            raise ValueError(f"mu must lie in [0, 1], got {self.mu}")
        if tuple(self.omega) != ("bertrand", "roulette"):
            raise ValueError(f"unsupported demand models {self.omega!r}")
        if not self.tie_tolerance >= 0:
            raise ValueError("tie_tolerance must be >= 0")


@dataclass(frozen=True)
class Benchmarks:
    mp_price: float
    mp_quantity: float
    mp_profit: float
    cb_price: float
    cb_quantity: float
    cb_total_profit: float


def _check_prices(prices, allow_negative=True):
    p = np.asarray(prices, dtype=np.float64)
    if p.ndim != 1 or p.size == 0:
        raise ValueError("prices must be a non-empty 1-d sequence")
    if np.isnan(p).any():
        raise ValueError("prices contain NaN")
    if not allow_negative and (p < 0).any():
        raise ValueError("prices must be non-negative")
    return p


def _demand(p, spec, params):
    return kernels.demand_rewards(
        p, spec.mu, spec.tie_tolerance, params.m, params.p_max, params.c,
        params.reward_model is RewardModel.LITERAL_M,
    )


def bertrand_demand(prices, spec=DemandSpec()):
    p = _check_prices(prices)
    # p_max only affects the roulette part
    return _demand(p, spec, MarketParams())[0]


def roulette_demand(prices, params=MarketParams()):
    p = _check_prices(prices, allow_negative=False)
    return _demand(p, DemandSpec(), params)[1]


def blend_demand(prices, spec, params=MarketParams()):
    """``mu * bertrand + (1 - mu) * roulette``, entrywise."""
    p = _check_prices(prices, allow_negative=False)
    return _demand(p, spec, params)[2]


def market_quantity(p_ref, params=MarketParams()):
    if not p_ref >= 0:
        raise ValueError(f"reference price must be >= 0, got {p_ref}")
    q = params.m * (1.0 - p_ref / params.p_max)
    return min(max(q, 0.0), float(params.m))


def step_rewards(prices, spec, params=MarketParams()):
    """Per-seller profit for one step.

    Under ``QUANTITY_AT_MIN_PRICE`` the market quantity is ``q(min(prices))``;
    under ``LITERAL_M`` it is the consumer count ``m``. Rewards can be negative
    when a seller prices below cost.
    """
    p = _check_prices(prices, allow_negative=False)
    return _demand(p, spec, params)[3]


def _grid_index(value, unit):
    return int(math.floor(value / unit + 1e-9))


def compute_benchmarks(params=MarketParams()):
    """Brute-force scan of the price grid for the MP and CB reference points.

    The monopoly scan covers prices strictly above cost up to ``p_max``; ties
    go to the lower price. Values are rounded to 12 decimals to strip grid
    arithmetic noise.
    """
    unit = params.grid_unit
    lo = _grid_index(params.c, unit) + 1
    hi = _grid_index(params.p_max, unit)
    if hi < lo:
        hi = lo
    best_k, best_profit = lo, -math.inf
    for k in range(lo, hi + 1):
        p = round(k * unit, 12)
        profit = round((p - params.c) * market_quantity(p, params), 12)
        if profit > best_profit:
            best_k, best_profit = k, profit
    mp_price = round(best_k * unit, 12)

    cb_price = round(params.c + unit, 12)
    cb_quantity = round(market_quantity(cb_price, params), 12)
    return Benchmarks(
        mp_price=mp_price,
        mp_quantity=round(market_quantity(mp_price, params), 12),
        mp_profit=best_profit,
        cb_price=cb_price,
        cb_quantity=cb_quantity,
        cb_total_profit=round((cb_price - params.c) * cb_quantity, 12),
    )
