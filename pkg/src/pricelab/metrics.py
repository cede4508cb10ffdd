"""Post-hoc run analysis: episode series, convergence, profit gain, smoothing."""
from dataclasses import dataclass
import math

import numpy as np

from . import kernels


class DataError(ValueError):
    """Raised for malformed run data (ragged episodes, mismatched series)."""


@dataclass
class EpisodeSeries:
    mean_price: np.ndarray
    mean_profit: np.ndarray
    # per-episode mean over steps of the across-seller price std
    price_dispersion: np.ndarray = None

    def __len__(self):
        return len(self.mean_price)


class EpisodeAccumulator:
    """Streams step data into per-episode means.

    Sums run over steps, and within a step over sellers, matching the order
    used by :func:`episode_series` on a log sorted the same way.
    """

    def __init__(self):
        self.prices, self.profits, self.dispersion = [], [], []
        self._reset()

    def _reset(self):
        self._p = 0.0
        self._r = 0.0
        self._d = 0.0
        self._count = 0
        self._steps = 0

    def add_step(self, prices, rewards):
        for p, r in zip(prices, rewards):
            self._p += float(p)
            self._r += float(r)
        self._count += len(prices)
        self._d += float(np.std(prices))
        self._steps += 1

    def end_episode(self):
        self.prices.append(self._p / self._count)
        self.profits.append(self._r / self._count)
        self.dispersion.append(self._d / self._steps)
        self._reset()

    def series(self):
        return EpisodeSeries(np.array(self.prices), np.array(self.profits), np.array(self.dispersion))


def episode_series(rows):
    """Episode means from step-log rows.

    ``rows`` is an iterable of mappings or objects with ``episode``, ``step``,
    ``agent_id``, ``price`` and ``reward``. Every episode must contain the same
    (step, agent) grid.
    """
    def get(r, k):
        return r[k] if isinstance(r, dict) else getattr(r, k)

    table = sorted(((int(get(r, "episode")), int(get(r, "step")), int(get(r, "agent_id")),
                     float(get(r, "price")), float(get(r, "reward"))) for r in rows))
    if not table:
        raise DataError("empty step log")
    acc = EpisodeAccumulator()
    shape = None
    i = 0
    while i < len(table):
        ep = table[i][0]
        j = i
        while j < len(table) and table[j][0] == ep:
            j += 1
        block = table[i:j]
        steps = sorted({b[1] for b in block})
        agents = sorted({b[2] for b in block})
        if len(block) != len(steps) * len(agents) or len(set((b[1], b[2]) for b in block)) != len(block):
            raise DataError(f"episode {ep} is ragged")
        if shape is None:
            shape = (len(steps), len(agents))
        elif shape != (len(steps), len(agents)):
            raise DataError(f"episode {ep} has shape {(len(steps), len(agents))}, expected {shape}")
        for s in range(len(steps)):
            chunk = block[s * len(agents):(s + 1) * len(agents)]
            acc.add_step([c[3] for c in chunk], [c[4] for c in chunk])
        acc.end_episode()
        i = j
    return acc.series()


def rolling_std(series, window):
    """Trailing population std; the first ``window - 1`` entries are NaN."""
    x = np.asarray(series, dtype=np.float64)
    if window > x.shape[0]:
        raise ValueError(f"window {window} exceeds series length {x.shape[0]}")
    return kernels.rolling_std(x, int(window))


@dataclass(frozen=True)
class ConvergenceResult:
    converged: bool
    t_euc: int | None
    threshold: float = 0.01
    window: int = 100


def quiet_stretch(stat, threshold=0.01, window=100):
    """Locate the terminal stretch where ``stat`` stays below ``threshold``.

    NaN entries count as above threshold. Converged only if the final stretch
    is longer than ``window`` entries.
    """
    stat = np.asarray(stat, dtype=np.float64)
    loud = np.flatnonzero(~(stat < threshold))
    start = int(loud[-1]) + 1 if loud.size else 0
    if stat.shape[0] - start > window:
        return ConvergenceResult(True, start, threshold, window)
    return ConvergenceResult(False, None, threshold, window)


def convergence_statistic(series, window=100, reading="rolling_std"):
    """Statistic scanned for convergence.

    ``rolling_std``: trailing std of the per-episode mean price (default).
    ``dispersion``: trailing mean of the per-episode across-seller price std;
    needs an :class:`EpisodeSeries` with ``price_dispersion``.
    """
    if reading == "rolling_std":
        x = series.mean_price if isinstance(series, EpisodeSeries) else series
        return rolling_std(x, window)
    if reading == "dispersion":
        if not isinstance(series, EpisodeSeries) or series.price_dispersion is None:
            raise ValueError("dispersion reading needs an EpisodeSeries with price_dispersion")
        d = np.asarray(series.price_dispersion, dtype=np.float64)
        out = np.full(d.shape[0], np.nan)
        if d.shape[0] >= window:
            c = np.concatenate([[0.0], np.cumsum(d)])
            out[window - 1:] = (c[window:] - c[:-window]) / window
        return out
    raise ValueError(f"unknown convergence reading {reading!r}")


def detect_convergence(series, threshold=0.01, window=100, reading="rolling_std"):
    n = len(series)
    if n <= window:
        return ConvergenceResult(False, None, threshold, window)
    return quiet_stretch(convergence_statistic(series, window, reading), threshold, window)


@dataclass(frozen=True)
class CollusionMetrics:
    delta: float
    pi_bar: float
    pi_cb: float
    pi_mp: float
    tail_window: bool = False


def profit_gain(mean_profit, benchmarks, n_agents, t_euc, window=100):
    """Profit gain of the converged phase relative to the CB and MP splits.

    Without a convergence point the last ``window`` episodes are used and the
    result is flagged with ``tail_window=True``. Values above 1 are kept.
    """
    profit = np.asarray(mean_profit, dtype=np.float64)
    pi_cb = benchmarks.cb_total_profit / n_agents
    pi_mp = benchmarks.mp_profit / n_agents
    if pi_mp == pi_cb:
        raise ValueError("degenerate benchmarks: monopoly and competitive profits coincide")
    if profit.size == 0:
        raise DataError("empty profit series")
    if t_euc is None:
        part, tail = profit[-min(window, profit.size):], True
    else:
        part, tail = profit[t_euc:], False
    pi_bar = float(part.mean())
    return CollusionMetrics((pi_bar - pi_cb) / (pi_mp - pi_cb), pi_bar, pi_cb, pi_mp, tail)


def lowess(x, y, fraction=0.05):
    """Local linear smoother with tricube weights, no robustness passes.

    Each fit uses the ``ceil(fraction * N)`` nearest points.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.ndim != 1 or x.shape != y.shape:
        raise ValueError("x and y must be 1-d arrays of equal length")
    if not 0.0 < fraction <= 1.0:
        raise ValueError(f"fraction must lie in (0, 1], got {fraction}")
    if x.size > 1 and not (np.diff(x) > 0).all():
        raise ValueError("x must be strictly increasing")
    k = math.ceil(fraction * x.size - 1e-9)
    if k < 2:
        raise ValueError(f"{x.size} points with fraction {fraction} leave fewer than 2 per window")
    return kernels.lowess(x, y, k)


@dataclass
class Aggregate:
    mean: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    smoothed: np.ndarray = None


def aggregate_runs(series_list, smooth_fraction=None):
    """Pointwise mean with a min/max band; smoothing applies to the mean."""
    if not series_list:
        raise DataError("no series to aggregate")
    lengths = {len(s) for s in series_list}
    if len(lengths) != 1:
        raise DataError(f"series lengths differ: {sorted(lengths)}")
    stack = np.vstack([np.asarray(s, dtype=np.float64) for s in series_list])
    agg = Aggregate(stack.mean(axis=0), stack.min(axis=0), stack.max(axis=0))
    if smooth_fraction is not None:
        n = stack.shape[1]
        frac = max(smooth_fraction, min(1.0, 2.0 / n))
        agg.smoothed = lowess(np.arange(n, dtype=np.float64), agg.mean, frac) if n >= 2 else agg.mean.copy()
    return agg


def oscillation_profile(prices, min_autocorr=0.2):
    """Dominant period (steps) and amplitude of a price trace.

    The period is the lag >= 2 with the largest autocorrelation of the
    mean-centred series (``None`` below ``min_autocorr``). The amplitude is half
    the interquartile range.
    """
    x = np.asarray(prices, dtype=np.float64)
    if x.size < 16:
        raise ValueError(f"need at least 16 steps, got {x.size}")
    q1, q3 = np.percentile(x, [25, 75])
    amplitude = float(q3 - q1) / 2.0
    xc = x - x.mean()
    denom = float(xc @ xc)
    if denom <= 1e-24:
        return None, amplitude
    lags = np.arange(2, x.size // 2 + 1)
    acf = np.array([(xc[:-lag] @ xc[lag:]) / denom for lag in lags])
    best = int(np.argmax(acf))
    if acf[best] < min_autocorr:
        return None, amplitude
    return int(lags[best]), amplitude


def summarize(series, benchmarks, n_agents, threshold=0.01, window=100, reading="rolling_std"):
    """Convergence and collusion figures for one run."""
    conv = detect_convergence(series, threshold, window, reading)
    cm = profit_gain(series.mean_profit, benchmarks, n_agents, conv.t_euc, window)
    prices = np.asarray(series.mean_price)
    part = prices[conv.t_euc:] if conv.converged else prices[-min(window, prices.size):]
    return {
        "converged": conv.converged,
        "t_euc": conv.t_euc,
        "delta": cm.delta,
        "mean_price_post_conv": float(part.mean()),
        "mean_profit_post_conv": cm.pi_bar,
    }
