"""Pure-Python implementations of the hot kernels.

Every function here has a twin with the same signature in ``_ckernels.pyx``.
The scalar kernels (demand, price update, GAE) use the same operation order
as the compiled versions so both backends give bit-identical results.
"""
import math

import numpy as np


def softplus(x):
    if x > 0.0:
        return x + math.log1p(math.exp(-x))
    return math.log1p(math.exp(x))


def price_update(prices, deltas, clamped):
    """Simultaneous price update for all sellers."""
    p = np.asarray(prices, dtype=np.float64).tolist()
    d = np.asarray(deltas, dtype=np.float64).tolist()
    if len(p) != len(d):
        raise ValueError("prices and deltas differ in length")
    out = np.empty(len(p), dtype=np.float64)
    for i in range(len(p)):
        x = p[i] + d[i]
        if clamped:
            out[i] = x if x > 0.0 else 0.0
        else:
            out[i] = softplus(x)
    return out


def demand_rewards(prices, mu, tol, m, p_max, cost, literal_m):
    """Blended demand vector and per-seller rewards.

    Returns ``(bertrand, roulette, blended, rewards)`` as float64 arrays.
    ``literal_m`` selects the market-size factor ``m`` instead of the
    quantity demanded at the lowest price.
    """
    p = np.asarray(prices, dtype=np.float64).tolist()
    n = len(p)
    p_min = p[0]
    for i in range(1, n):
        if p[i] < p_min:
            p_min = p[i]
    count = 0
    for i in range(n):
        if p[i] <= p_min + tol:
            count += 1
    w_sum = 0.0
    w = [0.0] * n
    for i in range(n):
        wi = p_max - p[i]
        if wi < 0.0:
            wi = 0.0
        w[i] = wi
        w_sum += wi

    if literal_m:
        quantity = float(m)
    else:
        quantity = m * (1.0 - p_min / p_max)
        if quantity < 0.0:
            quantity = 0.0
        elif quantity > m:
            quantity = float(m)

    db = np.empty(n)
    dr = np.empty(n)
    dc = np.empty(n)
    rw = np.empty(n)
    for i in range(n):
        b = 1.0 / count if p[i] <= p_min + tol else 0.0
        r = w[i] / w_sum if w_sum > 0.0 else 0.0
        c = mu * b + (1.0 - mu) * r
        db[i] = b
        dr[i] = r
        dc[i] = c
        rw[i] = quantity * c * (p[i] - cost)
    return db, dr, dc, rw


def gae(rewards, values, bootstrap_value, gamma, lam):
    r = np.asarray(rewards, dtype=np.float64).tolist()
    v = np.asarray(values, dtype=np.float64).tolist()
    n = len(r)
    if len(v) != n:
        raise ValueError("rewards and values differ in length")
    adv = np.empty(n)
    ret = np.empty(n)
    last = 0.0
    next_value = float(bootstrap_value)
    for t in range(n - 1, -1, -1):
        delta = r[t] + gamma * next_value - v[t]
        last = delta + gamma * lam * last
        adv[t] = last
        ret[t] = last + v[t]
        next_value = v[t]
    return adv, ret


def rolling_std(x, window):
    x = np.asarray(x, dtype=np.float64)
    n = x.shape[0]
    if window < 1 or window > n:
        raise ValueError(f"window {window} outside [1, {n}]")
    out = np.full(n, np.nan)
    view = np.lib.stride_tricks.sliding_window_view(x, window)
    out[window - 1:] = view.std(axis=1)
    return out


def lowess(x, y, k):
    """Local linear fit with tricube weights over the ``k`` nearest points."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    n = x.shape[0]
    if k < 2 or k > n:
        raise ValueError(f"neighbourhood size {k} outside [2, {n}]")
    out = np.empty(n)
    left = 0
    for i in range(n):
        xi = x[i]
        while left + k < n and xi - x[left] > x[left + k] - xi:
            left += 1
        xs = x[left:left + k]
        ys = y[left:left + k]
        radius = max(xi - xs[0], xs[-1] - xi)
        d = np.abs(xs - xi) / radius
        w = np.where(d < 1.0, (1.0 - d ** 3) ** 3, 0.0)
        sw = w.sum()
        xbar = (w * xs).sum() / sw
        ybar = (w * ys).sum() / sw
        dx = xs - xbar
        sxx = (w * dx * dx).sum()
        if sxx > 1e-12 * radius * radius * sw:
            slope = (w * dx * (ys - ybar)).sum() / sxx
            out[i] = ybar + slope * (xi - xbar)
        else:
            out[i] = ybar
    return out
