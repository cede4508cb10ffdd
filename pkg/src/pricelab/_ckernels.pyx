# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot kernels. Signatures mirror ``_pykernels``."""
import numpy as np

from libc.math cimport exp, fabs, log1p


cdef inline double _softplus(double x) noexcept nogil:
    if x > 0.0:
        return x + log1p(exp(-x))
    return log1p(exp(x))


def softplus(double x):
    return _softplus(x)


def price_update(prices, deltas, bint clamped):
    cdef const double[::1] p = np.ascontiguousarray(prices, dtype=np.float64)
    cdef const double[::1] d = np.ascontiguousarray(deltas, dtype=np.float64)
    cdef Py_ssize_t n = p.shape[0], i
    cdef double x
    if d.shape[0] != n:
        raise ValueError("prices and deltas differ in length")
    out = np.empty(n, dtype=np.float64)
    cdef double[::1] o = out
    for i in range(n):
        x = p[i] + d[i]
        if clamped:
            o[i] = x if x > 0.0 else 0.0
        else:
            o[i] = _softplus(x)
    return out


def demand_rewards(prices, double mu, double tol, double m, double p_max,
                   double cost, bint literal_m):
    cdef const double[::1] p = np.ascontiguousarray(prices, dtype=np.float64)
    cdef Py_ssize_t n = p.shape[0], i
    cdef double p_min = p[0], w_sum = 0.0, wi, quantity, b, r, c
    cdef long count = 0
    for i in range(1, n):
        if p[i] < p_min:
            p_min = p[i]
    for i in range(n):
        if p[i] <= p_min + tol:
            count += 1

    db_arr = np.empty(n)
    dr_arr = np.empty(n)
    dc_arr = np.empty(n)
    rw_arr = np.empty(n)
    cdef double[::1] db = db_arr, dr = dr_arr, dc = dc_arr, rw = rw_arr

    # roulette weights staged in dr until normalized below
    for i in range(n):
        wi = p_max - p[i]
        if wi < 0.0:
            wi = 0.0
        dr[i] = wi
        w_sum += wi

    if literal_m:
        quantity = m
    else:
        quantity = m * (1.0 - p_min / p_max)
        if quantity < 0.0:
            quantity = 0.0
        elif quantity > m:
            quantity = m

    for i in range(n):
        b = 1.0 / count if p[i] <= p_min + tol else 0.0
        r = dr[i] / w_sum if w_sum > 0.0 else 0.0
        c = mu * b + (1.0 - mu) * r
        db[i] = b
        dr[i] = r
        dc[i] = c
        rw[i] = quantity * c * (p[i] - cost)
    return db_arr, dr_arr, dc_arr, rw_arr


def gae(rewards, values, double bootstrap_value, double gamma, double lam):
    cdef const double[::1] r = np.ascontiguousarray(rewards, dtype=np.float64)
    cdef const double[::1] v = np.ascontiguousarray(values, dtype=np.float64)
    cdef Py_ssize_t n = r.shape[0], t
    cdef double last = 0.0, next_value = bootstrap_value, delta
    if v.shape[0] != n:
        raise ValueError("rewards and values differ in length")
    adv_arr = np.empty(n)
    ret_arr = np.empty(n)
    cdef double[::1] adv = adv_arr, ret = ret_arr
    for t in range(n - 1, -1, -1):
        delta = r[t] + gamma * next_value - v[t]
        last = delta + gamma * lam * last
        adv[t] = last
        ret[t] = last + v[t]
        next_value = v[t]
    return adv_arr, ret_arr


def rolling_std(x, Py_ssize_t window):
    cdef const double[::1] a = np.ascontiguousarray(x, dtype=np.float64)
    cdef Py_ssize_t n = a.shape[0], i, j
    cdef double mean, acc, dev
    if window < 1 or window > n:
        raise ValueError(f"window {window} outside [1, {n}]")
    out_arr = np.full(n, np.nan)
    cdef double[::1] out = out_arr
    for i in range(window - 1, n):
        mean = 0.0
        for j in range(i - window + 1, i + 1):
            mean += a[j]
        mean /= window
        acc = 0.0
        for j in range(i - window + 1, i + 1):
            dev = a[j] - mean
            acc += dev * dev
        out[i] = (acc / window) ** 0.5
    return out_arr


def lowess(x, y, Py_ssize_t k):
    cdef const double[::1] xs = np.ascontiguousarray(x, dtype=np.float64)
    cdef const double[::1] ys = np.ascontiguousarray(y, dtype=np.float64)
    cdef Py_ssize_t n = xs.shape[0], i, j, left = 0
    cdef double xi, radius, d, w, sw, sx, sy, xbar, ybar, dx, sxx, sxy
    if k < 2 or k > n:
        raise ValueError(f"neighbourhood size {k} outside [2, {n}]")
    out_arr = np.empty(n)
    cdef double[::1] out = out_arr
    for i in range(n):
        xi = xs[i]
        while left + k < n and xi - xs[left] > xs[left + k] - xi:
            left += 1
        radius = xi - xs[left]
        if xs[left + k - 1] - xi > radius:
            radius = xs[left + k - 1] - xi
        sw = 0.0
        sx = 0.0
        sy = 0.0
        for j in range(left, left + k):
            d = fabs(xs[j] - xi) / radius
            if d < 1.0:
                w = 1.0 - d * d * d
                w = w * w * w
                sw += w
                sx += w * xs[j]
                sy += w * ys[j]
        xbar = sx / sw
        ybar = sy / sw
        sxx = 0.0
        sxy = 0.0
        for j in range(left, left + k):
            d = fabs(xs[j] - xi) / radius
            if d < 1.0:
                w = 1.0 - d * d * d
                w = w * w * w
                dx = xs[j] - xbar
                sxx += w * dx * dx
                sxy += w * dx * (ys[j] - ybar)
        if sxx > 1e-12 * radius * radius * sw:
            out[i] = ybar + sxy / sxx * (xi - xbar)
        else:
            out[i] = ybar
    return out_arr
