"""Minimal multilayer perceptron with reverse-mode gradients and Adam.

Parameters live in one flat float64 vector. Layer ``l`` occupies a weight block
of shape ``(fan_in, fan_out)`` in row-major order followed by its bias, so the
parameter count is ``sum((fan_in + 1) * fan_out)``. Hidden layers use the
spec's activation; the output layer is linear.
"""
from dataclasses import dataclass, replace

import numpy as np


@dataclass(frozen=True)
class MLPSpec:
    sizes: tuple
    activation: str = "tanh"

    def __post_init__(self):
        object.__setattr__(self, "sizes", tuple(int(s) for s in self.sizes))
        if len(self.sizes) < 2 or min(self.sizes) < 1:
            raise ValueError(f"invalid layer sizes {self.sizes}")
        if self.activation not in _ACTIVATIONS:
            raise ValueError(f"unknown activation {self.activation!r}")

    @property
    def n_params(self):
        return sum((i + 1) * o for i, o in zip(self.sizes[:-1], self.sizes[1:]))

    @property
    def n_in(self):
        return self.sizes[0]

    @property
    def n_out(self):
        return self.sizes[-1]

    def layout(self):
        """Yield ``(w_start, b_start, b_end, fan_in, fan_out)`` per layer."""
        off = 0
        for fan_in, fan_out in zip(self.sizes[:-1], self.sizes[1:]):
            b0 = off + fan_in * fan_out
            yield off, b0, b0 + fan_out, fan_in, fan_out
            off = b0 + fan_out


def _tanh_grad(a, z):
    return 1.0 - a * a


def _relu(z):
    return np.maximum(z, 0.0)


def _relu_grad(a, z):
    return (z > 0.0).astype(np.float64)


def _identity(z):
    return z


def _identity_grad(a, z):
    return np.ones_like(z)


_ACTIVATIONS = {
    "tanh": (np.tanh, _tanh_grad),
    "relu": (_relu, _relu_grad),
    "linear": (_identity, _identity_grad),
}


def unpack(spec, theta):
    """Views ``[(W, b), ...]`` into the flat parameter vector."""
    theta = np.asarray(theta)
    if theta.shape != (spec.n_params,):
        raise ValueError(f"expected {spec.n_params} parameters, got shape {theta.shape}")
    return [(theta[w0:b0].reshape(fi, fo), theta[b0:b1])
            for w0, b0, b1, fi, fo in spec.layout()]


def init_params(spec, rng, scheme="orthogonal", hidden_gain=np.sqrt(2.0), output_gain=1.0):
    """Draw initial parameters.

    ``orthogonal``: orthogonal weights scaled by ``hidden_gain`` (hidden
    layers) or ``output_gain`` (last layer), zero biases.
    ``uniform``: weights and biases from U(-1/sqrt(fan_in), 1/sqrt(fan_in)).
    """
    theta = np.zeros(spec.n_params)
    layers = list(spec.layout())
    for li, (w0, b0, b1, fi, fo) in enumerate(layers):
        if scheme == "orthogonal":
            gain = output_gain if li == len(layers) - 1 else hidden_gain
            a = rng.standard_normal((max(fi, fo), min(fi, fo)))
            q, r = np.linalg.qr(a)
            q = q * np.sign(np.diag(r))
            w = q if fi >= fo else q.T
            theta[w0:b0] = (gain * w).ravel()
        elif scheme == "uniform":
            bound = 1.0 / np.sqrt(fi)
            theta[w0:b0] = rng.uniform(-bound, bound, fi * fo)
            theta[b0:b1] = rng.uniform(-bound, bound, fo)
        else:
            raise ValueError(f"unknown init scheme {scheme!r}")
    return theta


def _as_batch(spec, x):
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 1
    xb = x[None, :] if single else x
    if xb.ndim != 2 or xb.shape[1] != spec.n_in:
        raise ValueError(f"input shape {x.shape} does not match input size {spec.n_in}")
    return xb, single


def mlp_forward(spec, theta, x):
    xb, single = _as_batch(spec, x)
    act, _ = _ACTIVATIONS[spec.activation]
    layers = unpack(spec, theta)
    h = xb
    for li, (w, b) in enumerate(layers):
        h = h @ w + b
        if li < len(layers) - 1:
            h = act(h)
    return h[0] if single else h


def forward_with_cache(spec, theta, x):
    """Batched forward pass keeping what ``backward`` needs."""
    xb, _ = _as_batch(spec, x)
    act, _ = _ACTIVATIONS[spec.activation]
    layers = unpack(spec, theta)
    inputs, pre, post = [], [], []
    h = xb
    for li, (w, b) in enumerate(layers):
        inputs.append(h)
        z = h @ w + b
        if li < len(layers) - 1:
            a = act(z)
            pre.append(z)
            post.append(a)
            h = a
        else:
            h = z
    return h, (inputs, pre, post)


def backward(spec, theta, cache, d_out):
    """Gradient of a scalar loss w.r.t. ``theta`` given ``dL/d(output)``."""
    _, act_grad = _ACTIVATIONS[spec.activation]
    inputs, pre, post = cache
    layers = unpack(spec, theta)
    g = np.zeros(spec.n_params)
    delta = np.asarray(d_out, dtype=np.float64)
    spans = list(spec.layout())
    for li in range(len(layers) - 1, -1, -1):
        w0, b0, b1, fi, fo = spans[li]
        w, _ = layers[li]
        g[w0:b0] = (inputs[li].T @ delta).ravel()
        g[b0:b1] = delta.sum(axis=0)
        if li > 0:
            delta = (delta @ w.T) * act_grad(post[li - 1], pre[li - 1])
    return g


def value_and_grad(spec, theta, loss_fn, batch):
    """Evaluate ``loss_fn`` on the network output and backpropagate.

    ``loss_fn(output, theta)`` returns ``(loss, d_output, d_theta)`` where
    ``d_theta`` is an optional direct parameter term (e.g. weight decay) or
    ``None``.
    """
    out, cache = forward_with_cache(spec, theta, batch)
    loss, d_out, d_theta = loss_fn(out, theta)
    g = backward(spec, theta, cache, d_out)
    if d_theta is not None:
        g = g + d_theta
    return float(loss), g


def grad(spec, theta, loss_fn, batch):
    return value_and_grad(spec, theta, loss_fn, batch)[1]


def clip_grad_norm(g, max_norm):
    if max_norm is None or not np.isfinite(max_norm):
        return g
    norm = float(np.sqrt(g @ g))
    if norm > max_norm:
        return g * (max_norm / (norm + 1e-6))
    return g


@dataclass(frozen=True)
class AdamState:
    m: np.ndarray
    v: np.ndarray
    t: int = 0
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8


def adam_init(n_params, lr, beta1=0.9, beta2=0.999, eps=1e-8):
    return AdamState(np.zeros(n_params), np.zeros(n_params), 0, lr, beta1, beta2, eps)


def adam_update(params, grads, state):
    """One bias-corrected Adam step; returns new ``(params, state)``."""
    if params.shape != grads.shape or params.shape != state.m.shape:
        raise ValueError("parameter, gradient and moment shapes differ")
    t = state.t + 1
    m = state.beta1 * state.m + (1.0 - state.beta1) * grads
    v = state.beta2 * state.v + (1.0 - state.beta2) * grads * grads
    m_hat = m / (1.0 - state.beta1 ** t)
    v_hat = v / (1.0 - state.beta2 ** t)
    new_params = params - state.lr * m_hat / (np.sqrt(v_hat) + state.eps)
    return new_params, replace(state, m=m, v=v, t=t)
