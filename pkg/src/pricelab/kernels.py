"""Backend selection for the numerical hot kernels.

The compiled ``_ckernels`` extension is used when it was built; otherwise the
pure-Python ``_pykernels`` module is loaded. Setting ``PRICELAB_PURE_PYTHON=1``
forces the fallback.
"""
import importlib
import os

_FALLBACK = "pricelab._pykernels"
_COMPILED = "pricelab._ckernels"


def load_backend(name):
    """Return the kernel module for ``"cython"`` or ``"python"``."""
    if name == "python":
        return importlib.import_module(_FALLBACK)
    if name == "cython":
        return importlib.import_module(_COMPILED)
    raise ValueError(f"unknown kernel backend {name!r}")


def available_backends():
    names = ["python"]
    try:
        load_backend("cython")
    except ImportError:
        pass
    else:
        names.insert(0, "cython")
    return names


if os.environ.get("PRICELAB_PURE_PYTHON", "") not in ("", "0"):
    BACKEND = "python"
else:
    BACKEND = available_backends()[0]

_impl = load_backend(BACKEND)

softplus = _impl.softplus
price_update = _impl.price_update
demand_rewards = _impl.demand_rewards
gae = _impl.gae
rolling_std = _impl.rolling_std
lowess = _impl.lowess
