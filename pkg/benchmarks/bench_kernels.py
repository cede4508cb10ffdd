"""Time the compiled kernels against the pure-Python fallback.

    python3 benchmarks/bench_kernels.py [--repeat 5]
"""
import argparse
import timeit

import numpy as np

from pricelab.kernels import available_backends, load_backend


def cases(rng):
    prices = rng.uniform(0.5, 2.5, 3)
    rewards, values = rng.normal(size=365), rng.normal(size=365)
    series = rng.normal(size=10_000)
    x = np.sort(rng.uniform(0, 10, 2000))
    y = np.sin(x) + rng.normal(0, 0.3, x.size)
    deltas = rng.choice([-1.0, 0.0, 1.0], 3)
    return {
        "demand_rewards (n=3)": (1000, lambda k: k.demand_rewards(prices, 0.5, 1e-9, 200.0, 2.0, 1.0, False)),
        "price_update (n=3)": (1000, lambda k: k.price_update(prices, deltas, False)),
        "gae (T=365)": (100, lambda k: k.gae(rewards, values, 0.1, 0.99, 0.95)),
        "rolling_std (N=10k, w=100)": (10, lambda k: k.rolling_std(series, 100)),
        "lowess (N=2000, k=100)": (3, lambda k: k.lowess(x, y, 100)),
    }


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    backends = {name: load_backend(name) for name in available_backends()}
    if "cython" not in backends:
        print("compiled extension not built; only the Python fallback is available")
    print(f"{'kernel':<28}" + "".join(f"{n + ' us/call':>18}" for n in backends) + f"{'speedup':>10}")
    for label, (number, fn) in cases(np.random.default_rng(0)).items():
        per = {}
        for name, mod in backends.items():
            best = min(timeit.repeat(lambda: fn(mod), number=number, repeat=args.repeat))
            per[name] = best / number * 1e6
        speedup = per["python"] / per["cython"] if "cython" in per else float("nan")
        print(f"{label:<28}" + "".join(f"{per[n]:>18.2f}" for n in backends) + f"{speedup:>9.1f}x")


if __name__ == "__main__":
    main()
