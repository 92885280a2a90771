"""Time the compiled kernels against their pure-Python twins.

Run with ``python3 benchmarks/bench_kernels.py``. Each kernel is timed on
the same inputs through both backends and the speed-up is printed.
"""
from __future__ import annotations

import argparse
import timeit

import numpy as np

from pseudopoisson import _fallback

try:
    from pseudopoisson import _kernels as compiled
except ImportError:  # extension not built
    compiled = None


def _cases():
    rates = np.concatenate([np.full(20_000, 3.0), np.full(20_000, 40.0)])
    rng = np.random.default_rng(0)
    x1 = rng.poisson(5.0, 5000)
    v, inv = np.unique(x1, return_inverse=True)
    c = np.bincount(inv).astype(float)
    s = np.bincount(inv, weights=rng.poisson(10.0, 5000)).astype(float)
    v = v.astype(float)
    return {
        "poisson_variates (40k draws)":
            lambda m: m.poisson_variates(np.random.Generator(np.random.Philox(1)), rates),
        "exp_loglik_core":
            lambda m: m.exp_loglik_core(v, c, s, -20.0, 0.5, 25.0),
        "lomax_loglik_core":
            lambda m: m.lomax_loglik_core(v, c, s, -20.0, 0.5, 1.3, 25.0),
        "ratio_series (a=40)":
            lambda m: m.ratio_series(0.7, 1.5, 40.0, 0.0, True, 1e-12, 100000),
        "lomax_weight_stats (a=5)":
            lambda m: m.lomax_weight_stats(0.5, 1.0, 5.0, 1e-12, 100000),
    }


def main(argv=None) -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)
    if compiled is None:
        print("compiled extension not available; build with `pip install -e . --no-build-isolation`")
        return
    print(f"{'kernel':<30}{'python (ms)':>14}{'cython (ms)':>14}{'speed-up':>10}")
    for name, fn in _cases().items():
        times = {}
        for label, mod in (("python", _fallback), ("cython", compiled)):
            t = timeit.Timer(lambda: fn(mod))
            n, _ = t.autorange()
            times[label] = min(t.repeat(args.repeat, n)) / n * 1e3
        print(f"{name:<30}{times['python']:>14.4f}{times['cython']:>14.4f}"
              f"{times['python'] / times['cython']:>9.1f}x")


if __name__ == "__main__":
    main()
