"""Time the compiled kernels against the pure-Python fallback.

    python3 benchmarks/bench_kernels.py [--repeat 3]

Both backends get identical inputs; the script also reports the largest
absolute difference between their outputs.
"""

import argparse
import math
import time

import numpy as np

from heatdrift import _pykernels

try:
    from heatdrift import _ckernels
except ImportError:
    _ckernels = None


def cases():
    k = 4
    k2 = float(k * k)
    s0 = k**-2.0
    t_out = np.logspace(-2, 6, 200)
    n = 20_000
    h = np.full(n, 0.1 / k2)
    dy = np.random.default_rng(0).standard_normal(n) * np.sqrt(h)
    rec = np.arange(0, n + 1, 100)
    return {
        "integrate_moments": lambda kn: kn.integrate_moments(k2, 1.0, 1.0, 0.25, s0, t_out, 0.1 / k2, math.inf, 1e-3),
        "integrate_stationary": lambda kn: kn.integrate_stationary(k2, 1.0, 0.25, s0, t_out, 0.1 / k2, math.inf, 1e-3),
        "filter_path": lambda kn: kn.filter_path(k2, 1.0, 1.0, s0, h, dy, rec),
        "stationary_path": lambda kn: kn.stationary_path(k2, 1.0, s0, h, dy, rec),
    }


def best_of(fn, repeat):
    best = math.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)
    if _ckernels is None:
        print("compiled extension not built; only the Python timings are shown")
    print(f"{'kernel':<22}{'python [s]':>12}{'cython [s]':>12}{'speedup':>10}{'max |diff|':>12}")
    for name, run in cases().items():
        tp, yp = best_of(lambda: run(_pykernels), args.repeat)
        if _ckernels is None:
            print(f"{name:<22}{tp:>12.4f}")
            continue
        tc, yc = best_of(lambda: run(_ckernels), args.repeat)
        diff = float(np.max(np.abs(np.asarray(yp) - np.asarray(yc))))
        print(f"{name:<22}{tp:>12.4f}{tc:>12.4f}{tp / tc:>10.1f}{diff:>12.2e}")


if __name__ == "__main__":
    main()
