"""Time the compiled kernels against the numpy fallback.

Usage::

    python3 benchmarks/bench_kernels.py [--sizes 1000 100000] [--repeat 5]
"""

import argparse
import timeit

import numpy as np

from nsextremes import _core_py

try:
    from nsextremes import _core
except ImportError:  # extension not built
    _core = None


def workloads(n, rng):
    y = rng.exponential(1.0, n)
    xi = rng.uniform(-0.3, 0.3, n)
    xi[: n // 10] = 0.0  # exercise the series branch
    nu = rng.uniform(0.5, 2.0, n)
    angles = rng.uniform(0, 360, n)
    chain = np.zeros(min(n, 20000))
    e = rng.standard_normal(chain.size)
    for t in range(1, chain.size):
        chain[t] = 0.9 * chain[t - 1] + e[t]
    return {
        "gpd_loglik": lambda k: k.gpd_loglik(y, xi, nu, 1e-6),
        "gpd_score": lambda k: k.gpd_score(y, xi, nu, 1e-6),
        "sector_maxima": lambda k: k.sector_maxima(angles, y, 45.0),
        "ips_tau": lambda k: k.ips_tau(chain),
    }


def best_time(fn, repeat):
    timer = timeit.Timer(fn)
    number, _ = timer.autorange()
    return min(timer.repeat(repeat, number)) / number


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--sizes", type=int, nargs="+", default=[1_000, 10_000, 100_000])
    parser.add_argument("--repeat", type=int, default=5)
    args = parser.parse_args(argv)
    if _core is None:
        print("compiled extension not available; build with `pip install -e . --no-build-isolation`")
        return 1
    rng = np.random.default_rng(0)
    print(f"{'kernel':<15}{'n':>9}{'python [ms]':>14}{'cython [ms]':>14}{'speed-up':>10}")
    for n in args.sizes:
        for name, call in workloads(n, rng).items():
            t_py = best_time(lambda: call(_core_py), args.repeat)
            t_cy = best_time(lambda: call(_core), args.repeat)
            print(f"{name:<15}{n:>9}{t_py * 1e3:>14.3f}{t_cy * 1e3:>14.3f}{t_py / t_cy:>9.1f}x")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
