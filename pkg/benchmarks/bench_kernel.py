"""Compare the compiled and numpy episode kernels on the bargaining game.

Usage: ``python3 benchmarks/bench_kernel.py [episodes ...]``
"""

from __future__ import annotations

import sys
import time

import numpy as np

from lqgame import _kernel_py
from lqgame.equilibrium import backward_riccati
from lqgame.scenarios import get_scenario
from lqgame.simulate import _initial, build_plan, draw_episode_noise

try:
    from lqgame import _kernel
except ImportError:
    _kernel = None


def inputs(plan, prior, x0, T, N):
    n1 = plan.n1
    X0 = np.zeros((N, x0.size))
    XP0 = np.zeros((N, n1))
    XE0 = np.zeros((N, n1))
    noise = np.zeros((N, T, plan.noise_width))
    for i in range(N):
        init, steps = draw_episode_noise(0, i, n1, T, plan.noise_width)
        X0[i], XP0[i], XE0[i] = _initial(prior, plan, x0, init, "fixed")
        noise[i] = steps
    return X0, XP0, XE0, noise


def best_of(fn, repeats=3):
    best = float("inf")
    out = None
    for _ in range(repeats):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def main(sizes):
    for name in ("bargain1d-asym", "bargain2d-asym"):
        sc = get_scenario(name)
        ric = backward_riccati(sc.model)
        plan = build_plan(sc.model, sc.prior, ric, "corrected")
        for N in sizes:
            args = inputs(plan, sc.prior, sc.x0, sc.model.T, N)
            t_py, out_py = best_of(lambda: plan.run(*args, impl=_kernel_py.simulate_kernel))
            line = f"{name:16s} N={N:>7d}  numpy {t_py * 1e3:9.2f} ms"
            if _kernel is not None:
                t_cy, out_cy = best_of(lambda: plan.run(*args, impl=_kernel.simulate_kernel))
                same = all(np.array_equal(a, b) for a, b in zip(out_py, out_cy))
                line += f"  cython {t_cy * 1e3:9.2f} ms  speedup {t_py / t_cy:6.2f}x  identical={same}"
            else:
                line += "  cython unavailable"
            print(line)


if __name__ == "__main__":
    main([int(a) for a in sys.argv[1:]] or [100, 1_000, 10_000, 100_000])
