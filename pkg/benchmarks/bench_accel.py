"""Timing comparison of the numba fast path vs the pure-numpy fallback.

Run with the default environment for the numba numbers; the fallback numbers
come from calling the undecorated implementations directly, so one process
measures both sides of the switch.

    python3 benchmarks/bench_accel.py
"""

import time

import numpy as np

from madapt import accel
from madapt.plants import pbr, williams_otto


def _time(fn, *args, repeat=200, warmup=2):
    for _ in range(warmup):
        fn(*args)
    t0 = time.perf_counter()
    for _ in range(repeat):
        fn(*args)
    return (time.perf_counter() - t0) / repeat


def bench_kernel_cross():
    rng = np.random.default_rng(0)
    X1 = rng.random((40, 6))
    X2 = rng.random((40, 6))
    ell = 0.2 + rng.random(6)
    out = np.empty((40, 40))
    rows = []
    for kind, name in ((accel.KIND_SE, "se"), (accel.KIND_MATERN32, "matern32")):
        t_np = _time(accel._kernel_cross_numpy, X1, X2, ell, 1.5, kind, out)
        if accel.NUMBA_ENABLED:
            t_jit = _time(accel.kernel_cross_jit, X1, X2, ell, 1.5, kind, out)
        else:
            t_jit = float("nan")
        rows.append((f"kernel_cross[{name}] 40x40x6", t_np, t_jit))
    return rows


def bench_wo_newton():
    kcoef = williams_otto._PLANT_K
    args = (5.5, 88.0 + 273.15, williams_otto.FEED_A, williams_otto.HOLDUP,
            kcoef, True)
    t_py = _time(williams_otto._newton_py, *args, repeat=50)
    if accel.NUMBA_ENABLED:
        t_jit = _time(williams_otto._newton_jit, *args, repeat=500)
    else:
        t_jit = float("nan")
    return [("wo_steady_state_newton", t_py, t_jit)]


def bench_pbr_trajectory():
    par = pbr.ControlParameterization(6)
    u = pbr.default_initial_center(6)
    light, feed = par.split(u)
    pvec = pbr.DEFAULT_PARAMS.as_array()
    out = np.empty((7, 3))
    args = (light, feed, pbr.INITIAL_STATE.copy(), pvec, 25,
            par.stage_hours / 25, True, out)
    t_py = _time(pbr._trajectory_py, *args, repeat=20)
    if accel.NUMBA_ENABLED:
        t_jit = _time(pbr._trajectory_jit, *args, repeat=500)
    else:
        t_jit = float("nan")
    return [("pbr_rk4_trajectory 6x25", t_py, t_jit)]


def main():
    print(f"numba enabled: {accel.NUMBA_ENABLED}")
    print(f"{'kernel':<32}{'numpy/python':>16}{'numba':>16}{'speedup':>10}")
    rows = bench_kernel_cross() + bench_wo_newton() + bench_pbr_trajectory()
    for name, t_np, t_jit in rows:
        speed = t_np / t_jit if t_jit == t_jit else float("nan")
        print(f"{name:<32}{t_np * 1e6:>13.1f} us{t_jit * 1e6:>13.1f} us"
              f"{speed:>9.1f}x")


if __name__ == "__main__":
    main()
