"""Compiled vs numpy kernels on the Example 1 and Example 3 problem sizes.

    python benchmarks/bench_kernels.py [--threads N] [--repeat R]

Prints the best-of-R wall time per kernel and backend, and the speed-up.
"""

import argparse
import time

import numpy as np

from wavesource import _pykernels, kernels
from wavesource.core import SamplingGrid, Signal, TimeGrid, distances, sphere_sensors

try:
    from wavesource import _ckernels
except ImportError:  # pragma: no cover
    _ckernels = None


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.split("\n")[0])
    ap.add_argument("--threads", type=int, default=1)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)
    kernels.set_num_threads(args.threads)

    sp = kernels.signal_params(Signal.gaussian_sine())
    sensors = sphere_sensors(5.0, 8, 8)
    rng = np.random.default_rng(0)

    g1 = SamplingGrid.cube(2.0, 21)
    t1 = TimeGrid(15.0, 64).times
    r1 = np.ascontiguousarray(distances(g1.points(), sensors.points))
    x1 = rng.standard_normal(g1.size)
    y1 = rng.standard_normal((len(sensors), len(t1)))

    g3 = SamplingGrid.cube(3.0, 31)
    t3 = TimeGrid(2 * np.pi, 64).times
    r3 = np.ascontiguousarray(distances(g3.points(), sensors.points))
    u3 = rng.standard_normal((len(sensors), len(t3))) * 1e-3

    cases = {
        "forward  (21^3 grid, 64x64)": lambda m: kernels.forward(r1, t1, x1, 1.0, sp, impl=m),
        "adjoint  (21^3 grid, 64x64)": lambda m: kernels.adjoint(r1, t1, y1, 1.0, sp, impl=m),
        "scan     (31^3 grid, 64 steps)": lambda m: kernels.misfit_scan(r3, t3, u3, 340.0, sp,
                                                                     1e-24, impl=m),
    }
    impls = [("python", _pykernels)] + ([("cython", _ckernels)] if _ckernels else [])
    print(f"threads={args.threads}  repeat={args.repeat}")
    print(f"{'kernel':32s}" + "".join(f"{name:>12s}" for name, _ in impls) + "   speed-up")
    for label, fn in cases.items():
        ts = [best_of(lambda: fn(m), args.repeat) for _, m in impls]
        speed = f"{ts[0] / ts[-1]:9.1f}x" if len(ts) > 1 else ""
        print(f"{label:32s}" + "".join(f"{t:11.3f}s" for t in ts) + "  " + speed)


if __name__ == "__main__":
    main()
