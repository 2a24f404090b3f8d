"""Time the compiled kernels against their interpreted fallbacks.

Runs every hot kernel on a realistic workload through both paths, checks the
outputs agree bit for bit, and prints a timing table.  With
``CHRONOFLOW_NO_NUMBA=1`` (or numba missing) both columns run the same
interpreted code, which the table flags.

Usage::

    python benchmarks/bench_kernels.py [--repeats N]
"""
import argparse
import time

import numpy as np

from chronoflow import _kernels as kn
from chronoflow._accel import NUMBA_ENABLED, python_impl


def _workloads():
    rng = np.random.default_rng(42)
    n = 33
    grid = (-2.0, -2.0, 4.0 / (n - 1), 4.0 / (n - 1), n, n)
    drift_x = -0.5 * np.tile(np.linspace(-2.0, 2.0, n), (n, 1))
    drift_y = drift_x.T.copy()
    diffusion = np.full((n, n), 0.2)
    field = grid + (drift_x, drift_y, diffusion)

    cdf = np.cumsum(rng.dirichlet(np.ones(6), size=6), axis=1)
    cdf[:, -1] = 1.0

    yield ("chain_path", kn.chain_path,
           (cdf, 0, rng.random(200_000)))
    yield ("sde_path", kn.sde_path,
           (0.3, -0.4, 0.01, rng.standard_normal((100_000, 2))) + field)
    yield ("cycle_outcome", kn.cycle_outcome,
           (1.0, 0.0, 1.2, 0.3, 0.01,
            rng.standard_normal((100_000, 2))) + field)
    yield ("dip_statistic_sorted", kn.dip_statistic_sorted,
           (np.sort(rng.random(100_000)),))
    yield ("dip_batch", kn.dip_batch,
           (rng.random((200, 2_000)),))


def _check_equal(name, got, want):
    got = got if isinstance(got, tuple) else (got,)
    want = want if isinstance(want, tuple) else (want,)
    for g, w in zip(got, want):
        if not np.array_equal(np.asarray(g), np.asarray(w)):
            raise AssertionError(f"{name}: compiled and fallback disagree")


def _time(fn, args, repeats):
    best = np.inf
    for _ in range(repeats):
        start = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - start)
    return best


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeats", type=int, default=5,
                        help="timing repetitions per kernel (best is kept)")
    opts = parser.parse_args()

    mode = "numba" if NUMBA_ENABLED else "fallback only"
    print(f"kernel path: {mode}")
    print(f"{'kernel':<22} {'compiled':>10} {'fallback':>10} {'speedup':>8}")
    for name, kernel, args in _workloads():
        fallback = python_impl(kernel)
        kernel(*args)  # absorb the one-time compile cost
        _check_equal(name, kernel(*args), fallback(*args))
        fast = _time(kernel, args, opts.repeats)
        slow = _time(fallback, args, opts.repeats)
        print(f"{name:<22} {fast * 1e3:>9.2f}ms {slow * 1e3:>9.2f}ms "
              f"{slow / fast:>7.1f}x")
    if not NUMBA_ENABLED:
        print("note: both columns ran interpreted code")


if __name__ == "__main__":
    main()
