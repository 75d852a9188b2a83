"""Compare the compiled and numpy kernel backends on representative workloads.

Usage::

    python benchmarks/bench_kernels.py [--repetitions 3] [--scale 1.0]

Prints one line per kernel with the median wall time of each backend, the
speedup, and the largest absolute difference between their outputs.
"""

from __future__ import annotations

import argparse
import statistics
import time

import numpy as np

from fggc.kernels import COSINE, HARMONIC, get_backend


def _median_time(fn, repetitions):
    times, out = [], None
    for _ in range(repetitions):
        t = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t)
    return statistics.median(times), out


def _maxdiff(a, b):
    if isinstance(a, tuple):
        return max(_maxdiff(x, y) for x, y in zip(a, b))
    if a is None:
        return 0.0
    return float(np.max(np.abs(np.asarray(a) - np.asarray(b)))) if np.size(a) else 0.0


def workloads(scale: float):
    rng = np.random.default_rng(0)
    eps = 2.0**-6
    dx = eps
    n = 256
    lo = -2.0
    m = max(1, int(400 * scale))

    q1 = rng.uniform(-0.5, 0.5, (m, 1))
    p1 = rng.uniform(0.5, 1.5, (m, 1))
    yield "rk4_flow 1d cosine", lambda k: k.rk4_flow(q1, p1, COSINE, np.array([1.0, np.pi]), 1e-3, 200, 1)

    q2 = rng.uniform(-0.5, 0.5, (m, 2))
    p2 = rng.uniform(0.5, 1.5, (m, 2))
    yield "rk4_flow 2d harmonic", lambda k: k.rk4_flow(q2, p2, HARMONIC, np.array([1.0, 0.0]), 1e-3, 200, 1)

    ms = max(1, int(4000 * scale))
    Q = rng.uniform(-1.5, 1.5, (ms, 1))
    P = rng.uniform(-2.0, 2.0, (ms, 1))
    coef = rng.normal(size=ms) + 1j * rng.normal(size=ms)

    def run_sum(k):
        field = np.zeros(n, dtype=complex)
        k.gauss_sum(field, (n,), (lo,), dx, Q, P, coef, eps, 9.0 * np.sqrt(eps), 1)
        return field

    yield "gauss_sum 1d", run_sum

    Q2 = rng.uniform(-1.0, 1.0, (max(1, ms // 4), 2))
    P2 = rng.uniform(-2.0, 2.0, (len(Q2), 2))
    coef2 = rng.normal(size=len(Q2)) + 1j * rng.normal(size=len(Q2))

    def run_sum2(k):
        field = np.zeros(n * n, dtype=complex)
        k.gauss_sum(field, (n, n), (lo, lo), dx, Q2, P2, coef2, eps, 9.0 * np.sqrt(eps), 1)
        return field

    yield "gauss_sum 2d", run_sum2

    nfold = 16
    qpos = np.arange(-1.0, 1.0, 0.5 * np.sqrt(eps))[:, None]
    u = rng.normal(size=n) + 1j * rng.normal(size=n)
    yield "fold_blocks 1d", lambda k: k.fold_blocks(u, (n,), (lo,), dx, qpos, nfold, eps, 9.0 * np.sqrt(eps), 1)

    blocks = rng.normal(size=(len(qpos), nfold)) + 1j * rng.normal(size=(len(qpos), nfold))

    def run_tile(k):
        field = np.zeros(n, dtype=complex)
        k.tile_blocks(field, (n,), (lo,), dx, qpos, blocks, nfold, eps, 9.0 * np.sqrt(eps), 1.0, 1)
        return field

    yield "tile_blocks 1d", run_tile


def main(argv=None) -> None:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repetitions", type=int, default=3)
    parser.add_argument("--scale", type=float, default=1.0, help="multiplies the workload sizes")
    args = parser.parse_args(argv)
    _, fast = get_backend("cython")
    _, slow = get_backend("python")
    print(f"{'kernel':24s} {'cython_s':>10s} {'python_s':>10s} {'speedup':>8s} {'max_diff':>10s}")
    for name, fn in workloads(args.scale):
        tc, oc = _median_time(lambda: fn(fast), args.repetitions)
        tp, op = _median_time(lambda: fn(slow), args.repetitions)
        print(f"{name:24s} {tc:10.4f} {tp:10.4f} {tp / tc:8.1f} {_maxdiff(oc, op):10.2e}")


if __name__ == "__main__":
    main()
