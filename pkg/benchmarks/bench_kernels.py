#!/usr/bin/env python3
"""Benchmark the numba kernels against their pure-numpy fallbacks.

Times the composite-quadratic subproblem solver and the push-sum mixing
kernels on desk-scale shapes, then a short end-to-end simulation per
backend (the end-to-end part spawns subprocesses because the backend is
fixed at import time via BLOCKSONA_BACKEND).

Usage:
    python benchmarks/bench_kernels.py [--repeats N] [--skip-e2e]
"""

from __future__ import annotations

import argparse
import os
import subprocess
import sys
import time

import numpy as np

from blocksona import _kernels
from blocksona._kernels import (
    _kernel_sources,
    _numpy_fista_box_l1,
    _numpy_push_mix_mass,
    _numpy_push_mix_phi,
)


def jitted_kernels():
    if _kernels.BACKEND == "numba":
        return (_kernels.fista_box_l1, _kernels.push_mix_phi,
                _kernels.push_mix_mass)
    from numba import njit
    return tuple(njit(cache=True)(fn) for fn in _kernel_sources())


def time_call(fn, args, repeats):
    fn(*args)  # warm up (and trigger jit compilation)
    t0 = time.perf_counter()
    for _ in range(repeats):
        fn(*args)
    return (time.perf_counter() - t0) / repeats


def bench_fista(repeats):
    rng = np.random.default_rng(0)
    rows = []
    fista_nb, _, _ = jitted_kernels()
    for d in (13, 52, 208):
        a = rng.standard_normal((40, d)) / np.sqrt(d)
        h = np.ascontiguousarray(2.0 * a.T @ a + 3.5 * np.eye(d))
        q = rng.standard_normal(d)
        eigs = np.linalg.eigvalsh(h)
        args = (h, q, 0.65, -10.0, 10.0, np.zeros(d),
                float(eigs[-1]), float(eigs[0]), 1e-10, 100_000)
        t_nb = time_call(fista_nb, args, repeats)
        t_np = time_call(_numpy_fista_box_l1, args, repeats)
        rows.append((f"fista d={d}", t_nb, t_np))
    return rows


def bench_mixing(repeats):
    rng = np.random.default_rng(1)
    rows = []
    _, phi_nb, mass_nb = jitted_kernels()
    for n, big_b, d in ((10, 4, 52), (10, 16, 13), (50, 16, 125)):
        a = rng.uniform(0.0, 1.0, (n, n))
        a /= a.sum(axis=0)
        sel = rng.integers(0, big_b, n).astype(np.int64)
        phi = rng.uniform(0.5, 2.0, (n, big_b))
        u = rng.standard_normal((n, big_b * d))
        t_nb = time_call(phi_nb, (a, sel, phi), repeats)
        t_np = time_call(_numpy_push_mix_phi, (a, sel, phi), repeats)
        rows.append((f"mix-phi n={n} B={big_b}", t_nb, t_np))
        t_nb = time_call(mass_nb, (a, sel, phi, u, d), repeats)
        t_np = time_call(_numpy_push_mix_mass, (a, sel, phi, u, d), repeats)
        rows.append((f"mix-mass n={n} B={big_b} d={d}", t_nb, t_np))
    return rows


E2E_SNIPPET = """
import time
import blocksona as bs
from blocksona.block_consensus import BlockLayout, BlockSchedule
from blocksona.core import StepSchedule, run
from blocksona.metrics import make_stationarity_merit
from blocksona.regression import RegressionProblem, generate_instance

inst = generate_instance(10, 208, 40, 0.8, 0.1, seed=27)
graph = bs.generate_connected_erdos_renyi(10, 0.5, 42)
prob = RegressionProblem(inst, BlockLayout.for_dim(208, 4), kind="pl")
sched = BlockSchedule("shifted_round_robin", 4, seed=0)
run(prob, graph, sched, StepSchedule(0.5, 1e-5), max_iters=50,
    merit=make_stationarity_merit(inst))  # warm up jit
t0 = time.perf_counter()
run(prob, graph, sched, StepSchedule(0.5, 1e-5), max_iters=400,
    merit=make_stationarity_merit(inst))
print(f"{time.perf_counter() - t0:.3f}")
"""


def bench_end_to_end():
    rows = []
    for backend in ("numba", "numpy"):
        env = dict(os.environ, BLOCKSONA_BACKEND=backend)
        proc = subprocess.run([sys.executable, "-c", E2E_SNIPPET],
                              capture_output=True, text=True, env=env)
        if proc.returncode != 0:
            print(proc.stderr, file=sys.stderr)
            raise SystemExit(f"end-to-end benchmark failed for {backend}")
        rows.append((backend, float(proc.stdout.strip())))
    return rows


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--repeats", type=int, default=200)
    parser.add_argument("--skip-e2e", action="store_true")
    args = parser.parse_args(argv)

    print(f"kernel backend in this process: {_kernels.BACKEND}")
    print(f"{'kernel':<28s} {'numba':>12s} {'numpy':>12s} {'speedup':>9s}")
    for name, t_nb, t_np in bench_fista(args.repeats) + bench_mixing(args.repeats):
        print(f"{name:<28s} {t_nb * 1e6:>10.1f}us {t_np * 1e6:>10.1f}us "
              f"{t_np / t_nb:>8.1f}x")

    if not args.skip_e2e:
        print("\nend-to-end: 400 iterations, desk scale, B=4, PL surrogate")
        for backend, seconds in bench_end_to_end():
            print(f"  {backend:<8s} {seconds:.3f}s")
    return 0


if __name__ == "__main__":
    sys.exit(main())
