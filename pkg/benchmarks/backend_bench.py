"""Compare the compiled and pure-numpy implementations of the hot kernels.

Runs each kernel on realistic workloads under both backends and prints a
timing table plus agreement checks.  The chain row times a short sampler
run end to end in a subprocess per backend (the dispatch is fixed at
import time by ``SGCP_BACKEND``), which is where the kernels matter.

Usage::

    python benchmarks/backend_bench.py [--repeat 7]
"""

import argparse
import os
import subprocess
import sys
import time

import numpy as np

from sgcp import Grid, rng_for
from sgcp._accel import (NUMBA_AVAILABLE, interp_multilinear_nb,
                         interp_multilinear_np, sgcp_suffstats_nb,
                         sgcp_suffstats_np, sigmoid_nb, sigmoid_np,
                         sq_exp_cov_nb, sq_exp_cov_np, trapezoid_weights)

CHAIN_SNIPPET = """
import time
from sgcp import ChainConfig, SgcpPrior, rng_for, run_chain, simulate_thinning
from sgcp.truths import get_truth

prior = SgcpPrior(dim=1)
truth = get_truth("sin1d").field(64)
rng = rng_for(5, 0)
patterns = [simulate_thinning(3.0, truth, rng) for _ in range(40)]
cfg = ChainConfig(n_iter=2000, n_burn=500, thin=5, resolution=64)
run_chain(patterns, prior, cfg, rng_for(5, 1))  # warm-up (includes any JIT)
best = float("inf")
for _ in range({repeat}):
    t0 = time.perf_counter()
    run_chain(patterns, prior, cfg, rng_for(5, 1))
    best = min(best, time.perf_counter() - t0)
print(best)
"""


def best_of(fn, repeat: int) -> float:
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def build_workloads(rng):
    grid1 = Grid(1, 512)
    grid2 = Grid(2, 64)
    big = rng.standard_normal(200000)
    values1 = rng.standard_normal(grid1.n_nodes)
    values2 = rng.standard_normal(grid2.n_nodes)
    pts1 = rng.random((5000, 1))
    pts2 = rng.random((5000, 2))
    w1 = trapezoid_weights(1, 512)
    w2 = trapezoid_weights(2, 64)
    nodes = Grid(1, 256).nodes()
    return [
        ("sigmoid 200k", lambda f: f(big), sigmoid_np, sigmoid_nb),
        ("interp 1d 5k pts", lambda f: f(values1, 1, 512, pts1),
         interp_multilinear_np, interp_multilinear_nb),
        ("interp 2d 5k pts", lambda f: f(values2, 2, 64, pts2),
         interp_multilinear_np, interp_multilinear_nb),
        ("suffstats 1d", lambda f: f(values1, w1, pts1, 1, 512),
         sgcp_suffstats_np, sgcp_suffstats_nb),
        ("suffstats 2d", lambda f: f(values2, w2, pts2, 2, 64),
         sgcp_suffstats_np, sgcp_suffstats_nb),
        ("sq-exp cov 256", lambda f: f(nodes, 1.3),
         sq_exp_cov_np, sq_exp_cov_nb),
    ]


def chain_seconds(repeat: int, backend: str) -> float:
    env = dict(os.environ, SGCP_BACKEND=backend)
    out = subprocess.run([sys.executable, "-c", CHAIN_SNIPPET.format(repeat=repeat)],
                         env=env, capture_output=True, text=True, check=True)
    return float(out.stdout.strip())


def _agree(a, b) -> bool:
    if isinstance(a, tuple):
        return all(_agree(x, y) for x, y in zip(a, b))
    return bool(np.allclose(a, b, rtol=1e-10, atol=1e-12))


def run(repeat: int) -> int:
    if not NUMBA_AVAILABLE:
        print("numba is not importable; nothing to compare")
        return 1
    rng = rng_for(5)
    rows = []
    for name, call, f_np, f_nb in build_workloads(rng):
        call(f_nb)  # trigger compilation outside the timed region
        agree = _agree(call(f_np), call(f_nb))
        t_np = best_of(lambda: call(f_np), repeat)
        t_nb = best_of(lambda: call(f_nb), repeat)
        rows.append((name, t_np, t_nb, agree))
    reps = max(2, repeat // 3)
    rows.append(("chain 2000 iters", chain_seconds(reps, "numpy"),
                 chain_seconds(reps, "numba"), True))

    width = max(len(r[0]) for r in rows)
    print(f"{'workload':<{width}}  {'numpy':>10}  {'numba':>10}  {'speedup':>8}  agree")
    for name, a, b, agree in rows:
        print(f"{name:<{width}}  {a * 1e3:>8.3f}ms  {b * 1e3:>8.3f}ms  "
              f"{a / b:>7.2f}x  {'yes' if agree else 'NO'}")
    return 0 if all(r[3] for r in rows) else 1


if __name__ == "__main__":
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=7,
                        help="timing repetitions per workload (best-of)")
    args = parser.parse_args()
    raise SystemExit(run(args.repeat))
