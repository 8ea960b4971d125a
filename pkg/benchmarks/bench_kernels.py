"""Jitted vs pure-numpy simplex kernels.

Times the avoidance LP of typical colliding pairs (the hot path of every
pairwise call) and random dense LPs with both backends, after a warm-up call
so compilation is not counted. Also checks that both backends agree.

    python benchmarks/bench_kernels.py [--pairs 30] [--random 30] [--size 60]
"""
import argparse
import time

import numpy as np

from deconflict.campc import solve_campc
from deconflict.dynamics import build_model
from deconflict.geometry import tube_from_trajectory
from deconflict.lp import LpProblem, solve_lp
from deconflict.policies import greedy_policy
from deconflict.scenarios import gen_colliding_pair


def random_lp(rng, m, n):
    A = rng.normal(size=(m, n))
    x0 = rng.uniform(0, 1, n)
    b = A @ x0 + rng.uniform(0, 1, m)
    return LpProblem(rng.normal(size=n), ineq_lhs=A, ineq_rhs=b, var_lo=np.zeros(n), var_hi=np.full(n, 2.0))


def timed(fn, reps=1):
    t0 = time.perf_counter()
    for _ in range(reps):
        out = fn()
    return (time.perf_counter() - t0) / reps, out


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--pairs", type=int, default=30)
    ap.add_argument("--random", type=int, default=30)
    ap.add_argument("--size", type=int, default=60)
    args = ap.parse_args()

    model = build_model()
    cases = []
    for seed in range(args.pairs):
        sc = gen_colliding_pair(seed, rho=0.05)
        p = sc.preplans(model)
        d = greedy_policy(p[1], p[2], sc.delta).decisions
        cases.append((p[1], p[2], tube_from_trajectory(p[1], 0.05), d))
    rng = np.random.default_rng(0)
    lps = [random_lp(rng, args.size, args.size + 20) for _ in range(args.random)]

    for backend in ("numba", "numpy"):
        solve_lp(lps[0], backend=backend)  # warm-up / compile
        solve_campc(cases[0][0], cases[0][1], cases[0][2], cases[0][3], -1, model, 0.1, backend=backend)

    print(f"{'workload':<28s}{'numba ms':>10s}{'numpy ms':>10s}{'speedup':>9s}")
    res = {}
    for name, items, run in (
            ("avoidance LP (one stage)", cases,
             lambda c, b: solve_campc(c[0], c[1], c[2], c[3], -1, model, 0.1, backend=b).slack_sum),
            (f"random LP {args.size}x{args.size + 20}", lps,
             lambda lp, b: solve_lp(lp, backend=b).objective_value)):
        t = {}
        for backend in ("numba", "numpy"):
            times, vals = zip(*(timed(lambda: run(it, backend)) for it in items))
            t[backend] = 1e3 * float(np.mean(times))
            res[(name, backend)] = np.array(vals)
        gap = float(np.max(np.abs(res[(name, "numba")] - res[(name, "numpy")])))
        print(f"{name:<28s}{t['numba']:10.3f}{t['numpy']:10.3f}{t['numpy'] / t['numba']:8.1f}x"
              f"   max |objective gap| {gap:.1e}")


if __name__ == "__main__":
    main()
