"""Best-bound branch-and-bound over binary variables."""
from __future__ import annotations

import heapq
import itertools
import time

import numpy as np

from .problem import INT_TOL, OPT_TOL, LpSolution, MilpProblem, Status
from .simplex import solve_lp


def most_fractional(x, binaries, tol=INT_TOL):
    """Binary variable farthest from integrality (lowest index on ties), or ``None``."""
    if not binaries:
        return None
    vals = x[list(binaries)]
    frac = np.abs(vals - np.round(vals))
    k = int(np.argmax(frac))
    return binaries[k] if frac[k] > tol else None


def solve_milp(problem: MilpProblem, time_limit=60.0, node_limit=None, backend=None) -> LpSolution:
    """Branch-and-bound with LP relaxations, best-bound node selection and most-fractional branching.

    Equal bounds are explored deeper-first. On timeout the status is TimedOut
    and ``x`` holds the incumbent, if one was found. ``incumbent_history``
    records each improving objective value in order.
    """
    if not time_limit > 0:
        raise ValueError(f"time_limit must be positive, got {time_limit}")
    base = problem.base
    bins = problem.binary_vars
    lo0 = np.array(base.var_lo)
    hi0 = np.array(base.var_hi)
    lo0[list(bins)] = np.maximum(lo0[list(bins)], 0.0)
    hi0[list(bins)] = np.minimum(hi0[list(bins)], 1.0)
    if np.any(lo0 > hi0):
        return LpSolution(Status.INFEASIBLE)

    t0 = time.perf_counter()
    counter = itertools.count()
    best_x, best_obj = None, np.inf
    history = []
    nodes = 0
    iters = 0

    def dominated(bound):
        return bound >= best_obj - OPT_TOL * max(1.0, abs(best_obj)) if best_x is not None else False

    def relax(lo, hi):
        nonlocal nodes, iters
        nodes += 1
        sol = solve_lp(base.with_bounds(lo, hi), backend=backend)
        iters += sol.iterations
        return sol

    root = relax(lo0, hi0)
    if root.status is Status.UNBOUNDED:
        return LpSolution(Status.UNBOUNDED, nodes=nodes, iterations=iters)
    heap = []
    if root.status is Status.OPTIMAL:
        heapq.heappush(heap, (root.objective_value, 0, next(counter), lo0, hi0, root))

    timed_out = False
    while heap:
        if time.perf_counter() - t0 > time_limit or (node_limit is not None and nodes >= node_limit):
            timed_out = True
            break
        bound, negdepth, _, lo, hi, sol = heapq.heappop(heap)
        if dominated(bound):
            continue
        j = most_fractional(sol.x, bins)
        if j is None:
            x = sol.x.copy()
            x[list(bins)] = np.round(x[list(bins)])
            obj = float(base.objective @ x)
            if obj < best_obj:
                best_x, best_obj = x, obj
                history.append(obj)
            continue
        for val in (0.0, 1.0):
            clo, chi = lo.copy(), hi.copy()
            clo[j] = chi[j] = val
            child = relax(clo, chi)
            if child.status is Status.UNBOUNDED:
                return LpSolution(Status.UNBOUNDED, nodes=nodes, iterations=iters)
            if child.status is Status.OPTIMAL and not dominated(child.objective_value):
                heapq.heappush(heap, (child.objective_value, negdepth - 1, next(counter), clo, chi, child))

    if timed_out:
        return LpSolution(Status.TIMED_OUT, best_x, best_obj if best_x is not None else float("nan"),
                          iters, base.residual(best_x) if best_x is not None else float("nan"), nodes, history)
    if best_x is None:
        return LpSolution(Status.INFEASIBLE, nodes=nodes, iterations=iters)
    return LpSolution(Status.OPTIMAL, best_x, best_obj, iters, base.residual(best_x), nodes, history)
