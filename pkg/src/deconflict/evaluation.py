"""Batch evaluation of decision policies on pools of colliding pairs.

Each pool instance is a two-vehicle :class:`Scenario`. For every tube ratio
``rho / delta`` the tubes are rebuilt around the same pre-plans and every
policy gets one pairwise-avoidance call per instance. Timing covers decision
inference plus both avoidance stages (and repairs where enabled), not
scenario generation or I/O.

Policy names:

``random``, ``greedy``, ``learned``
    Decision source followed by the two avoidance stages.
``<name>+repair``
    Same, with decision repair on failure.
``oracle``
    Centralized solver decisions followed by the two stages.
``milp``
    Centralized solver trajectories used directly. Its rate is over the
    instances where the solver reports a solution.
"""
from __future__ import annotations

import csv
import json
import time
from dataclasses import dataclass, field

import numpy as np

from .central import solve_central
from .geometry import conflict_indices, tube_from_trajectory
from .lnf import l2f, l2f_with_repair, run_stages
from .policies import GreedyPolicy, LearnedPolicy, RandomPolicy
from .scenarios import gen_colliding_pair

BASE_POLICIES = ("random", "greedy", "learned", "oracle", "milp")
CSV_FIELDS = ("policy", "rho_over_delta", "n", "separation_rate", "mean_ms", "std_ms")


def parse_policy(name):
    """``(base, repair)`` from a policy name such as ``learned+repair``."""
    base, plus, suffix = name.partition("+")
    if base not in BASE_POLICIES or (plus and suffix != "repair") or (plus and base in ("oracle", "milp")):
        raise ValueError(f"unknown policy {name!r}")
    return base, bool(plus)


def build_pool(n, model, delta, seed, feasible_ratio=0.5, scenario_params=None, backend=None):
    """``n`` colliding pairs whose centralized problem is feasible at ``rho = feasible_ratio * delta``.

    Feasibility only grows with the tube radius, so the pool is feasible at
    every larger ratio too.
    """
    rng = np.random.default_rng(seed)
    rho = feasible_ratio * delta
    pool = []
    while len(pool) < n:
        sc = gen_colliding_pair(int(rng.integers(2**31)), dt=model.dt, delta=delta, rho=rho,
                                **(scenario_params or {}))
        p = sc.preplans(model)
        t1, t2 = tube_from_trajectory(p[1], rho), tube_from_trajectory(p[2], rho)
        if solve_central(p[1], p[2], t1, t2, model, delta, backend=backend).feasible:
            pool.append(sc)
    return pool


@dataclass(frozen=True)
class InstanceRecord:
    policy: str
    rho_over_delta: float
    instance: int
    counted: bool
    separated: bool
    ms: float
    conflicts_before: int
    conflicts_after: int
    repairs: int = 0


@dataclass
class EvalReport:
    records: list = field(default_factory=list)

    def summary(self):
        """One row per ``(policy, rho_over_delta)`` in first-seen order."""
        groups = {}
        for r in self.records:
            groups.setdefault((r.policy, r.rho_over_delta), []).append(r)
        rows = []
        for (policy, ratio), recs in groups.items():
            counted = [r for r in recs if r.counted]
            ms = np.array([r.ms for r in recs])
            rate = float(np.mean([r.separated for r in counted])) if counted else float("nan")
            rows.append({"policy": policy, "rho_over_delta": ratio, "n": len(counted),
                         "separation_rate": rate, "failure_rate": 1.0 - rate,
                         "mean_ms": float(ms.mean()), "std_ms": float(ms.std()),
                         "conflicts_before": int(sum(r.conflicts_before for r in counted)),
                         "conflicts_after": int(sum(r.conflicts_after for r in counted))})
        return rows

    def rate(self, policy, ratio):
        for row in self.summary():
            if row["policy"] == policy and row["rho_over_delta"] == ratio:
                return row["separation_rate"]
        raise KeyError((policy, ratio))

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=CSV_FIELDS, extrasaction="ignore")
            w.writeheader()
            for row in self.summary():
                w.writerow(row)

    def write_records(self, path):
        with open(path, "w") as fh:
            for r in self.records:
                fh.write(json.dumps(r.__dict__) + "\n")


def recount(records_path):
    """Separation rates ``{(policy, ratio): rate}`` recomputed from a records file."""
    hits, totals = {}, {}
    with open(records_path) as fh:
        for line in fh:
            r = json.loads(line)
            if not r["counted"]:
                continue
            key = (r["policy"], r["rho_over_delta"])
            totals[key] = totals.get(key, 0) + 1
            hits[key] = hits.get(key, 0) + int(r["separated"])
    return {k: hits[k] / totals[k] for k in totals}


def _decision_source(base, delta, model, classifier, seed, index):
    if base == "random":
        return RandomPolicy(seed + index)
    if base == "greedy":
        return GreedyPolicy(delta)
    if classifier is None:
        raise ValueError("the learned policy needs a classifier")
    return LearnedPolicy(classifier)


def evaluate_policies(pool, policies, model, delta, rho_over_delta_list, classifier=None, seed=0, backend=None):
    """Run every policy on every pool instance at every tube ratio.

    Parameters
    ----------
    pool : sequence of Scenario
        Two-vehicle scenarios; vehicle with the lower priority moves first.
    policies : sequence of str
        Names as described in the module docstring.
    model : DynamicsModel
    delta : float
    rho_over_delta_list : sequence of float
    classifier : SequenceClassifier, optional
        Needed by ``learned`` policies.
    seed : int
        Base seed of the random policy; instance ``i`` uses ``seed + i`` at
        every ratio.

    Returns
    -------
    EvalReport
    """
    if not len(pool):
        raise ValueError("empty pool")
    parsed = [(name, *parse_policy(name)) for name in policies]
    plans = []
    for sc in pool:
        p = sc.preplans(model)
        a, b = sorted(sc.uas, key=lambda u: u.priority)[:2]
        plans.append((p[a.id], p[b.id]))
    report = EvalReport()
    for ratio in rho_over_delta_list:
        rho = ratio * delta
        for i, (x1, x2) in enumerate(plans):
            t1, t2 = tube_from_trajectory(x1, rho), tube_from_trajectory(x2, rho)
            before = len(conflict_indices(x1, x2, delta))
            central, central_ms = None, 0.0
            if any(base in ("oracle", "milp") for _, base, _ in parsed):
                t0 = time.perf_counter()
                central = solve_central(x1, x2, t1, t2, model, delta, backend=backend)
                central_ms = 1e3 * (time.perf_counter() - t0)
            for name, base, repair in parsed:
                if base == "milp":
                    ok = central.feasible
                    after = len(conflict_indices(central.traj1_new, central.traj2_new, delta)) if ok else before
                    report.records.append(InstanceRecord(name, ratio, i, ok, ok and after == 0, central_ms,
                                                         before, after))
                    continue
                if base == "oracle":
                    if not central.feasible:
                        report.records.append(InstanceRecord(name, ratio, i, True, False, central_ms, before, before))
                        continue
                    t0 = time.perf_counter()
                    out = run_stages(x1, x2, t1, t2, central.decisions, model, delta, backend)
                    ms = central_ms + 1e3 * (time.perf_counter() - t0)
                else:
                    cr = _decision_source(base, delta, model, classifier, seed, i)
                    solver = l2f_with_repair if repair else l2f
                    t0 = time.perf_counter()
                    out = solver(x1, x2, t1, t2, cr, model, delta, backend=backend)
                    ms = 1e3 * (time.perf_counter() - t0)
                after = len(conflict_indices(out.traj1_new, out.traj2_new, delta))
                report.records.append(InstanceRecord(name, ratio, i, True, out.separated, ms, before, after,
                                                     out.repairs_attempted))
    return report
