"""Pairwise two-stage avoidance, decision repair, and the multi-vehicle loop with tube shrinking."""
from __future__ import annotations

import json
import time
from dataclasses import dataclass, field, replace

import numpy as np

from .campc import CampcInfeasibleError, solve_campc, verify_separation
from .geometry import DegenerateShrinkError, conflict_indices, separations, shrink_tubes
from .policies import CrOutput, OracleInfeasibleError, repair_sequences

STAGE1 = "Stage1Separated"
STAGE2 = "Stage2Separated"
DESPITE_SLACK = "SeparatedDespiteSlack"
FAILED = "Failed"
NO_DECISIONS = "NoDecisions"

# pair rows leave ``calls`` null; the per-step row (pair null, status "Step")
# leaves the slack and repair fields null
LOG_FIELDS = ("step", "pair", "status", "slack1", "slack2", "repairs", "min_sep", "wall_us", "calls")


@dataclass(frozen=True)
class L2fOutcome:
    status: str
    traj1_new: object
    traj2_new: object
    inputs1: np.ndarray | None
    inputs2: np.ndarray | None
    slack_sums: tuple
    decisions_used: np.ndarray
    repairs_attempted: int = 0
    diagnostic: str = ""

    @property
    def separated(self):
        return self.status != FAILED

    @property
    def zero_slack(self):
        return self.status in (STAGE1, STAGE2)


def _cr_output(cr, x1, x2, tube1, tube2):
    out = cr if isinstance(cr, CrOutput) else cr(x1, x2, tube1, tube2)
    if len(out.decisions) != x1.horizon + 1:
        raise ValueError("decision sequence length does not match the horizon")
    return out


def run_stages(x1, x2, tube1, tube2, d, model, delta, backend=None):
    """Both CA-MPC stages for a fixed decision sequence; ``x1`` moves first."""
    d = np.asarray(d)
    inputs2 = None if x2.inputs is None else np.array(x2.inputs)
    try:
        r1 = solve_campc(x1, x2, tube1, d, -1, model, delta, backend=backend)
    except CampcInfeasibleError as exc:
        return L2fOutcome(FAILED, x1, x2, None, inputs2, (np.inf, np.inf), d, diagnostic=f"stage 1: {exc}")
    if r1.zero_slack:
        return L2fOutcome(STAGE1, r1.traj_new, x2, r1.inputs_new, inputs2, (r1.slack_sum, 0.0), d)
    try:
        r2 = solve_campc(x2, r1.traj_new, tube2, d, 1, model, delta, backend=backend)
    except CampcInfeasibleError as exc:
        return L2fOutcome(FAILED, r1.traj_new, x2, r1.inputs_new, inputs2, (r1.slack_sum, np.inf), d,
                          diagnostic=f"stage 2: {exc}")
    sums = (r1.slack_sum, r2.slack_sum)
    if r2.zero_slack:
        status = STAGE2
    elif verify_separation(r1.traj_new, r2.traj_new, delta):
        status = DESPITE_SLACK
    else:
        status = FAILED
    return L2fOutcome(status, r1.traj_new, r2.traj_new, r1.inputs_new, r2.inputs_new, sums, d)


def l2f(x1, x2, tube1, tube2, cr, model, delta, backend=None):
    """Two-stage pairwise avoidance; ``x1`` is the lower-priority vehicle and tries alone first.

    ``cr`` is a policy callable or a precomputed :class:`CrOutput`.
    """
    if len(conflict_indices(x1, x2, delta)) == 0:
        raise ValueError("trajectories are not in conflict")
    out = _cr_output(cr, x1, x2, tube1, tube2)
    return run_stages(x1, x2, tube1, tube2, out.decisions, model, delta, backend)


def l2f_with_repair(x1, x2, tube1, tube2, cr, model, delta, backend=None):
    """:func:`l2f`, then on failure retry with the five repaired sequences in order."""
    if len(conflict_indices(x1, x2, delta)) == 0:
        raise ValueError("trajectories are not in conflict")
    out = _cr_output(cr, x1, x2, tube1, tube2)
    first = run_stages(x1, x2, tube1, tube2, out.decisions, model, delta, backend)
    if first.separated:
        return first
    ks = conflict_indices(first.traj1_new, first.traj2_new, delta)
    if len(ks) == 0:
        ks = conflict_indices(x1, x2, delta)
    for n, d in enumerate(repair_sequences(out.decisions, out.probabilities, ks), start=1):
        res = run_stages(x1, x2, tube1, tube2, d, model, delta, backend)
        if res.separated:
            return replace(res, repairs_attempted=n)
    return replace(first, repairs_attempted=5)


@dataclass(frozen=True)
class UasPlan:
    id: int
    priority: int
    traj: object
    tube: object


@dataclass(frozen=True)
class FleetState:
    uas: tuple

    def __post_init__(self):
        uas = tuple(self.uas)
        prios = [u.priority for u in uas]
        if len(set(prios)) != len(prios):
            raise ValueError("priorities must be distinct")
        if len({u.id for u in uas}) != len(uas):
            raise ValueError("ids must be distinct")
        if len({u.traj.horizon for u in uas}) > 1 or len({u.traj.dt for u in uas}) > 1:
            raise ValueError("fleet trajectories must share horizon and dt")
        for u in uas:
            if len(u.tube) != u.traj.horizon + 1:
                raise ValueError(f"tube length of UAS {u.id} does not match its trajectory")
        object.__setattr__(self, "uas", uas)

    def get(self, uid):
        for u in self.uas:
            if u.id == uid:
                return u
        raise KeyError(uid)

    def with_plan(self, uid, traj, tube):
        return FleetState(tuple(replace(u, traj=traj, tube=tube) if u.id == uid else u for u in self.uas))

    def by_priority(self):
        return sorted(self.uas, key=lambda u: u.priority)

    def pairwise_min_separation(self):
        """``{(i, j): min_k |p_i - p_j|_inf}`` over all id pairs with ``i < j`` in priority order."""
        ordered = self.by_priority()
        out = {}
        for a, ua in enumerate(ordered):
            for ub in ordered[a + 1:]:
                out[(ua.id, ub.id)] = float(separations(ua.traj, ub.traj).min())
        return out

    def advance(self, k=1):
        return FleetState(tuple(replace(u, traj=u.traj.suffix(k), tube=u.tube.suffix(k)) for u in self.uas))


def detect_conflicts(fleet, uid, delta):
    """Ids of vehicles in conflict with ``uid``, ordered by priority."""
    me = fleet.get(uid)
    return [u.id for u in fleet.by_priority()
            if u.id != uid and len(conflict_indices(me.traj, u.traj, delta))]


@dataclass
class PairRecord:
    pair: tuple
    outcome: L2fOutcome | None
    status: str
    wall_us: int
    min_sep: float
    note: str = ""


@dataclass
class LnfStepResult:
    fleet: FleetState
    pairs: list = field(default_factory=list)
    l2f_call_count: int = 0
    unresolved: list = field(default_factory=list)


def lnf_step(fleet, cr, model, delta, repair=True, shrink=True, backend=None):
    """One pass of pairwise avoidance over the fleet.

    Vehicles are visited in ascending priority. Each one re-detects its
    conflicts against the current committed plans and resolves them in
    priority order, skipping pairs an earlier fix has already cleared. Every
    pair is handled at most once per step, so the call
    count never exceeds ``N (N - 1) / 2``. The lower-priority vehicle of a pair
    moves first. Successful outcomes are committed and, when ``shrink`` is set,
    both tubes are shrunk around the new plans.
    """
    solver = l2f_with_repair if repair else l2f
    done = set()
    res = LnfStepResult(fleet)
    n = len(fleet.uas)
    for me in fleet.by_priority():
        for other in detect_conflicts(res.fleet, me.id, delta):
            key = frozenset((me.id, other))
            if key in done:
                continue
            a, b = sorted((res.fleet.get(me.id), res.fleet.get(other)), key=lambda u: u.priority)
            # an earlier fix in this pass may already have cleared this pair
            if len(conflict_indices(a.traj, b.traj, delta)) == 0:
                continue
            done.add(key)
            t0 = time.perf_counter()
            pair = (a.id, b.id)
            res.l2f_call_count += 1
            assert res.l2f_call_count <= n * (n - 1) // 2
            try:
                out = solver(a.traj, b.traj, a.tube, b.tube, cr, model, delta, backend=backend)
            except OracleInfeasibleError as exc:
                wall = int(round((time.perf_counter() - t0) * 1e6))
                res.unresolved.append(pair)
                sep = float(separations(a.traj, b.traj).min())
                res.pairs.append(PairRecord(pair, None, NO_DECISIONS, wall, sep, str(exc)))
                continue
            wall = int(round((time.perf_counter() - t0) * 1e6))
            sep = float(separations(out.traj1_new, out.traj2_new).min())
            if not out.separated:
                res.unresolved.append(pair)
                res.pairs.append(PairRecord(pair, out, out.status, wall, sep, out.diagnostic))
                continue
            tube_a, tube_b = a.tube, b.tube
            if shrink:
                try:
                    tube_a, tube_b = shrink_tubes(out.traj1_new, out.traj2_new, a.tube, b.tube, delta)
                except DegenerateShrinkError as exc:
                    res.unresolved.append(pair)
                    res.pairs.append(PairRecord(pair, out, "DegenerateShrink", wall, sep, str(exc)))
                    continue
            res.fleet = res.fleet.with_plan(a.id, out.traj1_new, tube_a).with_plan(b.id, out.traj2_new, tube_b)
            res.pairs.append(PairRecord(pair, out, out.status, wall, sep))
    return res


def _log_line(step, rec=None, min_sep=None, wall_us=0, calls=None):
    if rec is None:
        row = (step, None, "Step", None, None, None, min_sep, wall_us, calls)
    else:
        o = rec.outcome
        s1, s2 = (None, None) if o is None else (float(o.slack_sums[0]), float(o.slack_sums[1]))
        s1 = None if s1 is not None and not np.isfinite(s1) else s1
        s2 = None if s2 is not None and not np.isfinite(s2) else s2
        row = (step, list(rec.pair), rec.status, s1, s2, 0 if o is None else o.repairs_attempted,
               rec.min_sep, rec.wall_us, None)
    return json.dumps(dict(zip(LOG_FIELDS, row)))


@dataclass
class RunResult:
    executed: dict
    log_lines: list
    steps: list


def simulate_receding_horizon(fleet, cr, model, delta, n_steps=None, repair=True, shrink=True, backend=None):
    """Run ``lnf_step`` then apply each vehicle's first input, ``n_steps`` times.

    Plans and tubes are shifted by one sample per step, so the horizon shrinks
    as the run proceeds; ``n_steps`` defaults to the full horizon. Returns the
    executed states per id (``(n_steps + 1, 6)``), the run-log lines and the
    per-step results.
    """
    H = fleet.uas[0].traj.horizon
    n_steps = H if n_steps is None else int(n_steps)
    if not 0 <= n_steps <= H:
        raise ValueError(f"n_steps must be in 0..{H}")
    executed = {u.id: [np.array(u.traj.states[0])] for u in fleet.uas}
    lines, steps = [], []
    for s in range(n_steps):
        t0 = time.perf_counter()
        res = lnf_step(fleet, cr, model, delta, repair=repair, shrink=shrink, backend=backend)
        wall = int(round((time.perf_counter() - t0) * 1e6))
        steps.append(res)
        lines += [_log_line(s, rec) for rec in res.pairs]
        fleet = res.fleet
        seps = fleet.pairwise_min_separation()
        lines.append(_log_line(s, None, min(seps.values()) if seps else None, wall, res.l2f_call_count))
        for u in fleet.uas:
            if u.traj.inputs is None:
                raise ValueError(f"plan of UAS {u.id} has no inputs to apply")
            executed[u.id].append(np.array(u.traj.states[1]))
        fleet = fleet.advance(1)
    return RunResult({k: np.array(v) for k, v in executed.items()}, lines, steps)
