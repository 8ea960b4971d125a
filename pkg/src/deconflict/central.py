"""Centralized two-vehicle deconfliction: a joint feasibility problem in which
both vehicles stay in their tubes and, at every timestep, one of the six
separating sides holds.

Two solvers are provided. ``bigm`` writes the textbook big-M MILP and hands it
to the generic branch-and-bound. ``disjunctive`` (default) branches directly on
the side chosen at each timestep that is still in conflict, and checks each
node with per-axis LPs; it explores the same disjunction and is exact, but its
nodes are far smaller.
"""
from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .campc import _position_gain, _velocity_rows_redundant
from .dynamics import Trajectory, reference_inputs, rollout
from .geometry import (EPS_SEP, N_SIDES, SIDE_AXIS, SIDE_SIGN, positions_of, separations, side_matrix,
                       tube_distances)
from .lp import LpProblem, MilpProblem, Status, solve_lp, solve_milp

FEASIBLE, INFEASIBLE, TIMED_OUT = "Feasible", "Infeasible", "TimedOut"


@dataclass(frozen=True)
class MilpDeconflictResult:
    status: str
    traj1_new: Trajectory | None = None
    traj2_new: Trajectory | None = None
    inputs1: np.ndarray | None = None
    inputs2: np.ndarray | None = None
    binaries: np.ndarray | None = None
    decisions: np.ndarray | None = None
    nodes: int = 0

    @property
    def feasible(self):
        return self.status == FEASIBLE


def default_big_m(tube1, tube2, delta):
    """Workspace diameter over both tubes plus ``delta + 1``."""
    lo = np.minimum(tube1.lo.min(axis=0), tube2.lo.min(axis=0))
    hi = np.maximum(tube1.hi.max(axis=0), tube2.hi.max(axis=0))
    return float(np.max(hi - lo)) + float(delta) + 1.0


def _check_inputs(x1, x2, tube1, tube2):
    H = x1.horizon
    if x2.horizon != H or len(tube1) != H + 1 or len(tube2) != H + 1:
        raise ValueError("horizons of trajectories and tubes differ")
    if abs(x1.dt - x2.dt) > 1e-12:
        raise ValueError("trajectories use different dt")
    return H


def decisions_from_binaries(binaries):
    """Lowest active side per timestep (1-based)."""
    b = np.asarray(binaries)
    if b.ndim != 2 or b.shape[1] != N_SIDES:
        raise ValueError("binaries must have shape (H+1, 6)")
    active = b > 0.5
    if not np.all(active.any(axis=1)):
        raise ValueError("some timestep has no active side")
    return np.argmax(active, axis=1) + 1


def build_central_milp(x1, x2, tube1, tube2, model, delta, mu=None):
    """Big-M feasibility MILP.

    Variable order: ``u1 (H x 3), u2 (H x 3), x1 (H+1 x 6), x2 (H+1 x 6), b (H+1 x 6)``.
    """
    H = _check_inputs(x1, x2, tube1, tube2)
    if mu is None:
        mu = default_big_m(tube1, tube2, delta)
    if not mu > 0:
        raise ValueError(f"big-M constant must be positive, got {mu}")
    nu, nx, nb = 3 * H, 6 * (H + 1), N_SIDES * (H + 1)
    n = 2 * nu + 2 * nx + nb
    u_off = (0, nu)
    x_off = (2 * nu, 2 * nu + nx)
    b_off = 2 * nu + 2 * nx
    A_eq = np.zeros((2 * nx, n))
    b_eq = np.zeros(2 * nx)
    lo = np.full(n, -np.inf)
    hi = np.full(n, np.inf)
    for j, (xj, tube) in enumerate(((x1, tube1), (x2, tube2))):
        r0 = j * nx
        xo = lambda k: x_off[j] + 6 * k
        A_eq[r0:r0 + 6, xo(0):xo(0) + 6] = np.eye(6)
        b_eq[r0:r0 + 6] = xj.states[0]
        for k in range(H):
            r = slice(r0 + 6 * (k + 1), r0 + 6 * (k + 2))
            A_eq[r, xo(k + 1):xo(k + 1) + 6] = np.eye(6)
            A_eq[r, xo(k):xo(k) + 6] = -model.A
            A_eq[r, u_off[j] + 3 * k:u_off[j] + 3 * k + 3] = -model.B
        lo[u_off[j]:u_off[j] + nu] = np.tile(model.u_lo, H)
        hi[u_off[j]:u_off[j] + nu] = np.tile(model.u_hi, H)
        for k in range(H + 1):
            lo[xo(k):xo(k) + 3], hi[xo(k):xo(k) + 3] = tube.lo[k], tube.hi[k]
            lo[xo(k) + 3:xo(k) + 6], hi[xo(k) + 3:xo(k) + 6] = -model.v_max, model.v_max
    lo[b_off:], hi[b_off:] = 0.0, 1.0
    M, q = side_matrix(delta)
    A_ub = np.zeros((nb + H + 1, n))
    b_ub = np.zeros(nb + H + 1)
    for k in range(H + 1):
        for i in range(N_SIDES):
            r = N_SIDES * k + i
            A_ub[r, x_off[0] + 6 * k:x_off[0] + 6 * k + 3] = M[i]
            A_ub[r, x_off[1] + 6 * k:x_off[1] + 6 * k + 3] = -M[i]
            A_ub[r, b_off + r] = mu
            b_ub[r] = q[i] + mu
        A_ub[nb + k, b_off + N_SIDES * k:b_off + N_SIDES * (k + 1)] = -1.0
        b_ub[nb + k] = -1.0
    base = LpProblem(np.zeros(n), A_eq, b_eq, A_ub, b_ub, lo, hi)
    return MilpProblem(base, tuple(range(b_off, n)))


class _AxisOracle:
    """Cached per-axis LPs: minimal total side violation given assigned sides on that axis."""

    def __init__(self, model, refs, tubes, delta, backend):
        self.model, self.delta, self.backend = model, delta, backend
        self.refs, self.tubes = refs, tubes
        self.H = len(refs[0][0])
        self.cache = {}
        self.base = [self._base_rows(a) for a in range(3)]

    def _base_rows(self, a):
        H, dt, model = self.H, self.model.dt, self.model
        idx, gain = model.axis_channel(a)
        G = _position_gain(H, dt, gain)
        rows, rhs, var_hi = [], [], []
        a_lo, a_hi = sorted((gain * model.u_lo[idx], gain * model.u_hi[idx]))
        for j in range(2):
            u_ref, ref = self.refs[j]
            lo, hi = self.tubes[j].lo[:, a], self.tubes[j].hi[:, a]
            p, v = ref.positions[:, a], ref.velocities[:, a]
            up, dn = np.isfinite(hi[1:]), np.isfinite(lo[1:])

            def put(M):
                out = np.zeros((len(M), 4 * H))
                out[:, 2 * j * H:(2 * j + 1) * H] = M
                out[:, (2 * j + 1) * H:(2 * j + 2) * H] = -M
                return out

            rows += [put(G[1:][up]), put(-G[1:][dn])]
            rhs += [hi[1:][up] - p[1:][up], p[1:][dn] - lo[1:][dn]]
            if not _velocity_rows_redundant(lo, hi, dt, a_lo, a_hi, model.v_max[a]):
                V = np.tril(np.full((H, H), gain * dt))
                rows += [put(V), put(-V)]
                rhs += [model.v_max[a] - v[1:], model.v_max[a] + v[1:]]
            var_hi += [np.maximum(model.u_hi[idx] - u_ref[:, idx], 0.0),
                       np.maximum(u_ref[:, idx] - model.u_lo[idx], 0.0)]
        return G, np.vstack(rows), np.concatenate(rhs), np.concatenate(var_hi)

    def solve(self, a, key):
        """``key`` is a sorted tuple of ``(k, sign)``; returns ``(violation, du1, du2)`` or ``None``."""
        ck = (a, key)
        if ck in self.cache:
            return self.cache[ck]
        H = self.H
        G, rows, rhs, var_hi = self.base[a]
        nl = len(key)
        A = np.zeros((len(rows) + nl, 4 * H + nl))
        A[:len(rows), :4 * H] = rows
        b = np.empty(len(rows) + nl)
        b[:len(rows)] = rhs
        p1 = self.refs[0][1].positions[:, a]
        p2 = self.refs[1][1].positions[:, a]
        for r, (k, s) in enumerate(key):
            row = A[len(rows) + r]
            # s*(p1_k - p2_k) <= -delta + lambda
            row[0:H], row[H:2 * H] = s * G[k], -s * G[k]
            row[2 * H:3 * H], row[3 * H:4 * H] = -s * G[k], s * G[k]
            row[4 * H + r] = -1.0
            b[len(rows) + r] = -self.delta - s * (p1[k] - p2[k])
        c = np.concatenate([np.zeros(4 * H), np.ones(nl)])
        hi = np.concatenate([var_hi, np.full(nl, np.inf)])
        sol = solve_lp(LpProblem(c, ineq_lhs=A, ineq_rhs=b, var_lo=np.zeros(len(c)), var_hi=hi),
                       backend=self.backend)
        if sol.status is not Status.OPTIMAL:
            out = None
        else:
            x = sol.x
            out = (sol.objective_value, x[:H] - x[H:2 * H], x[2 * H:3 * H] - x[3 * H:4 * H])
        self.cache[ck] = out
        return out


def _possible_sides(tube1, tube2, k, delta):
    """Sides that some pair of points in the two boxes at ``k`` can satisfy."""
    out = []
    for i in range(N_SIDES):
        a, s = SIDE_AXIS[i], SIDE_SIGN[i]
        reach = tube1.lo[k, a] - tube2.hi[k, a] if s > 0 else tube2.lo[k, a] - tube1.hi[k, a]
        if reach <= -delta + EPS_SEP:
            out.append(i + 1)
    return out


def _margins(z, delta):
    """Greedy margin ``q^i - M^i z`` for every side, shape ``(N, 6)``."""
    M, q = side_matrix(delta)
    return q[None, :] - z @ M.T


def _solve_disjunctive(x1, x2, tube1, tube2, model, delta, time_limit, backend):
    H = x1.horizon
    refs = []
    for xj in (x1, x2):
        u = reference_inputs(model, xj)
        refs.append((u, rollout(model, xj.states[0], u, check_bounds=False)))
    oracle = _AxisOracle(model, refs, (tube1, tube2), delta, backend)
    open_ks = np.flatnonzero(tube_distances(tube1, tube2) < delta - EPS_SEP)
    allowed = {int(k): _possible_sides(tube1, tube2, k, delta) for k in open_ks}
    if any(not s for s in allowed.values()):
        return INFEASIBLE, None, 0
    t0 = time.perf_counter()
    stack = [{}]
    nodes = 0
    while stack:
        if time.perf_counter() - t0 > time_limit:
            return TIMED_OUT, None, nodes
        assign = stack.pop()
        nodes += 1
        inputs = [refs[0][0].copy(), refs[1][0].copy()]
        ok = True
        for a in range(3):
            key = tuple(sorted((k, SIDE_SIGN[s - 1]) for k, s in assign.items() if SIDE_AXIS[s - 1] == a))
            res = oracle.solve(a, key)
            if res is None or res[0] > 1e-9:
                ok = False
                break
            idx, _ = model.axis_channel(a)
            inputs[0][:, idx] += res[1]
            inputs[1][:, idx] += res[2]
        if not ok:
            continue
        t1 = rollout(model, x1.states[0], np.clip(inputs[0], model.u_lo, model.u_hi))
        t2 = rollout(model, x2.states[0], np.clip(inputs[1], model.u_lo, model.u_hi))
        sep = separations(t1, t2)
        free = [k for k in allowed if k not in assign and sep[k] < delta - EPS_SEP]
        if not free:
            return FEASIBLE, (t1, t2, assign), nodes
        k = min(free, key=lambda k: (sep[k], k))
        z = t1.positions[k] - t2.positions[k]
        r = _margins(z[None, :], delta)[0]
        order = sorted(allowed[k], key=lambda s: (-r[s - 1], s))
        for s in reversed(order):
            child = dict(assign)
            child[k] = s
            stack.append(child)
    return INFEASIBLE, None, nodes


def _binaries_for(t1, t2, assign, delta):
    z = t1.positions - t2.positions
    r = _margins(z, delta)
    b = np.zeros((len(z), N_SIDES))
    for k in range(len(z)):
        s = assign.get(k)
        if s is None:
            s = int(np.argmax(r[k])) + 1
        b[k, s - 1] = 1.0
    return b


def recheck(res, x1, x2, tube1, tube2, delta):
    """Independent geometric verification of a Feasible result; raises on failure."""
    if not res.feasible:
        return
    p1, p2 = positions_of(res.traj1_new), positions_of(res.traj2_new)
    if not (np.allclose(p1[0], x1.positions[0]) and np.allclose(p2[0], x2.positions[0])):
        raise RuntimeError("deconflicted plan moved an initial state")
    if not (tube1.contains(p1) and tube2.contains(p2)):
        raise RuntimeError("deconflicted plan leaves its tube")
    if not np.all(separations(p1, p2) >= delta - EPS_SEP):
        raise RuntimeError("deconflicted plan is not delta-separated")
    if not np.all(res.binaries.sum(axis=1) >= 1):
        raise RuntimeError("timestep without an active side")
    M, q = side_matrix(delta)
    lhs = (p1 - p2) @ M.T
    if np.any((res.binaries > 0.5) & (lhs > q + EPS_SEP)):
        raise RuntimeError("active side constraint violated")


def solve_central(x1, x2, tube1, tube2, model, delta, mu=None, time_limit=60.0, method="disjunctive",
                  backend=None):
    """Jointly re-plan two vehicles inside their tubes so they are delta-separated.

    Parameters
    ----------
    method : {"disjunctive", "bigm"}
        Search strategy; both are exact. ``bigm`` is practical only for short horizons.
    mu : float, optional
        Big-M constant (``bigm`` only); defaults to :func:`default_big_m`.

    Returns
    -------
    MilpDeconflictResult
        Feasible results have passed :func:`recheck`.
    """
    if not time_limit > 0:
        raise ValueError("time_limit must be positive")
    H = _check_inputs(x1, x2, tube1, tube2)
    if method == "disjunctive":
        if mu is not None and not mu > 0:
            raise ValueError(f"big-M constant must be positive, got {mu}")
        status, payload, nodes = _solve_disjunctive(x1, x2, tube1, tube2, model, delta, time_limit, backend)
        if status != FEASIBLE:
            return MilpDeconflictResult(status, nodes=nodes)
        t1, t2, assign = payload
        b = _binaries_for(t1, t2, assign, delta)
    elif method == "bigm":
        prob = build_central_milp(x1, x2, tube1, tube2, model, delta, mu)
        sol = solve_milp(prob, time_limit=time_limit, backend=backend)
        nodes = sol.nodes
        if sol.status is Status.TIMED_OUT:
            return MilpDeconflictResult(TIMED_OUT, nodes=nodes)
        if sol.status is not Status.OPTIMAL:
            return MilpDeconflictResult(INFEASIBLE, nodes=nodes)
        nu = 3 * H
        u1 = np.clip(sol.x[:nu].reshape(H, 3), model.u_lo, model.u_hi)
        u2 = np.clip(sol.x[nu:2 * nu].reshape(H, 3), model.u_lo, model.u_hi)
        t1 = rollout(model, x1.states[0], u1)
        t2 = rollout(model, x2.states[0], u2)
        b = np.round(sol.x[prob.binary_vars[0]:].reshape(H + 1, N_SIDES))
    else:
        raise ValueError(f"unknown method {method!r}")
    res = MilpDeconflictResult(FEASIBLE, t1, t2, np.array(t1.inputs), np.array(t2.inputs), b,
                               decisions_from_binaries(b), nodes)
    recheck(res, x1, x2, tube1, tube2, delta)
    return res
