"""Slack-minimizing collision-avoidance MPC for one vehicle.

The LP keeps the vehicle inside its tube and pushes it to the commanded side
of the other vehicle at every timestep, paying slack ``lambda_k`` (meters)
wherever that is impossible. Because the dynamics, input box, tube boxes and
side constraints are all axis-separable, the LP is solved as three independent
per-axis LPs over input deviations from the reference; their sum is the joint
optimum.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dynamics import Trajectory, reference_inputs, rollout
from .geometry import EPS_SEP, SIDE_AXIS, SIDE_SIGN, as_decisions, positions_of, separations
from .lp import LpProblem, Status, solve_lp

ZERO_SLACK_TOL = 1e-9


class CampcInfeasibleError(RuntimeError):
    """Tube, dynamics and initial state admit no trajectory at all."""


@dataclass(frozen=True)
class CampcResult:
    traj_new: Trajectory
    inputs_new: np.ndarray
    slacks: np.ndarray
    slack_sum: float
    lp_iterations: int = 0

    @property
    def zero_slack(self):
        return self.slack_sum <= ZERO_SLACK_TOL


def side_slacks(p_new, p_avoid, d, prty, delta):
    """Violation depth ``max(0, prty * M^{d_k} (p_avoid_k - p_new_k) - q)`` per timestep."""
    d = as_decisions(d, len(p_new))
    k = np.arange(len(d))
    axis, sign = SIDE_AXIS[d - 1], SIDE_SIGN[d - 1]
    viol = prty * sign * (p_avoid[k, axis] - p_new[k, axis]) + delta
    return np.maximum(viol, 0.0)


def _position_gain(H, dt, gain):
    """``G[k, i]``: position change at step k per unit input change at step i."""
    k = np.arange(H + 1)[:, None]
    i = np.arange(H)[None, :]
    return np.where(i < k, gain * dt * dt * (k - i - 0.5), 0.0)


def _velocity_rows_redundant(lo, hi, dt, a_min, a_max, v_max):
    # v_k = (p_{k+1} - p_k)/dt - dt/2 a_k, and v_H = v_{H-1} + dt a_{H-1}
    v_hi = (hi[1:] - lo[:-1]) / dt - 0.5 * dt * a_min
    v_lo = (lo[1:] - hi[:-1]) / dt - 0.5 * dt * a_max
    if not (np.all(np.isfinite(v_hi)) and np.all(np.isfinite(v_lo))):
        return False
    last_hi = v_hi[-1] + dt * a_max
    last_lo = v_lo[-1] + dt * a_min
    return bool(np.all(v_hi <= v_max) and np.all(v_lo >= -v_max) and last_hi <= v_max and last_lo >= -v_max)


def _axis_problem(model, axis, u_ref, p_ref, v_ref, lo, hi, avoid, ks, signs, delta):
    """LP over ``(du+, du-, lambda_ks)`` for one axis; returns problem or ``None`` if trivially optimal."""
    H = len(u_ref)
    dt = model.dt
    idx, gain = model.axis_channel(axis)
    G = _position_gain(H, dt, gain)[1:]
    rows, rhs = [], []
    n_lam = len(ks)
    pad = lambda M: np.hstack([M, -M, np.zeros((len(M), n_lam))])
    up = np.isfinite(hi[1:])
    dn = np.isfinite(lo[1:])
    rows += [pad(G[up]), pad(-G[dn])]
    rhs += [hi[1:][up] - p_ref[1:][up], p_ref[1:][dn] - lo[1:][dn]]
    ref_ok = bool(np.all(p_ref[1:] <= hi[1:] + EPS_SEP) and np.all(p_ref[1:] >= lo[1:] - EPS_SEP))

    a_lo, a_hi = sorted((gain * model.u_lo[idx], gain * model.u_hi[idx]))
    vmax = model.v_max[axis]
    if not _velocity_rows_redundant(lo, hi, dt, a_lo, a_hi, vmax):
        V = np.tril(np.full((H, H), gain * dt))
        rows += [pad(V), pad(-V)]
        rhs += [vmax - v_ref[1:], vmax + v_ref[1:]]
        ref_ok = ref_ok and bool(np.all(np.abs(v_ref[1:]) <= vmax + EPS_SEP))

    if n_lam == 0 and ref_ok:
        return None
    if n_lam:
        S = np.zeros((n_lam, 2 * H + n_lam))
        Gk = G[ks - 1] * signs[:, None]
        S[:, :H] = -Gk
        S[:, H:2 * H] = Gk
        S[:, 2 * H:] = -np.eye(n_lam)
        rows.append(S)
        rhs.append(-delta - signs * (avoid[ks] - p_ref[ks]))
    c = np.concatenate([np.zeros(2 * H), np.ones(n_lam)])
    du_hi = model.u_hi[idx] - u_ref[:, idx]
    du_lo = u_ref[:, idx] - model.u_lo[idx]
    var_hi = np.concatenate([np.maximum(du_hi, 0.0), np.maximum(du_lo, 0.0), np.full(n_lam, np.inf)])
    return LpProblem(c, ineq_lhs=np.vstack(rows), ineq_rhs=np.concatenate(rhs), var_lo=np.zeros(len(c)), var_hi=var_hi)


def _margin_problem(prob, best, H, n_lam):
    """Over the optimal face of ``prob`` (total slack at most ``best``), maximize total side margin."""
    n = prob.n_vars
    cap = np.zeros((1, n))
    cap[0, 2 * H:] = 1.0
    # side rows read  -s G du - lambda <= rhs, so the margin grows as their du part shrinks
    c = np.zeros(n)
    c[:2 * H] = prob.ineq_lhs[-n_lam:, :2 * H].sum(axis=0)
    return LpProblem(c, ineq_lhs=np.vstack([prob.ineq_lhs, cap]),
                     ineq_rhs=np.append(prob.ineq_rhs, best * (1.0 + 1e-9) + 1e-12),
                     var_lo=prob.var_lo, var_hi=prob.var_hi)


def solve_campc(xj, x_avoid, tube, d, prty, model, delta, backend=None, widen=True):
    """Re-plan ``xj`` inside ``tube`` so it lies on side ``d_k`` of ``x_avoid`` at every k.

    Parameters
    ----------
    xj, x_avoid : Trajectory
        Own plan and the plan to avoid; equal horizons.
    tube : RobustnessTube
    d : sequence of int
        Side per timestep, values 1..6.
    prty : {-1, +1}
        -1 when ``xj`` plays the first vehicle of the side constraint, +1 when
        it plays the second.
    model : DynamicsModel
    delta : float
    widen : bool
        When the optimal slack is positive the optimum is usually not unique.
        Among the optimal plans, take one with the largest total margin on the
        commanded sides, which leaves the other vehicle the most room.

    Returns
    -------
    CampcResult
        Trajectory is re-simulated from the LP inputs and the slacks are
        recomputed from it, so neither is taken on trust from the solver.

    Raises
    ------
    CampcInfeasibleError
        If no trajectory from ``xj``'s initial state stays inside the tube.
    """
    if prty not in (-1, 1):
        raise ValueError(f"prty must be -1 or +1, got {prty}")
    H = xj.horizon
    if x_avoid.horizon != H or len(tube) != H + 1:
        raise ValueError("trajectory, avoid trajectory and tube horizons differ")
    d = as_decisions(d, H + 1)
    x0 = xj.states[0]
    if not tube.box(0).contains(x0[:3]):
        raise ValueError("initial position lies outside the tube")
    if H == 0:
        inputs = np.zeros((0, 3))
        traj = Trajectory(xj.states[:1], model.dt, inputs)
    else:
        u_ref = reference_inputs(model, xj)
        ref = rollout(model, x0, u_ref, check_bounds=False)
        avoid = positions_of(x_avoid)
        inputs = u_ref.copy()
        iters = 0
        axis_of = SIDE_AXIS[d - 1]
        for a in range(3):
            ks = np.flatnonzero(axis_of == a)
            ks = ks[ks > 0]
            signs = prty * SIDE_SIGN[d[ks] - 1]
            prob = _axis_problem(model, a, u_ref, ref.positions[:, a], ref.velocities[:, a],
                                 tube.lo[:, a], tube.hi[:, a], avoid[:, a], ks, signs, delta)
            if prob is None:
                continue
            sol = solve_lp(prob, backend=backend)
            iters += sol.iterations
            if sol.status is not Status.OPTIMAL:
                raise CampcInfeasibleError(f"axis {a} LP is {sol.status.value}")
            if widen and sol.objective_value > ZERO_SLACK_TOL:
                wide = solve_lp(_margin_problem(prob, sol.objective_value, H, len(ks)), backend=backend)
                iters += wide.iterations
                if wide.status is Status.OPTIMAL:
                    sol = wide
            idx, _ = model.axis_channel(a)
            inputs[:, idx] = u_ref[:, idx] + sol.x[:H] - sol.x[H:2 * H]
        inputs = np.clip(inputs, model.u_lo, model.u_hi)
        traj = rollout(model, x0, inputs)
    slacks = side_slacks(traj.positions, positions_of(x_avoid), d, prty, delta)
    return CampcResult(traj, np.array(traj.inputs), slacks, float(slacks.sum()), iters if H else 0)


def campc_lp(xj, x_avoid, tube, d, prty, model, delta):
    """The joint CA-MPC LP written out over full states, inputs and slacks.

    Variable order is ``(u (H x 3), x (H+1 x 6), lambda (H+1))``. Dynamics are
    equality rows, tube and velocity limits are variable bounds. Intended for
    cross-checking :func:`solve_campc` on small horizons.
    """
    H = xj.horizon
    d = as_decisions(d, H + 1)
    nu, nx = 3 * H, 6 * (H + 1)
    n = nu + nx + H + 1
    xo = lambda k: nu + 6 * k
    lam = lambda k: nu + nx + k
    A_eq = np.zeros((6 * (H + 1), n))
    b_eq = np.zeros(6 * (H + 1))
    A_eq[:6, xo(0):xo(0) + 6] = np.eye(6)
    b_eq[:6] = xj.states[0]
    for k in range(H):
        r = slice(6 * (k + 1), 6 * (k + 2))
        A_eq[r, xo(k + 1):xo(k + 1) + 6] = np.eye(6)
        A_eq[r, xo(k):xo(k) + 6] = -model.A
        A_eq[r, 3 * k:3 * k + 3] = -model.B
    avoid = positions_of(x_avoid)
    A_ub = np.zeros((H + 1, n))
    b_ub = np.zeros(H + 1)
    for k in range(H + 1):
        a, s = SIDE_AXIS[d[k] - 1], SIDE_SIGN[d[k] - 1]
        # prty*s*(avoid - p) <= -delta + lambda
        A_ub[k, xo(k) + a] = -prty * s
        A_ub[k, lam(k)] = -1.0
        b_ub[k] = -delta - prty * s * avoid[k, a]
    lo = np.full(n, -np.inf)
    hi = np.full(n, np.inf)
    lo[:nu] = np.tile(model.u_lo, H)
    hi[:nu] = np.tile(model.u_hi, H)
    for k in range(H + 1):
        lo[xo(k):xo(k) + 3] = tube.lo[k]
        hi[xo(k):xo(k) + 3] = tube.hi[k]
        lo[xo(k) + 3:xo(k) + 6] = -model.v_max
        hi[xo(k) + 3:xo(k) + 6] = model.v_max
    lo[nu + nx:] = 0.0
    c = np.zeros(n)
    c[nu + nx:] = 1.0
    return LpProblem(c, A_eq, b_eq, A_ub, b_ub, lo, hi)


def verify_separation(t1, t2, delta):
    """True iff the inf-norm distance is at least ``delta - EPS_SEP`` at every timestep."""
    return bool(np.all(separations(t1, t2) >= delta - EPS_SEP))
