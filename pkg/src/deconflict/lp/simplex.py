"""Two-phase bounded-variable primal simplex."""
from __future__ import annotations

import numpy as np

from .._accel import HAVE_NUMBA, numba_enabled
from . import _kernels as K
from .problem import FEAS_TOL, LpProblem, LpSolution, Status

# consecutive degenerate pivots before switching from Dantzig to Bland pricing
BLAND_AFTER = 50


def _pick_kernel(backend):
    if backend is None:
        backend = "numba" if numba_enabled() else "numpy"
    if backend == "numba":
        if not HAVE_NUMBA:
            raise RuntimeError("numba backend requested but numba is not installed")
        return K.iterate_numba
    if backend == "numpy":
        return K.iterate_numpy
    raise ValueError(f"unknown backend {backend!r}")


def _standard_form(p):
    """Append one slack per inequality: ``A x = b`` with ``lo <= x <= hi``."""
    n0 = p.n_vars
    me, mu = len(p.eq_rhs), len(p.ineq_rhs)
    A = np.zeros((me + mu, n0 + mu))
    A[:me, :n0] = p.eq_lhs
    A[me:, :n0] = p.ineq_lhs
    A[me:, n0:] = np.eye(mu)
    b = np.concatenate([p.eq_rhs, p.ineq_rhs])
    lo = np.concatenate([p.var_lo, np.zeros(mu)])
    hi = np.concatenate([p.var_hi, np.full(mu, np.inf)])
    return A, b, lo, hi, me


def _nonbasic_start(lo, hi):
    x = np.where(np.isfinite(lo), lo, np.where(np.isfinite(hi), hi, 0.0))
    state = np.where(lo == hi, K.FIXED,
                     np.where(np.isfinite(lo), K.AT_LO, np.where(np.isfinite(hi), K.AT_HI, K.FREE)))
    return x, state.astype(np.int64)


def _refine(A, b, basis, x):
    """Recompute basic values from the nonbasic ones with a direct solve."""
    nb = np.ones(A.shape[1], dtype=bool)
    nb[basis] = False
    rhs = b - A[:, nb] @ x[nb]
    try:
        xb = np.linalg.solve(A[:, basis], rhs)
    except np.linalg.LinAlgError:
        return x
    out = x.copy()
    out[basis] = xb
    if np.max(np.abs(A @ out - b), initial=0.0) <= np.max(np.abs(A @ x - b), initial=0.0):
        return out
    return x


def solve_lp(problem: LpProblem, rule="dantzig", max_iter=None, backend=None) -> LpSolution:
    """Solve an :class:`LpProblem` to optimality.

    Parameters
    ----------
    problem : LpProblem
    rule : {"dantzig", "bland"}
        Entering-variable pricing. Dantzig falls back to Bland after a run of
        degenerate pivots, which rules out cycling.
    max_iter : int, optional
        Per-phase pivot limit; defaults to ``20 * (rows + cols) + 1000``.
    backend : {"numba", "numpy"}, optional
        Kernel implementation. Defaults to numba unless
        ``DECONFLICT_DISABLE_NUMBA`` is set.

    Returns
    -------
    LpSolution
        ``x`` and ``objective_value`` are set only when the status is Optimal.
    """
    if rule not in ("dantzig", "bland"):
        raise ValueError(f"unknown pricing rule {rule!r}")
    kernel = _pick_kernel(backend)
    bland_always = rule == "bland"
    n0 = problem.n_vars
    A, b, lo, hi, me = _standard_form(problem)
    m, n = A.shape
    if max_iter is None:
        max_iter = 20 * (m + n) + 1000

    x, state = _nonbasic_start(lo, hi)
    r = b - A @ x
    # slacks start basic where the inequality residual is non-negative
    use_slack = np.zeros(m, dtype=bool)
    use_slack[me:] = r[me:] >= 0.0
    art_rows = np.flatnonzero(~use_slack)
    na = len(art_rows)
    sign = np.ones(m)
    sign[art_rows] = np.where(r[art_rows] >= 0.0, 1.0, -1.0)

    T = np.zeros((m, n + na))
    T[:, :n] = A * sign[:, None]
    T[art_rows, n + np.arange(na)] = 1.0
    beta = sign * r
    basis = np.empty(m, dtype=np.int64)
    basis[use_slack] = n0 + np.flatnonzero(use_slack) - me
    basis[art_rows] = n + np.arange(na)
    lo_f = np.concatenate([lo, np.zeros(na)])
    hi_f = np.concatenate([hi, np.full(na, np.inf)])
    x_f = np.concatenate([x, np.zeros(na)])
    state_f = np.concatenate([state, np.full(na, K.BASIC, dtype=np.int64)])
    state_f[basis] = K.BASIC
    x_f[basis] = 0.0

    iters = 0
    scale = max(1.0, float(np.max(np.abs(b), initial=0.0)))
    if na:
        c1 = np.zeros(n + na)
        c1[n:] = 1.0
        d = c1 - c1[basis] @ T
        code, it = kernel(T, beta, basis, state_f, x_f, lo_f, hi_f, d, max_iter, BLAND_AFTER, bland_always)
        iters += it
        if code == K.ITER_LIMIT:
            raise RuntimeError("simplex iteration limit reached in phase 1")
        infeas = float(np.sum(beta[basis >= n])) + float(np.sum(x_f[n:]))
        if infeas > FEAS_TOL * scale:
            return LpSolution(Status.INFEASIBLE, iterations=iters)
        # artificials may stay basic at zero but can never move again
        hi_f[n:] = 0.0
        nonbasic_art = (state_f[n:] != K.BASIC)
        state_f[n:][nonbasic_art] = K.FIXED
        x_f[n:] = 0.0
        beta[basis >= n] = 0.0

    c2 = np.zeros(n + na)
    c2[:n0] = problem.objective
    d = c2 - c2[basis] @ T
    code, it = kernel(T, beta, basis, state_f, x_f, lo_f, hi_f, d, max_iter, BLAND_AFTER, bland_always)
    iters += it
    if code == K.UNBOUNDED:
        return LpSolution(Status.UNBOUNDED, iterations=iters)
    if code == K.ITER_LIMIT:
        raise RuntimeError("simplex iteration limit reached in phase 2")

    x_f[basis] = beta
    A_f = np.zeros((m, n + na))
    A_f[:, :n] = A
    A_f[art_rows, n + np.arange(na)] = sign[art_rows]
    x_f = _refine(A_f, b, basis, x_f)
    x_f = np.clip(x_f, lo_f, hi_f)
    xs = x_f[:n0].copy()
    res = problem.residual(xs)
    return LpSolution(Status.OPTIMAL, xs, float(problem.objective @ xs), iters, res)
