"""Bounded-variable primal simplex iterations on a dense tableau.

Both kernels mutate their arguments in place and make identical pivoting
decisions; one is written with explicit loops for numba, the other with numpy
vector operations.

Variable states: 0 basic, 1 at lower bound, 2 at upper bound, 3 free (held at
zero), 4 fixed. Return codes: 0 optimal, 1 unbounded, 2 iteration limit.
"""
import numpy as np

from .._accel import njit

BASIC, AT_LO, AT_HI, FREE, FIXED = 0, 1, 2, 3, 4
OPTIMAL, UNBOUNDED, ITER_LIMIT = 0, 1, 2

TOL_D = 1e-9
TOL_PIV = 1e-9
TIE = 1e-12
DEGEN = 1e-12


def _iterate_loops(T, beta, basis, state, x, lo, hi, d, max_iter, bland_after, bland_always):
    m, n = T.shape
    bland = bland_always
    degen = 0
    inf = np.inf
    for it in range(max_iter):
        e = -1
        best = 0.0
        for j in range(n):
            s = state[j]
            if s == BASIC or s == FIXED:
                continue
            dj = d[j]
            if (dj < -TOL_D and (s == AT_LO or s == FREE)) or (dj > TOL_D and (s == AT_HI or s == FREE)):
                if bland:
                    e = j
                    break
                a = abs(dj)
                if a > best:
                    best = a
                    e = j
        if e < 0:
            return OPTIMAL, it
        sigma = 1.0 if d[e] < 0.0 else -1.0
        tmax = hi[e] - lo[e]
        # pass 1: smallest ratio
        tmin = inf
        for i in range(m):
            alpha = sigma * T[i, e]
            if alpha > TOL_PIV:
                lb = lo[basis[i]]
                if lb == -inf:
                    continue
                ratio = (beta[i] - lb) / alpha
            elif alpha < -TOL_PIV:
                ub = hi[basis[i]]
                if ub == inf:
                    continue
                ratio = (ub - beta[i]) / (-alpha)
            else:
                continue
            if ratio < 0.0:
                ratio = 0.0
            if ratio < tmin:
                tmin = ratio
        if tmax <= tmin:
            if tmax == inf:
                return UNBOUNDED, it
            t = tmax
            r = -1
        else:
            t = tmin
            # pass 2: choose among near-ties
            r = -1
            best_a = 0.0
            best_b = 0
            for i in range(m):
                alpha = sigma * T[i, e]
                if alpha > TOL_PIV:
                    lb = lo[basis[i]]
                    if lb == -inf:
                        continue
                    ratio = (beta[i] - lb) / alpha
                elif alpha < -TOL_PIV:
                    ub = hi[basis[i]]
                    if ub == inf:
                        continue
                    ratio = (ub - beta[i]) / (-alpha)
                else:
                    continue
                if ratio < 0.0:
                    ratio = 0.0
                if ratio > tmin + TIE:
                    continue
                if r < 0:
                    r = i
                    best_a = abs(alpha)
                    best_b = basis[i]
                elif bland:
                    if basis[i] < best_b:
                        r = i
                        best_b = basis[i]
                elif abs(alpha) > best_a:
                    r = i
                    best_a = abs(alpha)
        step = sigma * t
        for i in range(m):
            beta[i] -= step * T[i, e]
        if r < 0:
            if sigma > 0.0:
                x[e] = hi[e]
                state[e] = AT_HI
            else:
                x[e] = lo[e]
                state[e] = AT_LO
            degen = 0
            bland = bland_always
            continue
        enter_val = x[e] + step
        leave = basis[r]
        if lo[leave] == hi[leave]:
            state[leave] = FIXED
            x[leave] = lo[leave]
        elif sigma * T[r, e] > 0.0:
            state[leave] = AT_LO
            x[leave] = lo[leave]
        else:
            state[leave] = AT_HI
            x[leave] = hi[leave]
        piv = T[r, e]
        for j in range(n):
            T[r, j] /= piv
        for i in range(m):
            if i != r:
                f = T[i, e]
                if f != 0.0:
                    for j in range(n):
                        T[i, j] -= f * T[r, j]
        f = d[e]
        for j in range(n):
            d[j] -= f * T[r, j]
        beta[r] = enter_val
        basis[r] = e
        state[e] = BASIC
        if t <= DEGEN:
            degen += 1
            if degen > bland_after:
                bland = True
        else:
            degen = 0
            bland = bland_always
    return ITER_LIMIT, max_iter


iterate_numba = njit(_iterate_loops)


def _ratios(T_e, sigma, beta, lo_b, hi_b):
    alpha = sigma * T_e
    ratio = np.full(len(alpha), np.inf)
    pos = (alpha > TOL_PIV) & np.isfinite(lo_b)
    neg = (alpha < -TOL_PIV) & np.isfinite(hi_b)
    ratio[pos] = (beta[pos] - lo_b[pos]) / alpha[pos]
    ratio[neg] = (hi_b[neg] - beta[neg]) / (-alpha[neg])
    np.maximum(ratio, 0.0, out=ratio)
    return alpha, ratio, pos | neg


def iterate_numpy(T, beta, basis, state, x, lo, hi, d, max_iter, bland_after, bland_always):
    bland = bland_always
    degen = 0
    for it in range(max_iter):
        up = (d < -TOL_D) & ((state == AT_LO) | (state == FREE))
        down = (d > TOL_D) & ((state == AT_HI) | (state == FREE))
        cand = np.flatnonzero(up | down)
        if len(cand) == 0:
            return OPTIMAL, it
        e = int(cand[0]) if bland else int(cand[np.argmax(np.abs(d[cand]))])
        sigma = 1.0 if d[e] < 0.0 else -1.0
        tmax = hi[e] - lo[e]
        alpha, ratio, valid = _ratios(T[:, e], sigma, beta, lo[basis], hi[basis])
        tmin = ratio[valid].min() if valid.any() else np.inf
        if tmax <= tmin:
            if tmax == np.inf:
                return UNBOUNDED, it
            t, r = tmax, -1
        else:
            t = tmin
            ties = np.flatnonzero(valid & (ratio <= tmin + TIE))
            if bland:
                r = int(ties[np.argmin(basis[ties])])
            else:
                r = int(ties[np.argmax(np.abs(alpha[ties]))])
        step = sigma * t
        beta -= step * T[:, e]
        if r < 0:
            x[e] = hi[e] if sigma > 0 else lo[e]
            state[e] = AT_HI if sigma > 0 else AT_LO
            degen = 0
            bland = bland_always
            continue
        enter_val = x[e] + step
        leave = basis[r]
        if lo[leave] == hi[leave]:
            state[leave], x[leave] = FIXED, lo[leave]
        elif sigma * T[r, e] > 0.0:
            state[leave], x[leave] = AT_LO, lo[leave]
        else:
            state[leave], x[leave] = AT_HI, hi[leave]
        T[r] /= T[r, e]
        col = T[:, e].copy()
        col[r] = 0.0
        T -= np.outer(col, T[r])
        d -= d[e] * T[r]
        beta[r] = enter_val
        basis[r] = e
        state[e] = BASIC
        if t <= DEGEN:
            degen += 1
            if degen > bland_after:
                bland = True
        else:
            degen = 0
            bland = bland_always
    return ITER_LIMIT, max_iter
