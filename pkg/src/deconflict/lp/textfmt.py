"""Plain-text dump of LP/MILP instances for debugging and regression fixtures.

Layout (one token group per line, floats in ``repr`` form so they round-trip)::

    deconflict-lp 1
    vars <n>
    objective <c_0> ... <c_{n-1}>
    lo <lo_0> ... ; hi <hi_0> ...       (two lines, ``inf``/``-inf`` allowed)
    eq <m_eq>                            followed by m_eq lines ``<a_0> ... <a_{n-1}> <b>``
    ineq <m_ub>                          followed by m_ub lines ``<a_0> ... <a_{n-1}> <b>``
    binary <i_0> <i_1> ...               (optional)
"""
from __future__ import annotations

import numpy as np

from .problem import LpProblem, MilpProblem

MAGIC = "deconflict-lp 1"


def _fmt(v):
    return " ".join(repr(float(a)) for a in v)


def dumps(problem):
    base = problem.base if isinstance(problem, MilpProblem) else problem
    lines = [MAGIC, f"vars {base.n_vars}", "objective " + _fmt(base.objective),
             "lo " + _fmt(base.var_lo), "hi " + _fmt(base.var_hi), f"eq {len(base.eq_rhs)}"]
    lines += [_fmt(np.append(a, b)) for a, b in zip(base.eq_lhs, base.eq_rhs)]
    lines.append(f"ineq {len(base.ineq_rhs)}")
    lines += [_fmt(np.append(a, b)) for a, b in zip(base.ineq_lhs, base.ineq_rhs)]
    if isinstance(problem, MilpProblem):
        lines.append("binary " + " ".join(str(i) for i in problem.binary_vars))
    return "\n".join(lines) + "\n"


def loads(text):
    lines = [ln.strip() for ln in text.splitlines() if ln.strip()]
    if not lines or lines[0] != MAGIC:
        raise ValueError("not a deconflict-lp text dump")
    it = iter(lines[1:])

    def tagged(tag):
        head, _, rest = next(it).partition(" ")
        if head != tag:
            raise ValueError(f"expected '{tag}' line, got '{head}'")
        return rest

    n = int(tagged("vars"))
    vec = lambda s: np.array([float(t) for t in s.split()]) if s else np.zeros(0)
    c = vec(tagged("objective"))
    lo, hi = vec(tagged("lo")), vec(tagged("hi"))

    def block(tag):
        k = int(tagged(tag))
        rows = np.array([vec(next(it)) for _ in range(k)]).reshape(k, n + 1)
        return rows[:, :n], rows[:, n]

    A_eq, b_eq = block("eq")
    A_ub, b_ub = block("ineq")
    p = LpProblem(c, A_eq, b_eq, A_ub, b_ub, lo, hi)
    rest = list(it)
    if rest:
        head, _, tail = rest[0].partition(" ")
        if head != "binary":
            raise ValueError(f"unexpected line '{rest[0]}'")
        return MilpProblem(p, tuple(int(t) for t in tail.split()))
    return p
