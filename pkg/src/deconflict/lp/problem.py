from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

FEAS_TOL = 1e-7
OPT_TOL = 1e-7
INT_TOL = 1e-6


class Status(enum.Enum):
    OPTIMAL = "Optimal"
    INFEASIBLE = "Infeasible"
    UNBOUNDED = "Unbounded"
    TIMED_OUT = "TimedOut"


def _matrix(a, n, name):
    if a is None:
        return np.zeros((0, n))
    a = np.atleast_2d(np.asarray(a, dtype=float))
    if a.size == 0:
        return np.zeros((0, n))
    if a.shape[1] != n:
        raise ValueError(f"{name} has {a.shape[1]} columns, expected {n}")
    if not np.all(np.isfinite(a)):
        raise ValueError(f"{name} has non-finite entries")
    return a


def _vector(b, m, name):
    if b is None:
        b = np.zeros(0)
    b = np.asarray(b, dtype=float).reshape(-1)
    if len(b) != m:
        raise ValueError(f"{name} has length {len(b)}, expected {m}")
    if not np.all(np.isfinite(b)):
        raise ValueError(f"{name} has non-finite entries")
    return b


@dataclass(frozen=True)
class LpProblem:
    """``min c.x  s.t.  A_eq x = b_eq,  A_ub x <= b_ub,  lo <= x <= hi``.

    Bounds default to ``0 <= x < inf``; pass ``-np.inf`` for free variables.
    """

    objective: np.ndarray
    eq_lhs: np.ndarray | None = None
    eq_rhs: np.ndarray | None = None
    ineq_lhs: np.ndarray | None = None
    ineq_rhs: np.ndarray | None = None
    var_lo: np.ndarray | None = None
    var_hi: np.ndarray | None = None

    def __post_init__(self):
        c = np.asarray(self.objective, dtype=float).reshape(-1)
        if not np.all(np.isfinite(c)):
            raise ValueError("objective has non-finite entries")
        n = len(c)
        A_eq = _matrix(self.eq_lhs, n, "eq_lhs")
        b_eq = _vector(self.eq_rhs, len(A_eq), "eq_rhs")
        A_ub = _matrix(self.ineq_lhs, n, "ineq_lhs")
        b_ub = _vector(self.ineq_rhs, len(A_ub), "ineq_rhs")
        lo = np.zeros(n) if self.var_lo is None else np.broadcast_to(np.asarray(self.var_lo, float), (n,)).copy()
        hi = np.full(n, np.inf) if self.var_hi is None else np.broadcast_to(np.asarray(self.var_hi, float), (n,)).copy()
        if np.any(np.isnan(lo)) or np.any(np.isnan(hi)):
            raise ValueError("NaN variable bound")
        if np.any(lo == np.inf) or np.any(hi == -np.inf) or np.any(lo > hi):
            raise ValueError("inconsistent variable bounds")
        for name, val in (("objective", c), ("eq_lhs", A_eq), ("eq_rhs", b_eq), ("ineq_lhs", A_ub),
                          ("ineq_rhs", b_ub), ("var_lo", lo), ("var_hi", hi)):
            val.setflags(write=False)
            object.__setattr__(self, name, val)

    @property
    def n_vars(self):
        return len(self.objective)

    def with_bounds(self, lo, hi):
        return LpProblem(self.objective, self.eq_lhs, self.eq_rhs, self.ineq_lhs, self.ineq_rhs, lo, hi)

    def residual(self, x):
        """Largest constraint violation of ``x`` (equalities, inequalities and bounds)."""
        x = np.asarray(x, dtype=float)
        parts = [0.0]
        if len(self.eq_rhs):
            parts.append(np.max(np.abs(self.eq_lhs @ x - self.eq_rhs)))
        if len(self.ineq_rhs):
            parts.append(np.max(self.ineq_lhs @ x - self.ineq_rhs))
        parts.append(np.max(self.var_lo - x, initial=0.0))
        parts.append(np.max(x - self.var_hi, initial=0.0))
        return float(max(parts))


@dataclass(frozen=True)
class MilpProblem:
    base: LpProblem
    binary_vars: tuple

    def __post_init__(self):
        idx = tuple(sorted({int(i) for i in self.binary_vars}))
        if idx and (idx[0] < 0 or idx[-1] >= self.base.n_vars):
            raise ValueError("binary variable index out of range")
        object.__setattr__(self, "binary_vars", idx)


@dataclass
class LpSolution:
    status: Status
    x: np.ndarray | None = None
    objective_value: float = float("nan")
    iterations: int = 0
    max_residual: float = float("nan")
    nodes: int = 0
    incumbent_history: list = field(default_factory=list)

    @property
    def optimal(self):
        return self.status is Status.OPTIMAL
