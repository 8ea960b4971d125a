import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from deconflict.lp import FEAS_TOL, INT_TOL, LpProblem, MilpProblem, Status, solve_lp, solve_milp
from deconflict.lp.milp import most_fractional
from deconflict.lp.textfmt import dumps, loads

BACKENDS = ["numba", "numpy"]


def vertex_enumeration(c, A, b, A_eq, b_eq, hi):
    """Minimum of ``c.x`` over ``A x <= b, A_eq x = b_eq, 0 <= x <= hi`` by trying every basis."""
    n = len(c)
    G = np.vstack([A, -np.eye(n), np.eye(n)])
    h = np.concatenate([b, np.zeros(n), hi])
    m_eq = len(b_eq)
    best = np.inf
    for rows in itertools.combinations(range(len(G)), n - m_eq):
        M = np.vstack([A_eq, G[list(rows)]])
        if abs(np.linalg.det(M)) < 1e-10:
            continue
        x = np.linalg.solve(M, np.concatenate([b_eq, h[list(rows)]]))
        if np.all(G @ x <= h + 1e-9):
            best = min(best, float(c @ x))
    return best


def random_lp(rng, n=5, m=8, m_eq=0):
    A = rng.normal(size=(m, n))
    x0 = rng.uniform(0, 1, n)
    b = A @ x0 + rng.uniform(-0.2, 1, m)  # some instances infeasible
    A_eq = rng.normal(size=(m_eq, n))
    b_eq = A_eq @ x0
    hi = np.full(n, 2.0)
    return rng.normal(size=n), A, b, A_eq, b_eq, hi


def test_min_x_ge_1():
    sol = solve_lp(LpProblem([1.0], ineq_lhs=[[-1.0]], ineq_rhs=[-1.0], var_lo=[-np.inf]))
    assert sol.status is Status.OPTIMAL
    assert sol.x[0] == pytest.approx(1.0) and sol.objective_value == pytest.approx(1.0)


def test_infeasible_pair():
    p = LpProblem([0.0], ineq_lhs=[[1.0], [-1.0]], ineq_rhs=[0.0, -1.0], var_lo=[-np.inf])
    sol = solve_lp(p)
    assert sol.status is Status.INFEASIBLE and sol.x is None


def test_unbounded():
    sol = solve_lp(LpProblem([-1.0, 0.0], ineq_lhs=[[0.0, 1.0]], ineq_rhs=[1.0]))
    assert sol.status is Status.UNBOUNDED


def test_textbook_lp():
    # max 3x + 5y, x <= 4, 2y <= 12, 3x + 2y <= 18 -> (2, 6), value 36
    p = LpProblem([-3.0, -5.0], ineq_lhs=[[1, 0], [0, 2], [3, 2]], ineq_rhs=[4, 12, 18])
    sol = solve_lp(p)
    np.testing.assert_allclose(sol.x, [2, 6], atol=1e-12)
    assert sol.objective_value == pytest.approx(-36)


@pytest.mark.parametrize("rule", ["dantzig", "bland"])
@pytest.mark.parametrize("backend", BACKENDS)
def test_beale_cycling_example_terminates(rule, backend):
    c = [-0.75, 20.0, -0.5, 6.0]
    A = [[0.25, -8, -1, 9], [0.5, -12, -0.5, 3], [0, 0, 1, 0]]
    sol = solve_lp(LpProblem(c, ineq_lhs=A, ineq_rhs=[0, 0, 1]), rule=rule, backend=backend)
    assert sol.status is Status.OPTIMAL
    assert sol.objective_value == pytest.approx(-1.25)


def test_equality_and_free_variables():
    # min x + y, x - y = 1, x, y free, x + y >= -3 -> objective -3
    p = LpProblem([1.0, 1.0], eq_lhs=[[1, -1]], eq_rhs=[1], ineq_lhs=[[-1, -1]], ineq_rhs=[3],
                  var_lo=-np.inf)
    sol = solve_lp(p)
    assert sol.objective_value == pytest.approx(-3)
    assert sol.x[0] - sol.x[1] == pytest.approx(1)


def test_fixed_and_upper_bounded_variables():
    p = LpProblem([-1.0, -1.0], ineq_lhs=[[1, 1]], ineq_rhs=[10], var_lo=[2, 0], var_hi=[2, 3])
    sol = solve_lp(p)
    np.testing.assert_allclose(sol.x, [2, 3])


@pytest.mark.parametrize("backend", BACKENDS)
@pytest.mark.parametrize("m_eq", [0, 2])
def test_random_lps_match_vertex_enumeration(backend, m_eq):
    rng = np.random.default_rng(7 + m_eq)
    n_opt = 0
    for _ in range(40):
        c, A, b, A_eq, b_eq, hi = random_lp(rng, m_eq=m_eq)
        ref = vertex_enumeration(c, A, b, A_eq, b_eq, hi)
        sol = solve_lp(LpProblem(c, A_eq, b_eq, A, b, 0.0, hi), backend=backend)
        if np.isinf(ref):
            assert sol.status is Status.INFEASIBLE
            continue
        n_opt += 1
        assert sol.status is Status.OPTIMAL
        assert sol.objective_value == pytest.approx(ref, abs=1e-6)
        assert sol.max_residual <= FEAS_TOL
    assert n_opt >= 20


@settings(max_examples=60)
@given(st.integers(0, 2**32 - 1))
def test_rules_and_backends_agree(seed):
    rng = np.random.default_rng(seed)
    c, A, b, A_eq, b_eq, hi = random_lp(rng, n=8, m=10, m_eq=1)
    p = LpProblem(c, A_eq, b_eq, A, b, 0.0, hi)
    sols = [solve_lp(p, rule=r, backend=be) for r in ("dantzig", "bland") for be in BACKENDS]
    assert len({s.status for s in sols}) == 1
    if sols[0].optimal:
        for s in sols:
            assert s.objective_value == pytest.approx(sols[0].objective_value, abs=1e-7)
            assert p.residual(s.x) <= FEAS_TOL


def test_malformed_problems_rejected():
    with pytest.raises(ValueError):
        LpProblem([1.0, 2.0], ineq_lhs=[[1.0]], ineq_rhs=[1.0])
    with pytest.raises(ValueError):
        LpProblem([1.0], ineq_lhs=[[1.0]], ineq_rhs=[1.0, 2.0])
    with pytest.raises(ValueError):
        LpProblem([np.nan])
    with pytest.raises(ValueError):
        LpProblem([1.0], var_lo=[2.0], var_hi=[1.0])
    with pytest.raises(ValueError):
        solve_lp(LpProblem([1.0]), backend="fortran")


def test_problem_arrays_read_only():
    p = LpProblem([1.0, 2.0])
    with pytest.raises(ValueError):
        p.objective[0] = 3.0


# ---------------------------------------------------------------- MILP

def milp_enumeration(p, binaries):
    best = np.inf
    for bits in itertools.product((0.0, 1.0), repeat=len(binaries)):
        lo, hi = np.array(p.var_lo), np.array(p.var_hi)
        lo[list(binaries)] = hi[list(binaries)] = bits
        sol = solve_lp(p.with_bounds(lo, hi))
        if sol.optimal:
            best = min(best, sol.objective_value)
    return best


def test_milp_pure_lp_matches_lp():
    p = LpProblem([-3.0, -5.0], ineq_lhs=[[1, 0], [0, 2], [3, 2]], ineq_rhs=[4, 12, 18])
    a, b = solve_lp(p), solve_milp(MilpProblem(p, ()))
    assert b.status is Status.OPTIMAL
    np.testing.assert_allclose(a.x, b.x)


def test_milp_fractional_relaxation():
    p = LpProblem([-1.0], ineq_lhs=[[1.0]], ineq_rhs=[0.5], var_hi=[1.0])
    sol = solve_milp(MilpProblem(p, (0,)))
    assert sol.status is Status.OPTIMAL and sol.x[0] == 0.0


def test_milp_knapsack():
    # values 10, 13, 7, 8; weights 4, 6, 3, 5; capacity 10 -> items 0, 1 (value 23)
    p = LpProblem([-10.0, -13.0, -7.0, -8.0], ineq_lhs=[[4, 6, 3, 5]], ineq_rhs=[10], var_hi=1.0)
    sol = solve_milp(MilpProblem(p, range(4)))
    np.testing.assert_array_equal(sol.x, [1, 1, 0, 0])
    assert sol.objective_value == pytest.approx(-23)


def test_milp_infeasible():
    p = LpProblem([0.0, 0.0], ineq_lhs=[[1, 1], [-1, -1]], ineq_rhs=[1.5, -1.2], var_hi=1.0)
    assert solve_milp(MilpProblem(p, (0, 1))).status is Status.INFEASIBLE


@pytest.mark.parametrize("n_bin", [4, 8, 10])
def test_random_milps_match_enumeration(n_bin):
    rng = np.random.default_rng(n_bin)
    for _ in range(6 if n_bin < 10 else 2):
        n = n_bin + 2
        A = rng.normal(size=(6, n))
        b = A @ rng.uniform(0, 1, n) + rng.uniform(0, 0.5, 6)
        p = LpProblem(rng.normal(size=n), ineq_lhs=A, ineq_rhs=b, var_hi=np.full(n, 1.5))
        bins = tuple(range(n_bin))
        ref = milp_enumeration(p, bins)
        sol = solve_milp(MilpProblem(p, bins))
        if np.isinf(ref):
            assert sol.status is Status.INFEASIBLE
            continue
        assert sol.status is Status.OPTIMAL
        assert sol.objective_value == pytest.approx(ref, abs=1e-6)
        assert np.all(np.abs(sol.x[list(bins)] - np.round(sol.x[list(bins)])) <= INT_TOL)
        h = sol.incumbent_history
        assert all(a >= b for a, b in zip(h, h[1:]))


def test_milp_time_limit():
    p = LpProblem([-1.0], ineq_lhs=[[1.0]], ineq_rhs=[0.5], var_hi=[1.0])
    for bad in (0.0, -1.0):
        with pytest.raises(ValueError):
            solve_milp(MilpProblem(p, (0,)), time_limit=bad)
    rng = np.random.default_rng(0)
    n = 14
    A = rng.uniform(1, 3, size=(3, n))
    p = LpProblem(-rng.uniform(1, 2, n), ineq_lhs=A, ineq_rhs=A.sum(axis=1) / 2.3, var_hi=1.0)
    sol = solve_milp(MilpProblem(p, range(n)), node_limit=3)
    assert sol.status is Status.TIMED_OUT


def test_milp_rejects_bad_binary_index():
    with pytest.raises(ValueError):
        MilpProblem(LpProblem([1.0]), (1,))


def test_most_fractional_tie_lowest_index():
    x = np.array([0.5, 0.2, 0.5, 1.0])
    assert most_fractional(x, (0, 1, 2, 3)) == 0
    assert most_fractional(np.array([0.0, 1.0]), (0, 1)) is None


def test_text_format_round_trip():
    p = LpProblem([1.0, -2.5], [[1, 1]], [1.0], [[0.1, 1e-17]], [3.0], [-np.inf, 0], [np.inf, 1])
    q = loads(dumps(p))
    for name in ("objective", "eq_lhs", "eq_rhs", "ineq_lhs", "ineq_rhs", "var_lo", "var_hi"):
        np.testing.assert_array_equal(getattr(p, name), getattr(q, name))
    mp = MilpProblem(p, (1,))
    mq = loads(dumps(mp))
    assert mq.binary_vars == (1,)
    assert dumps(mq) == dumps(mp)
    with pytest.raises(ValueError):
        loads("not a problem\n")
