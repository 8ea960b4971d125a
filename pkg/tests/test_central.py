from dataclasses import replace

import numpy as np
import pytest

from conftest import DELTA, colliding_pair
from deconflict.central import (build_central_milp, decisions_from_binaries, default_big_m, recheck,
                                solve_central)
from deconflict.dynamics import Trajectory, rollout
from deconflict.geometry import RobustnessTube, side_matrix, tube_from_trajectory
from deconflict.lnf import run_stages


def window(x, a, b):
    return Trajectory(x.states[a:b + 1], x.dt, x.inputs[a:b])


def short_instance(seed, model, ratio, a=16, b=24):
    x1, x2, _, _ = colliding_pair(seed, model)
    w1, w2 = window(x1, a, b), window(x2, a, b)
    return w1, w2, tube_from_trajectory(w1, ratio * DELTA), tube_from_trajectory(w2, ratio * DELTA)


def test_decisions_from_binaries_examples():
    b = np.zeros((3, 6))
    b[0, 4] = 1
    b[1, [0, 4]] = 1
    b[2, 5] = 1
    np.testing.assert_array_equal(decisions_from_binaries(b), [5, 1, 6])
    b[2] = 0
    with pytest.raises(ValueError):
        decisions_from_binaries(b)
    with pytest.raises(ValueError):
        decisions_from_binaries(np.ones((3, 5)))


@pytest.mark.parametrize("seed", range(6))
def test_methods_agree_on_short_horizons(model, seed):
    for ratio in (0.3, 0.5):
        inst = short_instance(seed, model, ratio)
        a = solve_central(*inst, model, DELTA)
        b = solve_central(*inst, model, DELTA, method="bigm")
        assert a.status == b.status
        assert a.status == ("Feasible" if ratio == 0.5 else "Infeasible")


def test_bigm_solution_is_valid(model):
    inst = short_instance(0, model, 0.5)
    res = solve_central(*inst, model, DELTA, method="bigm")
    recheck(res, *inst, DELTA)
    assert len(res.decisions) == inst[0].horizon + 1


def test_big_m_shape_and_value(model):
    x1, x2, t1, t2 = short_instance(1, model, 0.5)
    prob = build_central_milp(x1, x2, t1, t2, model, DELTA)
    H = x1.horizon
    assert prob.base.n_vars == 2 * 3 * H + 2 * 6 * (H + 1) + 6 * (H + 1)
    assert len(prob.binary_vars) == 6 * (H + 1)
    mu = default_big_m(t1, t2, DELTA)
    # larger than any side expression over the tubes
    span = max(t1.hi.max(), t2.hi.max()) - min(t1.lo.min(), t2.lo.min())
    assert mu >= span + DELTA
    for bad in (0.0, -1.0):
        with pytest.raises(ValueError):
            build_central_milp(x1, x2, t1, t2, model, DELTA, mu=bad)
        with pytest.raises(ValueError):
            solve_central(x1, x2, t1, t2, model, DELTA, mu=bad)


def test_feasible_decisions_hold(model):
    x1, x2, t1, t2 = colliding_pair(5, model)
    res = solve_central(x1, x2, t1, t2, model, DELTA)
    assert res.feasible
    M, q = side_matrix(DELTA)
    z = res.traj1_new.positions - res.traj2_new.positions
    assert np.all(np.einsum("kj,kj->k", M[res.decisions - 1], z) <= q[res.decisions - 1] + 1e-9)
    assert t1.contains(res.traj1_new.positions) and t2.contains(res.traj2_new.positions)
    np.testing.assert_allclose(res.traj1_new.states[0], x1.states[0])
    assert len(z) == x1.horizon + 1


def test_already_separated_pair(model):
    H = 20
    x1 = rollout(model, np.array([0.2, 0, 0, 0, 0, 0.0]), np.zeros((H, 3)))
    x2 = rollout(model, np.zeros(6), np.zeros((H, 3)))
    t1, t2 = tube_from_trajectory(x1, 0.03), tube_from_trajectory(x2, 0.03)
    res = solve_central(x1, x2, t1, t2, model, DELTA)
    assert res.feasible
    # z_x = 0.2 > delta: only side 2 (-z_x <= -delta) holds
    np.testing.assert_array_equal(res.decisions, np.full(H + 1, 2))


def test_unreachable_tube_is_infeasible(model):
    H = 6
    x1 = rollout(model, np.zeros(6), np.zeros((H, 3)))
    x2 = rollout(model, np.array([0.5, 0, 0, 0, 0, 0.0]), np.zeros((H, 3)))
    t1 = tube_from_trajectory(x1, 0.05)
    lo, hi = t1.lo.copy(), t1.hi.copy()
    lo[2:, 0] += 3.0  # tube jumps 3 m after one step
    hi[2:, 0] += 3.0
    res = solve_central(x1, x2, RobustnessTube(lo, hi), tube_from_trajectory(x2, 0.05), model, DELTA)
    assert res.status == "Infeasible" and res.decisions is None


def test_conflict_at_start_is_infeasible(model):
    x = rollout(model, np.zeros(6), np.zeros((10, 3)))
    t = tube_from_trajectory(x, 0.2)
    assert solve_central(x, x, t, t, model, DELTA).status == "Infeasible"


def test_rejects_mismatched_inputs(model, pair):
    x1, x2, t1, t2 = pair
    with pytest.raises(ValueError):
        solve_central(x1, window(x2, 0, 10), t1, t2, model, DELTA)
    with pytest.raises(ValueError):
        solve_central(x1, x2, t1, t2, model, DELTA, method="simplex")
    with pytest.raises(ValueError):
        solve_central(x1, x2, t1, t2, model, DELTA, time_limit=0)


def test_milp_decisions_give_zero_slack(model):
    # the full 200+ instance check lives in the acceptance suite
    n = 0
    for seed in range(40):
        for ratio in (0.5, 1.15):
            x1, x2, t1, t2 = colliding_pair(seed, model, ratio)
            res = solve_central(x1, x2, t1, t2, model, DELTA)
            if not res.feasible:
                continue
            n += 1
            out = run_stages(x1, x2, t1, t2, res.decisions, model, DELTA)
            assert out.zero_slack, (seed, ratio, out.slack_sums)
    assert n >= 40


def test_recheck_catches_a_bad_plan(model, pair):
    x1, x2, t1, t2 = pair
    res = solve_central(x1, x2, t1, t2, model, DELTA)
    bad = replace(res, traj2_new=res.traj1_new)
    with pytest.raises(RuntimeError):
        recheck(bad, x1, x2, t1, t2, DELTA)
