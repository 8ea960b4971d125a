import numpy as np
import pytest
from hypothesis import given, strategies as st

from conftest import DELTA, colliding_pair
from deconflict.central import solve_central
from deconflict.dynamics import rollout
from deconflict.geometry import tube_from_trajectory
from deconflict.lnf import run_stages
from deconflict.policies import (CrOutput, GreedyPolicy, OracleInfeasibleError, OraclePolicy, RandomPolicy,
                                 greedy_margins, greedy_policy, oracle_policy, random_policy, repair_sequences,
                                 top_s_decision)


def points(z):
    """Trajectory-like position arrays with difference ``z`` at every step."""
    z = np.atleast_2d(np.asarray(z, dtype=float))
    return z, np.zeros_like(z)


def test_random_policy_is_reproducible_and_sized():
    a, b = random_policy(11, 40), random_policy(11, 40)
    assert len(a.decisions) == 41
    np.testing.assert_array_equal(a.decisions, b.decisions)
    np.testing.assert_array_equal(a.probabilities[np.arange(41), a.decisions - 1], 1.0)


def test_random_policy_is_uniform():
    d = random_policy(0, 10**5 - 1).decisions
    freq = np.bincount(d, minlength=7)[1:] / len(d)
    assert np.all(np.abs(freq - 1 / 6) <= 0.01)


def test_random_policy_object_draws_fresh_sequences(pair):
    x1, x2, t1, t2 = pair
    pol = RandomPolicy(3)
    assert not np.array_equal(pol(x1, x2, t1, t2).decisions, pol(x1, x2, t1, t2).decisions)


def test_greedy_picks_existing_side():
    p1, p2 = points([0.0, 0.0, 0.2])
    r = greedy_margins(p1, p2, DELTA)
    np.testing.assert_allclose(r[0], [-0.1, -0.1, -0.1, -0.1, -0.3, 0.1])
    # UAS 1 above UAS 2: side 6, -(z1 - z2) <= -delta
    assert greedy_policy(p1, p2, DELTA).decisions[0] == 6


def test_greedy_uses_preset_in_conflict():
    p1, p2 = points([[0.0, 0.0, 0.0], [0.05, 0.0, 0.0], [0.0, 0.3, 0.0]])
    np.testing.assert_array_equal(greedy_policy(p1, p2, DELTA).decisions, [5, 5, 4])
    np.testing.assert_array_equal(greedy_policy(p1, p2, DELTA, preset=2).decisions, [2, 2, 4])
    with pytest.raises(ValueError):
        greedy_policy(p1, p2, DELTA, preset=7)


def test_greedy_tie_goes_to_lowest_index():
    p1, p2 = points([0.2, 0.0, -0.2])
    # sides 2 and 5 both have margin 0.1
    assert greedy_policy(p1, p2, DELTA).decisions[0] == 2


@given(shift=st.tuples(*[st.floats(-5, 5)] * 3))
def test_greedy_ignores_common_translation(pair, shift):
    x1, x2, _, _ = pair
    p1, p2 = x1.positions, x2.positions
    s = np.asarray(shift)
    np.testing.assert_array_equal(greedy_policy(p1, p2, DELTA).decisions,
                                  greedy_policy(p1 + s, p2 + s, DELTA).decisions)


def test_greedy_policy_object(pair):
    x1, x2, t1, t2 = pair
    np.testing.assert_array_equal(GreedyPolicy(DELTA)(x1, x2, t1, t2).decisions,
                                  greedy_policy(x1, x2, DELTA).decisions)


def test_top_s_examples():
    eta = [0.5, 0.2, 0.1, 0.1, 0.05, 0.05]
    assert top_s_decision(eta, 1) == 1
    assert top_s_decision(eta, 2) == 2
    assert top_s_decision(eta, 3) == 3
    assert top_s_decision(eta, 4) == 4
    for bad in (0, 7):
        with pytest.raises(ValueError):
            top_s_decision(eta, bad)


def test_top_s_is_a_permutation(rng):
    for _ in range(100):
        eta = rng.dirichlet(np.ones(6))
        order = [top_s_decision(eta, s) for s in range(1, 7)]
        assert sorted(order) == [1, 2, 3, 4, 5, 6]
        assert np.all(np.diff(eta[np.array(order) - 1]) <= 0)


def test_repair_worked_example():
    d = np.ones(5, dtype=int)
    eta = np.full((5, 6), 0.02)
    eta[:, 0] = 0.9
    # second and third choices at k=2 are 3 then 2, at k=3 they are 5 then 3
    eta[2] = [0.5, 0.15, 0.2, 0.05, 0.05, 0.05]
    eta[3] = [0.5, 0.05, 0.15, 0.05, 0.2, 0.05]
    reps = repair_sequences(d, eta, [2, 3])
    assert len(reps) == 5
    np.testing.assert_array_equal(reps[0], [1, 1, 3, 5, 1])
    np.testing.assert_array_equal(reps[1], [1, 1, 2, 3, 1])


def test_repair_changes_only_colliding_steps(rng):
    for _ in range(30):
        eta = rng.dirichlet(np.ones(6), size=9)
        out = CrOutput.from_probabilities(eta)
        ks = np.sort(rng.choice(9, size=3, replace=False))
        reps = repair_sequences(out.decisions, out.probabilities, ks)
        others = np.setdiff1d(np.arange(9), ks)
        used = np.stack([out.decisions] + reps)
        for r in reps:
            np.testing.assert_array_equal(r[others], out.decisions[others])
        for k in ks:
            assert len(set(used[:, k])) == 6


def test_repair_rejects_bad_input():
    d = np.ones(3, dtype=int)
    eta = np.full((3, 6), 1 / 6)
    with pytest.raises(ValueError):
        repair_sequences(d, eta, [])
    with pytest.raises(ValueError):
        repair_sequences(d, np.full((4, 6), 1 / 6), [1])


def test_cr_output_validation():
    eta = np.full((2, 6), 1 / 6)
    assert list(CrOutput(np.array([1, 1]), eta).decisions) == [1, 1]
    with pytest.raises(ValueError):
        CrOutput(np.array([2, 1]), eta)  # ties must resolve to the lowest index
    with pytest.raises(ValueError):
        CrOutput(np.array([1, 1]), eta * 2)
    with pytest.raises(ValueError):
        CrOutput(np.array([1, 1]), np.full((2, 5), 0.2))
    with pytest.raises(ValueError):
        CrOutput(np.array([1, 7]), eta)
    out = CrOutput.one_hot([3, 4])
    with pytest.raises(ValueError):
        out.decisions[0] = 1


def test_oracle_decisions_separate(model):
    x1, x2, t1, t2 = colliding_pair(8, model)
    cr = OraclePolicy(model, DELTA)(x1, x2, t1, t2)
    assert run_stages(x1, x2, t1, t2, cr.decisions, model, DELTA).zero_slack


def test_oracle_on_separated_pair(model):
    H = 10
    x1 = rollout(model, np.array([0, 0, 0.3, 0, 0, 0.0]), np.zeros((H, 3)))
    x2 = rollout(model, np.zeros(6), np.zeros((H, 3)))
    t1, t2 = tube_from_trajectory(x1, 0.02), tube_from_trajectory(x2, 0.02)
    np.testing.assert_array_equal(oracle_policy(x1, x2, t1, t2, model, DELTA).decisions, np.full(H + 1, 6))


def test_oracle_raises_when_infeasible(model):
    x1, x2, t1, t2 = colliding_pair(0, model, ratio=0.2)
    assert not solve_central(x1, x2, t1, t2, model, DELTA).feasible
    with pytest.raises(OracleInfeasibleError):
        oracle_policy(x1, x2, t1, t2, model, DELTA)
