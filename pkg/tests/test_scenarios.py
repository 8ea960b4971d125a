import numpy as np
import pytest

from conftest import DELTA
from deconflict.geometry import Box3, conflict_indices, positions_of
from deconflict.lnf import detect_conflicts
from deconflict.scenarios import (Scenario, box_clearance, gen_colliding_pair, gen_position_swap, gen_three_way,
                                  gen_unit_cube, load_scenario, save_scenario)


def test_colliding_pair_basics(model):
    sc = gen_colliding_pair(4)
    assert sc.horizon == 40 and len(sc.uas) == 2
    p = sc.preplans(model)
    assert len(p[1].states) == 41
    np.testing.assert_array_equal(p[1].velocities[0], 0.0)
    assert len(conflict_indices(p[1], p[2], DELTA))
    # both pass within delta of the collision point at mid-course
    for x in p.values():
        assert np.max(np.abs(x.positions[20])) < DELTA


@pytest.mark.parametrize("seed", range(30))
def test_colliding_pair_always_conflicts(model, seed):
    sc = gen_colliding_pair(seed, collision_point=(1.0, -2.0, 0.5), rho=0.05)
    p = sc.preplans(model)
    assert len(conflict_indices(p[1], p[2], DELTA))
    assert np.max(np.abs(p[1].positions[0] - p[2].positions[0])) >= DELTA
    assert np.all(np.abs(p[1].velocities) <= model.v_max)


def test_colliding_pair_is_deterministic(tmp_path):
    save_scenario(gen_colliding_pair(17), tmp_path / "a.json")
    save_scenario(gen_colliding_pair(17), tmp_path / "b.json")
    assert (tmp_path / "a.json").read_bytes() == (tmp_path / "b.json").read_bytes()
    assert gen_colliding_pair(17) != gen_colliding_pair(18)


def test_colliding_pair_rejects_bad_grid():
    with pytest.raises(ValueError):
        gen_colliding_pair(0, T=4.05)


def test_position_swap(model):
    sc = gen_position_swap()
    goals = {u.id: u.goal for u in sc.uas}
    assert goals == {1: (1.0, 0.0, 0.0), 2: (0.0, 1.0, 0.0), 3: (-1.0, 0.0, 0.0), 4: (0.0, -1.0, 0.0)}
    assert all(u.start == tuple(-g for g in u.goal) for u in sc.uas)
    assert [u.priority for u in sc.uas] == [1, 2, 3, 4]
    assert (sc.T, sc.delta, sc.rho) == (4.0, 0.1, 0.055)
    p = sc.preplans(model)
    for x in p.values():
        np.testing.assert_allclose(x.positions[20], 0.0, atol=1e-5)
    fleet = sc.fleet(model)
    pairs = {frozenset((u.id, o)) for u in fleet.uas for o in detect_conflicts(fleet, u.id, DELTA)}
    assert len(pairs) == 6


def test_three_way_meets_at_origin(model):
    # pre-plans track the min-jerk references to well under a millimeter
    for x in gen_three_way().preplans(model).values():
        np.testing.assert_allclose(x.positions[20], 0.0, atol=1e-5)


@pytest.mark.parametrize("make", [lambda: gen_colliding_pair(3), gen_position_swap, gen_three_way,
                                  lambda: gen_unit_cube(6, 2)])
def test_json_round_trip_is_byte_identical(tmp_path, make):
    sc = make()
    text = sc.to_json()
    assert Scenario.from_json(text) == sc
    assert Scenario.from_json(text).to_json() == text
    save_scenario(sc, tmp_path / "s.json")
    assert load_scenario(tmp_path / "s.json").to_json() == text


def test_json_rejects_unknown_schema():
    d = gen_position_swap().to_dict()
    d["schema_version"] = 2
    with pytest.raises(ValueError):
        Scenario.from_dict(d)


def test_scenario_validation():
    sc = gen_position_swap()
    with pytest.raises(ValueError):
        Scenario(0.1, 4.0, 0.1, 0.0, sc.uas)
    dup = sc.uas[:1] + (sc.uas[1].__class__(2, 1, (0, 0, 0), (1, 1, 1)),)
    with pytest.raises(ValueError):
        Scenario(0.1, 4.0, 0.1, 0.055, dup)


def test_unit_cube_nofly_box():
    sc = gen_unit_cube(5, 0)
    (box,) = sc.nofly
    assert np.prod(box.hi - box.lo) == pytest.approx(0.008)


@pytest.mark.parametrize("seed", range(5))
def test_unit_cube_plans_avoid_the_box(model, seed):
    sc = gen_unit_cube(20, seed)
    (box,) = sc.nofly
    p = sc.preplans(model)
    for u in sc.uas:
        assert np.all(box_clearance(p[u.id].positions, box) >= sc.rho)
        # starts and goals lie on opposite faces
        s, g = np.array(u.start), np.array(u.goal)
        assert np.any(np.isclose(np.abs(s), 0.5) & np.isclose(s, -g))
    fleet = sc.fleet(model)
    assert any(detect_conflicts(fleet, u.id, DELTA) for u in fleet.uas)


def test_unit_cube_needs_two():
    with pytest.raises(ValueError):
        gen_unit_cube(1, 0)


def test_box_clearance():
    box = Box3(np.full(3, -0.1), np.full(3, 0.1))
    np.testing.assert_allclose(box_clearance([[0, 0, 0], [0.3, 0, 0], [0.2, -0.3, 0.1]], box), [0.0, 0.2, 0.2])
