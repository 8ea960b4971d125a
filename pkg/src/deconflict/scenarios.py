"""Scenario definitions, generators and the scenario JSON format.

JSON layout (``schema_version`` 1, keys in this order)::

    {"schema_version": 1, "dt": 0.1, "T": 4.0, "delta": 0.1, "rho": 0.055, "seed": 0,
     "uas": [{"id": 1, "priority": 1, "start": [x, y, z], "goal": [x, y, z],
              "waypoints": [[x, y, z]]}, ...],
     "nofly": [{"lo": [x, y, z], "hi": [x, y, z]}, ...]}

``waypoints`` is omitted when empty; at most one waypoint (a mid-course via
point) is supported. ``seed`` may be null.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .dynamics import build_model, min_jerk_trajectory, min_jerk_via, track_reference
from .geometry import Box3, conflict_indices, tube_from_trajectory

SCHEMA_VERSION = 1


@dataclass(frozen=True)
class UasSpec:
    id: int
    priority: int
    start: tuple
    goal: tuple
    waypoints: tuple = ()


@dataclass(frozen=True)
class Scenario:
    dt: float
    T: float
    delta: float
    rho: float
    uas: tuple
    nofly: tuple = ()
    seed: int | None = None

    def __post_init__(self):
        if not self.rho > 0 or not self.delta > 0:
            raise ValueError("rho and delta must be positive")
        if len({u.priority for u in self.uas}) != len(self.uas):
            raise ValueError("priorities must be distinct")
        if len({u.id for u in self.uas}) != len(self.uas):
            raise ValueError("ids must be distinct")
        for u in self.uas:
            if len(u.waypoints) > 1:
                raise ValueError("at most one waypoint per UAS is supported")

    @property
    def horizon(self):
        return int(round(self.T / self.dt))

    def preplan(self, model, uid):
        u = next(s for s in self.uas if s.id == uid)
        if u.waypoints:
            ref = min_jerk_via(u.start, u.waypoints[0], u.goal, self.T, self.dt)
        else:
            ref = min_jerk_trajectory(u.start, u.goal, self.T, self.dt)
        return track_reference(model, ref)

    def preplans(self, model=None):
        model = model or build_model(self.dt)
        return {u.id: self.preplan(model, u.id) for u in self.uas}

    def fleet(self, model=None, rho=None):
        from .lnf import FleetState, UasPlan

        plans = self.preplans(model)
        rho = self.rho if rho is None else rho
        return FleetState(tuple(UasPlan(u.id, u.priority, plans[u.id], tube_from_trajectory(plans[u.id], rho))
                                for u in self.uas))

    def to_dict(self):
        def uas(u):
            d = {"id": u.id, "priority": u.priority, "start": [float(a) for a in u.start],
                 "goal": [float(a) for a in u.goal]}
            if u.waypoints:
                d["waypoints"] = [[float(a) for a in w] for w in u.waypoints]
            return d

        return {"schema_version": SCHEMA_VERSION, "dt": self.dt, "T": self.T, "delta": self.delta,
                "rho": self.rho, "seed": self.seed, "uas": [uas(u) for u in self.uas],
                "nofly": [{"lo": [float(a) for a in b.lo], "hi": [float(a) for a in b.hi]} for b in self.nofly]}

    def to_json(self):
        return json.dumps(self.to_dict(), indent=1) + "\n"

    @classmethod
    def from_dict(cls, d):
        if d.get("schema_version") != SCHEMA_VERSION:
            raise ValueError(f"unsupported scenario schema_version {d.get('schema_version')!r}")
        uas = tuple(UasSpec(int(u["id"]), int(u["priority"]), tuple(map(float, u["start"])),
                            tuple(map(float, u["goal"])), tuple(tuple(map(float, w)) for w in u.get("waypoints", ())))
                    for u in d["uas"])
        nofly = tuple(Box3(b["lo"], b["hi"]) for b in d.get("nofly", ()))
        return cls(float(d["dt"]), float(d["T"]), float(d["delta"]), float(d["rho"]), uas, nofly, d.get("seed"))

    @classmethod
    def from_json(cls, text):
        return cls.from_dict(json.loads(text))


def load_scenario(path):
    with open(path) as fh:
        return Scenario.from_json(fh.read())


def save_scenario(scenario, path):
    with open(path, "w") as fh:
        fh.write(scenario.to_json())


def gen_colliding_pair(seed, collision_point=(0.0, 0.0, 0.0), cube_half_width=0.2, T=4.0, dt=0.1,
                       delta=0.1, rho=0.055, offset=1.0, max_tries=1000):
    """Head-on pair whose pre-plans both pass a fixed collision point at ``T/2``.

    Two cubes of half-width ``cube_half_width`` sit at ``collision_point -+
    offset * e_x``. UAS 1 flies from a random point of the first cube to a
    random point of the second and UAS 2 the other way, each through
    ``collision_point``. Draws are repeated until the pre-plans conflict and
    the start points are at least ``delta`` apart.
    """
    rng = np.random.default_rng(seed)
    c = np.asarray(collision_point, dtype=float)
    ex = np.array([offset, 0.0, 0.0])
    model = build_model(dt)
    via = (tuple(float(a) for a in c),)
    for _ in range(max_tries):
        a1, b1, b2, a2 = (rng.uniform(-cube_half_width, cube_half_width, 3) for _ in range(4))
        s1, g1 = c - ex + a1, c + ex + b1
        s2, g2 = c + ex + b2, c - ex + a2
        if np.max(np.abs(s1 - s2)) < delta:
            continue
        pt = lambda v: tuple(float(a) for a in v)
        sc = Scenario(dt, T, delta, rho, (UasSpec(1, 1, pt(s1), pt(g1), via), UasSpec(2, 2, pt(s2), pt(g2), via)),
                      seed=None if seed is None else int(seed))
        p = sc.preplans(model)
        if len(conflict_indices(p[1], p[2], delta)):
            return sc
    raise RuntimeError(f"no conflicting pair found in {max_tries} draws")


def gen_position_swap(T=4.0, dt=0.1, delta=0.1, rho=0.055):
    goals = [(1.0, 0.0, 0.0), (0.0, 1.0, 0.0), (-1.0, 0.0, 0.0), (0.0, -1.0, 0.0)]
    uas = tuple(UasSpec(j + 1, j + 1, tuple(0.0 - a for a in g), g) for j, g in enumerate(goals))
    return Scenario(dt, T, delta, rho, uas)


def gen_three_way(T=4.0, dt=0.1, delta=0.1, rho=0.055):
    """Three vehicles whose pre-plans all cross the origin at ``T/2``."""
    r = 1.0 / np.sqrt(2.0)
    starts = [(-1.0, 0.0, 0.0), (0.0, -1.0, 0.0), (-r, r, 0.0)]
    uas = tuple(UasSpec(j + 1, j + 1, s, tuple(0.0 - a for a in s)) for j, s in enumerate(starts))
    return Scenario(dt, T, delta, rho, uas)


NOFLY_HALF = 0.1
CUBE_HALF = 0.5


def box_clearance(points, box):
    """Inf-norm distance from each point to ``box`` (0 inside)."""
    p = np.atleast_2d(points)
    return np.max(np.maximum(np.maximum(box.lo - p, p - box.hi), 0.0), axis=1)


def _detour(start, goal, box, rho, rng, T, dt):
    mid = 0.5 * (start + goal)
    axis = (goal - start) / np.linalg.norm(goal - start)
    centre = 0.5 * (box.lo + box.hi)
    away = mid - centre
    away -= axis * (away @ axis)
    if np.linalg.norm(away) < 1e-6:
        away = rng.normal(size=3)
        away -= axis * (away @ axis)
    away /= np.linalg.norm(away)
    for push in np.arange(0.1, 0.6, 0.02):
        via = mid + push * away
        ref = min_jerk_via(start, via, goal, T, dt)
        if np.all(box_clearance(ref.positions, box) >= rho + 1e-3):
            return via
    return None


def gen_unit_cube(n_uas, seed, T=4.0, dt=0.1, delta=0.1, rho=0.055, max_tries=200):
    """Vehicles crossing a unit cube between opposite faces around a central no-fly box.

    Plans whose straight path comes within ``rho`` of the no-fly box get one
    lateral via point at mid-course. Start points and goals are kept at least
    ``2 * delta`` apart so conflicts are never pinned at the endpoints.
    """
    if n_uas < 2:
        raise ValueError("need at least two vehicles")
    rng = np.random.default_rng(seed)
    box = Box3(np.full(3, -NOFLY_HALF), np.full(3, NOFLY_HALF))
    model = build_model(dt)
    specs, starts, goals = [], [], []
    for j in range(n_uas):
        for _ in range(max_tries):
            axis = int(rng.integers(3))
            sign = 1.0 if rng.random() < 0.5 else -1.0
            start = rng.uniform(-CUBE_HALF, CUBE_HALF, 3)
            goal = rng.uniform(-CUBE_HALF, CUBE_HALF, 3)
            start[axis], goal[axis] = -sign * CUBE_HALF, sign * CUBE_HALF
            if any(np.max(np.abs(start - s)) < 2 * delta for s in starts):
                continue
            if any(np.max(np.abs(goal - g)) < 2 * delta for g in goals):
                continue
            ref = min_jerk_trajectory(start, goal, T, dt)
            wps = ()
            if np.any(box_clearance(ref.positions, box) < rho + 1e-3):
                via = _detour(start, goal, box, rho, rng, T, dt)
                if via is None:
                    continue
                wps = (tuple(via),)
                ref = min_jerk_via(start, via, goal, T, dt)
            plan = track_reference(model, ref)
            if np.any(np.abs(plan.velocities) > model.v_max) or np.any(box_clearance(plan.positions, box) < rho):
                continue
            break
        else:
            raise RuntimeError("could not place a vehicle in the unit cube")
        starts.append(start)
        goals.append(goal)
        specs.append(UasSpec(j + 1, j + 1, tuple(start), tuple(goal), wps))
    return Scenario(dt, T, delta, rho, tuple(specs), (box,), int(seed))
