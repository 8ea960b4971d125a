"""Boxes, robustness tubes, conflict detection, separating sides and tube shrinking."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dynamics import Trajectory

EPS_SEP = 1e-9

# side i (1-based) constrains M^i z <= q^i with M^i = SIDE_SIGN[i-1] * e_{SIDE_AXIS[i-1]}
SIDE_AXIS = np.array([0, 0, 1, 1, 2, 2])
SIDE_SIGN = np.array([1.0, -1.0, 1.0, -1.0, 1.0, -1.0])
N_SIDES = 6


class DegenerateShrinkError(ValueError):
    """A trajectory point lies strictly inside the slab removed by tube shrinking."""


def positions_of(x):
    """Position samples ``(N, 3)`` from a Trajectory or an array of states/positions."""
    if isinstance(x, Trajectory):
        return x.positions
    x = np.asarray(x, dtype=float)
    if x.ndim != 2 or x.shape[1] not in (3, 6):
        raise ValueError(f"expected (N, 3) positions or (N, 6) states, got {x.shape}")
    return x[:, :3]


@dataclass(frozen=True, eq=False)
class Box3:
    lo: np.ndarray
    hi: np.ndarray

    def __post_init__(self):
        lo = np.asarray(self.lo, dtype=float).reshape(3)
        hi = np.asarray(self.hi, dtype=float).reshape(3)
        if np.any(lo > hi):
            raise ValueError(f"empty box: lo={lo} hi={hi}")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    def __eq__(self, other):
        if not isinstance(other, Box3):
            return NotImplemented
        return bool(np.array_equal(self.lo, other.lo) and np.array_equal(self.hi, other.hi))

    def __hash__(self):
        return hash((self.lo.tobytes(), self.hi.tobytes()))

    def contains(self, p, tol=EPS_SEP):
        p = np.asarray(p, dtype=float)
        return bool(np.all(p >= self.lo - tol) and np.all(p <= self.hi + tol))

    def is_subset_of(self, other, tol=0.0):
        return bool(np.all(self.lo >= other.lo - tol) and np.all(self.hi <= other.hi + tol))


@dataclass(frozen=True)
class RobustnessTube:
    """One axis-aligned box per timestep, stored as ``lo``/``hi`` arrays of shape ``(N, 3)``."""

    lo: np.ndarray
    hi: np.ndarray

    def __post_init__(self):
        lo = np.array(self.lo, dtype=float)
        hi = np.array(self.hi, dtype=float)
        if lo.shape != hi.shape or lo.ndim != 2 or lo.shape[1] != 3:
            raise ValueError("tube bounds must both have shape (N, 3)")
        if np.any(lo > hi):
            raise ValueError("tube contains an empty box")
        lo.setflags(write=False)
        hi.setflags(write=False)
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    def __len__(self):
        return len(self.lo)

    def box(self, k):
        return Box3(self.lo[k], self.hi[k])

    def contains(self, x, tol=EPS_SEP):
        p = positions_of(x)
        if len(p) != len(self):
            raise ValueError("trajectory and tube lengths differ")
        return bool(np.all(p >= self.lo - tol) and np.all(p <= self.hi + tol))

    def is_subset_of(self, other, tol=0.0):
        return bool(np.all(self.lo >= other.lo - tol) and np.all(self.hi <= other.hi + tol))

    def suffix(self, k):
        return RobustnessTube(self.lo[k:], self.hi[k:])


@dataclass(frozen=True)
class SideConstraint:
    M: np.ndarray
    q: float

    def satisfied(self, z, tol=EPS_SEP):
        return bool(self.M @ np.asarray(z, dtype=float) <= self.q + tol)


def side_constraint(i, delta):
    """Half-space ``M z <= q`` (``z = p1 - p2``) whose satisfaction implies ``|z|_inf >= delta``."""
    if not 1 <= int(i) <= N_SIDES or int(i) != i:
        raise ValueError(f"side index must be in 1..6, got {i}")
    M = np.zeros(3)
    M[SIDE_AXIS[i - 1]] = SIDE_SIGN[i - 1]
    return SideConstraint(M, -float(delta))


def side_matrix(delta):
    """All six sides stacked: ``(M, q)`` with shapes ``(6, 3)`` and ``(6,)``."""
    M = np.zeros((N_SIDES, 3))
    M[np.arange(N_SIDES), SIDE_AXIS] = SIDE_SIGN
    return M, np.full(N_SIDES, -float(delta))


def as_decisions(d, length=None):
    """Validate a decision sequence (entries in 1..6) and return it as an int array."""
    d = np.asarray(d)
    if d.ndim != 1 or (length is not None and len(d) != length):
        raise ValueError(f"decision sequence must be 1-D of length {length}")
    if not np.all(np.equal(np.mod(d, 1), 0)):
        raise ValueError("decisions must be integers")
    d = d.astype(np.int64)
    if np.any(d < 1) or np.any(d > N_SIDES):
        raise ValueError("decisions must lie in 1..6")
    return d


def separations(x1, x2):
    """Per-timestep inf-norm distance between two position sequences."""
    p1, p2 = positions_of(x1), positions_of(x2)
    if p1.shape != p2.shape:
        raise ValueError(f"trajectory lengths differ: {len(p1)} vs {len(p2)}")
    return np.max(np.abs(p1 - p2), axis=1)


def min_separation(x1, x2):
    return float(separations(x1, x2).min())


def conflict_indices(x1, x2, delta):
    """Sorted timesteps ``k`` with ``|p1_k - p2_k|_inf < delta`` (strict, with EPS_SEP slack)."""
    if isinstance(x1, Trajectory) and isinstance(x2, Trajectory) and abs(x1.dt - x2.dt) > 1e-12:
        raise ValueError("trajectories use different dt")
    return np.flatnonzero(separations(x1, x2) < delta - EPS_SEP)


def tube_from_trajectory(x, rho):
    if not rho > 0:
        raise ValueError(f"tube radius must be positive, got {rho}")
    p = positions_of(x)
    return RobustnessTube(p - rho, p + rho)


def _gaps(lo1, hi1, lo2, hi2):
    with np.errstate(invalid="ignore"):
        gap = np.maximum(lo2 - hi1, lo1 - hi2)
    return np.maximum(np.nan_to_num(gap, nan=0.0, posinf=np.inf, neginf=-np.inf), 0.0)


def box_distance_inf(a, b):
    """``inf {|x - y|_inf : x in a, y in b}`` for axis-aligned boxes."""
    return float(np.max(_gaps(a.lo, a.hi, b.lo, b.hi)))


def tube_distances(t1, t2):
    if len(t1) != len(t2):
        raise ValueError("tube lengths differ")
    return np.max(_gaps(t1.lo, t1.hi, t2.lo, t2.hi), axis=1)


def tubes_delta_separate(t1, t2, delta):
    return bool(np.all(tube_distances(t1, t2) >= delta - EPS_SEP))


def shrink_tubes(x1new, x2new, tube1, tube2, delta):
    """Remove a separating slab between the two tubes wherever they are not delta-separate.

    At each such timestep the slab is normal to the axis of largest separation
    between the new positions, centred on their midpoint, with thickness
    ``min(msep, delta)``. Each box keeps the connected piece that contains its
    own trajectory point.
    """
    p1, p2 = positions_of(x1new), positions_of(x2new)
    if not (len(p1) == len(p2) == len(tube1) == len(tube2)):
        raise ValueError("trajectory/tube lengths differ")
    diff = np.abs(p1 - p2)
    msep = float(diff.max(axis=1).min())
    width = min(msep, float(delta))
    lo1, hi1 = np.array(tube1.lo), np.array(tube1.hi)
    lo2, hi2 = np.array(tube2.lo), np.array(tube2.hi)
    dist = tube_distances(tube1, tube2)
    for k in np.flatnonzero(dist < delta - EPS_SEP):
        a = int(np.argmax(diff[k]))  # argmax returns the lowest index on ties
        mid = 0.5 * (p1[k, a] + p2[k, a])
        s_lo, s_hi = mid - 0.5 * width, mid + 0.5 * width
        for p, lo, hi, who in ((p1, lo1, hi1, 1), (p2, lo2, hi2, 2)):
            c = p[k, a]
            # clamp to the opposite face: the point may sit a rounding error outside its own box
            if c >= s_hi - EPS_SEP:
                lo[k, a] = min(max(lo[k, a], min(s_hi, c)), hi[k, a])
            elif c <= s_lo + EPS_SEP:
                hi[k, a] = max(min(hi[k, a], max(s_lo, c)), lo[k, a])
            else:
                raise DegenerateShrinkError(
                    f"UAS {who} position {c:.6g} inside slab [{s_lo:.6g}, {s_hi:.6g}] on axis {a} at k={k}")
    return RobustnessTube(lo1, hi1), RobustnessTube(lo2, hi2)
