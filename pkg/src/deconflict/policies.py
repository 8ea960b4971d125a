"""Conflict-resolution decision sources and the repair sequence generator.

A policy is any callable ``policy(x1, x2, tube1, tube2) -> CrOutput``. The
per-timestep probability rows drive repair; one-hot rows are used by the
sources that have no notion of confidence.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import N_SIDES, as_decisions, positions_of, side_matrix


class OracleInfeasibleError(RuntimeError):
    """The centralized problem has no solution, so the oracle has no decisions."""


@dataclass(frozen=True)
class CrOutput:
    decisions: np.ndarray
    probabilities: np.ndarray

    def __post_init__(self):
        eta = np.array(self.probabilities, dtype=float)
        if eta.ndim != 2 or eta.shape[1] != N_SIDES:
            raise ValueError("probabilities must have shape (H+1, 6)")
        if np.any(eta < 0) or np.any(np.abs(eta.sum(axis=1) - 1.0) > 1e-6):
            raise ValueError("probability rows must be non-negative and sum to 1")
        d = as_decisions(self.decisions, len(eta))
        if np.any(d != np.argmax(eta, axis=1) + 1):
            raise ValueError("decisions must be the per-row argmax of the probabilities")
        eta.setflags(write=False)
        d.setflags(write=False)
        object.__setattr__(self, "decisions", d)
        object.__setattr__(self, "probabilities", eta)

    @classmethod
    def one_hot(cls, d):
        d = as_decisions(d)
        eta = np.zeros((len(d), N_SIDES))
        eta[np.arange(len(d)), d - 1] = 1.0
        return cls(d, eta)

    @classmethod
    def from_probabilities(cls, eta):
        eta = np.asarray(eta, dtype=float)
        return cls(np.argmax(eta, axis=1) + 1, eta)


def random_policy(seed, H):
    """Uniform side per timestep from a seeded generator; ``H + 1`` decisions."""
    rng = np.random.default_rng(seed)
    return CrOutput.one_hot(rng.integers(1, N_SIDES + 1, size=H + 1))


def greedy_margins(x1, x2, delta):
    """``r[k, i] = q^i - M^i (p1_k - p2_k)``; non-negative where side i already holds."""
    z = positions_of(x1) - positions_of(x2)
    M, q = side_matrix(delta)
    return q[None, :] - z @ M.T


def greedy_policy(x1, x2, delta, preset=5):
    """Side with the largest margin where some side already holds, ``preset`` elsewhere."""
    if not 1 <= preset <= N_SIDES:
        raise ValueError("preset side must be in 1..6")
    r = greedy_margins(x1, x2, delta)
    d = np.where(r.max(axis=1) >= 0.0, np.argmax(r, axis=1) + 1, preset)
    return CrOutput.one_hot(d)


def oracle_policy(x1, x2, tube1, tube2, model, delta, **kwargs):
    """Decisions read off the centralized deconfliction solution."""
    from .central import solve_central

    res = solve_central(x1, x2, tube1, tube2, model, delta, **kwargs)
    if not res.feasible:
        raise OracleInfeasibleError(f"centralized problem is {res.status}")
    return CrOutput.one_hot(res.decisions)


def top_s_decision(eta_row, s):
    """Class with the ``s``-th largest probability (1-based), ties to the lowest index."""
    if not 1 <= int(s) <= N_SIDES:
        raise ValueError(f"s must be in 1..6, got {s}")
    eta_row = np.asarray(eta_row, dtype=float).reshape(N_SIDES)
    order = np.argsort(-eta_row, kind="stable")
    return int(order[int(s) - 1]) + 1


def repair_sequences(d, eta, collisions):
    """Five alternative sequences: entry ``s-2`` swaps in the s-th ranked class on ``collisions``."""
    d = as_decisions(d)
    eta = np.asarray(eta, dtype=float)
    ks = np.unique(np.asarray(collisions, dtype=int))
    if len(ks) == 0:
        raise ValueError("repair needs at least one colliding timestep")
    if eta.shape != (len(d), N_SIDES):
        raise ValueError("probabilities do not match the decision sequence")
    out = []
    for s in range(2, N_SIDES + 1):
        ds = d.copy()
        ds[ks] = [top_s_decision(eta[k], s) for k in ks]
        out.append(ds)
    return out


class RandomPolicy:
    def __init__(self, seed=0):
        self.rng = np.random.default_rng(seed)

    def __call__(self, x1, x2, tube1=None, tube2=None):
        return CrOutput.one_hot(self.rng.integers(1, N_SIDES + 1, size=x1.horizon + 1))


class GreedyPolicy:
    def __init__(self, delta, preset=5):
        self.delta, self.preset = delta, preset

    def __call__(self, x1, x2, tube1=None, tube2=None):
        return greedy_policy(x1, x2, self.delta, self.preset)


class OraclePolicy:
    def __init__(self, model, delta, **kwargs):
        self.model, self.delta, self.kwargs = model, delta, kwargs

    def __call__(self, x1, x2, tube1, tube2):
        return oracle_policy(x1, x2, tube1, tube2, self.model, self.delta, **self.kwargs)


class LearnedPolicy:
    """Wraps a trained sequence classifier; input is the planned position difference."""

    def __init__(self, classifier):
        self.classifier = classifier

    def __call__(self, x1, x2, tube1=None, tube2=None):
        from .learning import predict

        z = positions_of(x1) - positions_of(x2)
        return CrOutput.from_probabilities(predict(self.classifier, z))
