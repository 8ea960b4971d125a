"""Linearized multirotor model around hover, rollouts and min-jerk pre-plans.

State layout is ``[px, py, pz, vx, vy, vz]``; inputs are ``[roll, pitch, thrust]``
expressed as deviations from hover ``(0, 0, m*g)``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

BOUND_TOL = 1e-9

# (input index, gain) driving each position axis: x <- g*pitch, y <- -g*roll, z <- thrust/m
_AXIS_INPUT = (1, 0, 2)


def _frozen(a):
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class DynamicsModel:
    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    dt: float
    m: float
    g: float
    u_lo: np.ndarray
    u_hi: np.ndarray
    v_max: np.ndarray

    def axis_channel(self, axis):
        """Return ``(input_index, gain)`` such that ``accel[axis] = gain * u[input_index]``."""
        idx = _AXIS_INPUT[axis]
        return idx, float(self.B[3 + axis, idx] / self.dt)


@dataclass(frozen=True)
class Trajectory:
    """Sampled full-state trajectory, ``states.shape == (H+1, 6)``.

    ``inputs`` (shape ``(H, 3)``) is present when the trajectory is an exact
    rollout of the linear model; it is ``None`` for raw reference samples.
    """

    states: np.ndarray
    dt: float
    inputs: np.ndarray | None = field(default=None)

    def __post_init__(self):
        states = np.asarray(self.states, dtype=float)
        if states.ndim != 2 or states.shape[1] != 6:
            raise ValueError(f"states must have shape (N, 6), got {states.shape}")
        if len(states) < 1:
            raise ValueError("trajectory needs at least one state")
        if not np.all(np.isfinite(states)):
            raise ValueError("non-finite state")
        object.__setattr__(self, "states", _frozen(states))
        if self.inputs is not None:
            inputs = np.asarray(self.inputs, dtype=float).reshape(-1, 3)
            if len(inputs) != len(states) - 1:
                raise ValueError("inputs must have one row fewer than states")
            object.__setattr__(self, "inputs", _frozen(inputs))

    @property
    def horizon(self):
        return len(self.states) - 1

    @property
    def positions(self):
        return self.states[:, :3]

    @property
    def velocities(self):
        return self.states[:, 3:]

    def suffix(self, k):
        """Drop the first ``k`` samples (receding-horizon shift)."""
        inputs = None if self.inputs is None else self.inputs[k:]
        return Trajectory(self.states[k:], self.dt, inputs)


def build_model(dt=0.1, m=1.0, g=9.81, input_bounds=None, velocity_bounds=None):
    """Exact zero-order-hold discretization of the hover-linearized multirotor.

    ``input_bounds`` is ``(lo, hi)`` over ``(roll, pitch, thrust)``; default is
    +-0.5236 rad on the angles and +-0.5*m*g on thrust. ``velocity_bounds`` is a
    per-axis speed limit (default 5 m/s).
    """
    if not dt > 0 or not m > 0 or not g > 0:
        raise ValueError(f"dt, m and g must be positive (dt={dt}, m={m}, g={g})")
    B2 = np.array([[0.0, g, 0.0], [-g, 0.0, 0.0], [0.0, 0.0, 1.0 / m]])
    eye = np.eye(3)
    A = np.block([[eye, dt * eye], [np.zeros((3, 3)), eye]])
    B = np.vstack([0.5 * dt * dt * B2, dt * B2])
    C = np.hstack([eye, np.zeros((3, 3))])
    if input_bounds is None:
        hi = np.array([0.5236, 0.5236, 0.5 * m * g])
        lo = -hi
    else:
        lo, hi = (np.asarray(b, dtype=float).reshape(3) for b in input_bounds)
    if np.any(lo > hi):
        raise ValueError("input lower bound exceeds upper bound")
    if velocity_bounds is None:
        velocity_bounds = 5.0
    v_max = np.broadcast_to(np.asarray(velocity_bounds, dtype=float), (3,))
    return DynamicsModel(_frozen(A), _frozen(B), _frozen(C), float(dt), float(m), float(g),
                         _frozen(lo), _frozen(hi), _frozen(v_max))


def input_in_bounds(model, u, tol=BOUND_TOL):
    u = np.asarray(u, dtype=float)
    return bool(np.all(u >= model.u_lo - tol) and np.all(u <= model.u_hi + tol))


def step(model, x, u, check_bounds=True):
    x = np.asarray(x, dtype=float)
    u = np.asarray(u, dtype=float)
    if check_bounds and not input_in_bounds(model, u):
        raise ValueError(f"input {u} outside bounds [{model.u_lo}, {model.u_hi}]")
    return model.A @ x + model.B @ u


def rollout(model, x0, inputs, check_bounds=True):
    inputs = np.asarray(inputs, dtype=float).reshape(-1, 3)
    states = np.empty((len(inputs) + 1, 6))
    states[0] = x0
    for k, u in enumerate(inputs):
        states[k + 1] = step(model, states[k], u, check_bounds)
    return Trajectory(states, model.dt, inputs)


def _n_steps(T, dt):
    if not dt > 0 or not T > 0:
        raise ValueError("T and dt must be positive")
    n = int(round(T / dt))
    if n < 1 or abs(n * dt - T) > 1e-9 * max(1.0, T):
        raise ValueError(f"T={T} is not an integer multiple of dt={dt}")
    return n


def min_jerk_trajectory(start, goal, T, dt):
    """Rest-to-rest quintic from ``start`` to ``goal`` sampled every ``dt``."""
    start = np.asarray(start, dtype=float).reshape(3)
    goal = np.asarray(goal, dtype=float).reshape(3)
    n = _n_steps(T, dt)
    tau = np.arange(n + 1) / n
    s = tau ** 3 * (10.0 - 15.0 * tau + 6.0 * tau ** 2)
    ds = 30.0 * tau ** 2 * (1.0 - tau) ** 2 / T
    delta = goal - start
    states = np.empty((n + 1, 6))
    states[:, :3] = start + s[:, None] * delta
    states[:, 3:] = ds[:, None] * delta
    states[0, :3], states[-1, :3] = start, goal
    return Trajectory(states, dt)


def quintic_coefficients(p0, v0, a0, p1, v1, a1, T):
    """Per-axis quintic coefficients (lowest order first), shape ``(6, 3)``."""
    p0, v0, a0, p1, v1, a1 = (np.asarray(a, dtype=float).reshape(3) for a in (p0, v0, a0, p1, v1, a1))
    M = np.array([[T ** 3, T ** 4, T ** 5],
                  [3 * T ** 2, 4 * T ** 3, 5 * T ** 4],
                  [6 * T, 12 * T ** 2, 20 * T ** 3]])
    rhs = np.vstack([p1 - p0 - v0 * T - 0.5 * a0 * T ** 2,
                     v1 - v0 - a0 * T,
                     a1 - a0])
    high = np.linalg.solve(M, rhs)
    return np.vstack([p0, v0, 0.5 * a0, high])


def min_jerk_via(start, via, goal, T, dt):
    """Two quintic segments meeting at ``via`` at ``T/2``.

    The via point is crossed with the mean velocity of the whole move and zero
    acceleration, so the concatenation is C2.
    """
    start, via, goal = (np.asarray(a, dtype=float).reshape(3) for a in (start, via, goal))
    n = _n_steps(T, dt)
    if n % 2:
        raise ValueError("via-point plans need an even number of steps")
    half = n // 2
    Th = half * dt
    v_via = (goal - start) / T
    zero = np.zeros(3)
    segs = [quintic_coefficients(start, zero, zero, via, v_via, zero, Th),
            quintic_coefficients(via, v_via, zero, goal, zero, zero, Th)]
    t = np.arange(half + 1) * dt
    powers = t[:, None] ** np.arange(6)
    dpowers = np.hstack([np.zeros((half + 1, 1)), powers[:, :5] * np.arange(1, 6)])
    states = np.empty((n + 1, 6))
    for i, coef in enumerate(segs):
        rows = slice(i * half, (i + 1) * half + 1)
        states[rows, :3] = powers @ coef
        states[rows, 3:] = dpowers @ coef
    states[0, :3], states[half, :3], states[-1, :3] = start, via, goal
    states[0, 3:] = states[-1, 3:] = 0.0
    return Trajectory(states, dt)


def accel_to_input(model, accel):
    """Map desired accelerations ``(..., 3)`` to hover-deviation inputs."""
    accel = np.asarray(accel, dtype=float)
    u = np.empty_like(accel)
    u[..., 0] = -accel[..., 1] / model.g
    u[..., 1] = accel[..., 0] / model.g
    u[..., 2] = accel[..., 2] * model.m
    return u


def track_reference(model, ref):
    """Dynamically consistent version of a sampled reference.

    Uses the per-step velocity increments as piecewise-constant accelerations
    (clipped to the input box) and rolls the model out from ``ref.states[0]``.
    For rest-to-rest quintics the result deviates from the samples by O(dt^4).
    """
    if abs(ref.dt - model.dt) > 1e-12:
        raise ValueError("reference dt differs from model dt")
    accel = np.diff(ref.velocities, axis=0) / model.dt
    u = np.clip(accel_to_input(model, accel), model.u_lo, model.u_hi)
    return rollout(model, ref.states[0], u)


def reference_inputs(model, traj):
    """Inputs reproducing ``traj``: stored ones if present, else a velocity-difference estimate."""
    if traj.inputs is not None:
        return np.array(traj.inputs)
    accel = np.diff(traj.velocities, axis=0) / model.dt
    return np.clip(accel_to_input(model, accel), model.u_lo, model.u_hi)
