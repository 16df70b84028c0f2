"""Kinematic bicycle model, forward-Euler discretised."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from . import kernels


def wrap_angle(a: float) -> float:
    """Map an angle to (-pi, pi]."""
    w = math.remainder(a, 2.0 * math.pi)
    return math.pi if w == -math.pi else w


@dataclass(frozen=True)
class EgoState:
    px: float
    py: float
    psi: float
    v: float

    def __post_init__(self):
        object.__setattr__(self, "psi", wrap_angle(float(self.psi)))
        if not math.isfinite(self.v):
            raise ValueError("speed must be finite")

    def as_array(self) -> np.ndarray:
        return np.array([self.px, self.py, self.psi, self.v])


@dataclass(frozen=True)
class ControlInput:
    alpha: float
    delta: float


@dataclass(frozen=True)
class VehicleParams:
    lf: float = 1.5
    lr: float = 1.5
    alpha_max: float = 5.0
    delta_max: float = math.pi / 8
    clamp_v: bool = True


@dataclass
class Trajectory:
    """``states`` has shape (T + 1, 4), ``controls`` (T, 2).

    Arrays are float for plain rollouts and object (``DiffScalar``) for
    differentiable ones.
    """

    states: np.ndarray
    controls: np.ndarray

    def __len__(self) -> int:
        return self.states.shape[0]

    @property
    def horizon(self) -> int:
        return self.controls.shape[0]


def _clamp(u, lo: float, hi: float):
    # inside the bounds the clamp is the identity; outside it is a constant
    if u < lo:
        return lo
    if u > hi:
        return hi
    return u


def _step(px, py, psi, v, acc, steer, dt, params: VehicleParams):
    ratio = params.lr / (params.lf + params.lr)
    beta = ad.atan(ratio * _tan(steer))
    heading = psi + beta
    npx = px + v * ad.cos(heading) * dt
    npy = py + v * ad.sin(heading) * dt
    npsi = psi + (v / params.lr) * ad.sin(beta) * dt
    nv = v + acc * dt
    if params.clamp_v and nv < 0.0:
        nv = 0.0
    return npx, npy, npsi, nv


def _tan(x):
    if isinstance(x, ad.DiffScalar):
        return x.tan()
    return math.tan(x)


def clamp_controls(controls, params: VehicleParams = VehicleParams()) -> np.ndarray:
    c = np.asarray(controls, dtype=float).reshape(-1, 2)
    out = np.empty_like(c)
    out[:, 0] = np.clip(c[:, 0], -params.alpha_max, params.alpha_max)
    out[:, 1] = np.clip(c[:, 1], -params.delta_max, params.delta_max)
    return out


def step(
    x: EgoState, u: ControlInput, dt: float, params: VehicleParams = VehicleParams()
) -> EgoState:
    """One Euler step of the bicycle model (controls are not clamped here)."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    ctrl = np.array([[[u.alpha, u.delta]]])
    # same kernel as rollout() so executed and planned motion agree bitwise
    nxt = kernels.rollout_batch(
        x.as_array(), ctrl, dt, params.lf, params.lr, math.inf, math.inf, params.clamp_v
    )[0, 1]
    return EgoState(*map(float, nxt))


def rollout(
    x0: EgoState | np.ndarray,
    controls,
    dt: float,
    params: VehicleParams = VehicleParams(),
) -> Trajectory:
    """Roll a control sequence (T, 2) out from ``x0``; controls are clamped first.

    Object arrays of ``DiffScalar`` are accepted and produce a differentiable
    trajectory.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    ctrl = np.asarray(controls)
    if ctrl.size == 0:
        raise ValueError("empty control sequence")
    ctrl = ctrl.reshape(-1, 2)
    horizon = ctrl.shape[0]
    diff = ctrl.dtype == object
    x0 = x0.as_array() if isinstance(x0, EgoState) else np.asarray(x0, dtype=float)

    if not diff:
        ctrl = clamp_controls(ctrl, params)
        states = kernels.rollout_batch(
            x0,
            ctrl[None],
            dt,
            params.lf,
            params.lr,
            params.alpha_max,
            params.delta_max,
            params.clamp_v,
        )[0]
        return Trajectory(states, ctrl)

    clamped = np.empty_like(ctrl)
    states = np.empty((horizon + 1, 4), dtype=object)
    px, py, psi, v = (float(s) for s in x0)
    states[0] = (px, py, psi, v)
    for t in range(horizon):
        acc = _clamp(ctrl[t, 0], -params.alpha_max, params.alpha_max)
        steer = _clamp(ctrl[t, 1], -params.delta_max, params.delta_max)
        clamped[t] = (acc, steer)
        px, py, psi, v = _step(px, py, psi, v, acc, steer, dt, params)
        states[t + 1] = (px, py, psi, v)
    return Trajectory(states, clamped)


def rollout_many(
    x0: EgoState | np.ndarray,
    controls: np.ndarray,
    dt: float,
    params: VehicleParams = VehicleParams(),
) -> np.ndarray:
    """Batched rollout of (B, T, 2) controls -> states (B, T + 1, 4)."""
    x0 = x0.as_array() if isinstance(x0, EgoState) else np.asarray(x0, dtype=float)
    ctrl = np.asarray(controls, dtype=float)
    return kernels.rollout_batch(
        x0,
        ctrl,
        dt,
        params.lf,
        params.lr,
        params.alpha_max,
        params.delta_max,
        params.clamp_v,
    )


def is_feasible(traj: Trajectory, dt: float, params: VehicleParams = VehicleParams(), tol=1e-9) -> bool:
    """Check ``states[t+1] == f(states[t], controls[t])`` along the trajectory."""
    s = ad.value(traj.states).astype(float)
    c = ad.value(traj.controls).astype(float)
    for t in range(c.shape[0]):
        nxt = _step(*s[t], *c[t], dt, params)
        if not np.allclose(nxt, s[t + 1], atol=tol, rtol=0.0):
            return False
    return True
