"""Batched numeric kernels used by the primitive-tree search.

Each kernel has a numba version and a numpy version with identical
signatures.  The public names are bound to one of the two at import time
according to :data:`rulehier._accel.USE_NUMBA`; both variants stay importable
(``*_numpy`` / ``*_numba``) for tests and benchmarks.
"""

import numpy as np

from ._accel import HAVE_NUMBA, USE_NUMBA, njit

__all__ = [
    "BACKEND",
    "rollout_batch",
    "smooth_reduce",
    "box_separation",
    "warmup",
]


# -- rollout -----------------------------------------------------------------


def rollout_batch_numpy(x0, controls, dt, lf, lr, alpha_max, delta_max, clamp_v):
    """Roll out ``controls`` of shape (B, T, 2).

    ``x0`` is one state (4,) shared by all rows or one state per row (B, 4).
    Returns states of shape (B, T + 1, 4).  Controls are clamped first.
    """
    b, horizon, _ = controls.shape
    x0 = np.broadcast_to(np.asarray(x0, dtype=np.float64), (b, 4))
    states = np.empty((b, horizon + 1, 4))
    px = x0[:, 0].copy()
    py = x0[:, 1].copy()
    psi = x0[:, 2].copy()
    v = x0[:, 3].copy()
    states[:, 0, 0] = px
    states[:, 0, 1] = py
    states[:, 0, 2] = psi
    states[:, 0, 3] = v
    ratio = lr / (lf + lr)
    for t in range(horizon):
        acc = np.clip(controls[:, t, 0], -alpha_max, alpha_max)
        steer = np.clip(controls[:, t, 1], -delta_max, delta_max)
        beta = np.arctan(ratio * np.tan(steer))
        heading = psi + beta
        px = px + v * np.cos(heading) * dt
        py = py + v * np.sin(heading) * dt
        psi = psi + (v / lr) * np.sin(beta) * dt
        v = v + acc * dt
        if clamp_v:
            v = np.maximum(v, 0.0)
        states[:, t + 1, 0] = px
        states[:, t + 1, 1] = py
        states[:, t + 1, 2] = psi
        states[:, t + 1, 3] = v
    return states


@njit(cache=True)
def _rollout_batch_jit(x0, controls, dt, lf, lr, alpha_max, delta_max, clamp_v):
    b, horizon, _ = controls.shape
    states = np.empty((b, horizon + 1, 4))
    ratio = lr / (lf + lr)
    for i in range(b):
        px = x0[i, 0]
        py = x0[i, 1]
        psi = x0[i, 2]
        v = x0[i, 3]
        states[i, 0, 0] = px
        states[i, 0, 1] = py
        states[i, 0, 2] = psi
        states[i, 0, 3] = v
        for t in range(horizon):
            acc = min(max(controls[i, t, 0], -alpha_max), alpha_max)
            steer = min(max(controls[i, t, 1], -delta_max), delta_max)
            beta = np.arctan(ratio * np.tan(steer))
            heading = psi + beta
            # all right-hand sides use the state before the update
            npx = px + v * np.cos(heading) * dt
            npy = py + v * np.sin(heading) * dt
            npsi = psi + (v / lr) * np.sin(beta) * dt
            nv = v + acc * dt
            if clamp_v and nv < 0.0:
                nv = 0.0
            px, py, psi, v = npx, npy, npsi, nv
            states[i, t + 1, 0] = px
            states[i, t + 1, 1] = py
            states[i, t + 1, 2] = psi
            states[i, t + 1, 3] = v
    return states


def rollout_batch_numba(x0, controls, dt, lf, lr, alpha_max, delta_max, clamp_v):
    b = controls.shape[0]
    x0 = np.broadcast_to(np.asarray(x0, dtype=np.float64), (b, 4))
    return _rollout_batch_jit(
        np.ascontiguousarray(x0),
        np.ascontiguousarray(controls, dtype=np.float64),
        float(dt),
        float(lf),
        float(lr),
        float(alpha_max),
        float(delta_max),
        bool(clamp_v),
    )


# -- log-sum-exp reduction -----------------------------------------------------


def smooth_reduce_numpy(values, temperature, take_max):
    """Log-sum-exp min (or max) over axis 0 of a 2-D array (n, m) -> (m,)."""
    x = values if take_max else -values
    m = x.max(axis=0)
    s = np.exp((x - m) / temperature).sum(axis=0)
    out = m + temperature * np.log(s)
    return out if take_max else -out


@njit(cache=True)
def _smooth_reduce_jit(values, temperature, take_max):
    n, cols = values.shape
    sign = 1.0 if take_max else -1.0
    # row-major sweeps keep memory access contiguous
    m = sign * values[0].copy()
    for i in range(1, n):
        for j in range(cols):
            x = sign * values[i, j]
            if x > m[j]:
                m[j] = x
    s = np.zeros(cols)
    inv = 1.0 / temperature
    for i in range(n):
        for j in range(cols):
            s[j] += np.exp((sign * values[i, j] - m[j]) * inv)
    out = np.empty(cols)
    for j in range(cols):
        out[j] = sign * (m[j] + temperature * np.log(s[j]))
    return out


def smooth_reduce_numba(values, temperature, take_max):
    return _smooth_reduce_jit(
        np.ascontiguousarray(values, dtype=np.float64), float(temperature), bool(take_max)
    )


# -- body-frame box separation ---------------------------------------------------


def box_separation_numpy(px, py, cx, cy, heading, hx, hy):
    """Per-axis separations ``|dx| - hx`` and ``|dy| - hy`` in the box frame.

    ``px``/``py`` have shape (L, B); ``cx``/``cy``/``heading`` have shape (L,).
    """
    c = np.cos(heading)[:, None]
    s = np.sin(heading)[:, None]
    rx = px - cx[:, None]
    ry = py - cy[:, None]
    dx = c * rx + s * ry
    dy = -s * rx + c * ry
    return np.abs(dx) - hx, np.abs(dy) - hy


@njit(cache=True)
def _box_separation_jit(px, py, cx, cy, heading, hx, hy):
    n, b = px.shape
    sx = np.empty((n, b))
    sy = np.empty((n, b))
    for t in range(n):
        c = np.cos(heading[t])
        s = np.sin(heading[t])
        for i in range(b):
            rx = px[t, i] - cx[t]
            ry = py[t, i] - cy[t]
            sx[t, i] = abs(c * rx + s * ry) - hx
            sy[t, i] = abs(-s * rx + c * ry) - hy
    return sx, sy


def box_separation_numba(px, py, cx, cy, heading, hx, hy):
    return _box_separation_jit(
        np.ascontiguousarray(px, dtype=np.float64),
        np.ascontiguousarray(py, dtype=np.float64),
        np.ascontiguousarray(cx, dtype=np.float64),
        np.ascontiguousarray(cy, dtype=np.float64),
        np.ascontiguousarray(heading, dtype=np.float64),
        float(hx),
        float(hy),
    )


if USE_NUMBA:
    BACKEND = "numba"
    rollout_batch = rollout_batch_numba
    smooth_reduce = smooth_reduce_numba
    box_separation = box_separation_numba
else:
    BACKEND = "numpy"
    rollout_batch = rollout_batch_numpy
    smooth_reduce = smooth_reduce_numpy
    box_separation = box_separation_numpy


def warmup():
    """Trigger JIT compilation so the first planning cycle is not an outlier."""
    if not (HAVE_NUMBA and USE_NUMBA):
        return
    ctrl = np.zeros((2, 2, 2))
    rollout_batch(np.zeros(4), ctrl, 0.2, 1.5, 1.5, 5.0, 0.4, True)
    smooth_reduce(np.zeros((2, 3)), 0.05, True)
    smooth_reduce(np.zeros((2, 3)), 0.05, False)
    z = np.zeros((2, 3))
    box_separation(z, z, np.zeros(2), np.zeros(2), np.zeros(2), 5.0, 2.0)
