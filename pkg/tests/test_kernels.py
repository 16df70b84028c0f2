import math
import os
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from rulehier import kernels


def random_controls(rng, b, t):
    return np.stack([rng.uniform(-7, 7, (b, t)), rng.uniform(-0.6, 0.6, (b, t))], axis=-1)


@pytest.mark.parametrize("clamp_v", [True, False])
def test_rollout_backends_agree(clamp_v):
    rng = np.random.default_rng(0)
    u = random_controls(rng, 64, 10)
    x0 = rng.normal(size=(64, 4)) + [0, 0, 0, 3]
    args = (0.2, 1.5, 1.5, 5.0, math.pi / 8, clamp_v)
    a = kernels.rollout_batch_numpy(x0, u, *args)
    b = kernels.rollout_batch_numba(x0, u, *args)
    np.testing.assert_allclose(a, b, rtol=1e-12, atol=1e-12)


def test_rollout_matches_oracle():
    rng = np.random.default_rng(1)
    u = random_controls(rng, 8, 10)
    x0 = np.array([0.0, 1.0, 0.2, 6.0])
    out = kernels.rollout_batch(x0, u, 0.2, 1.5, 1.5, 5.0, math.pi / 8, True)
    for i in range(8):
        np.testing.assert_allclose(out[i], oracles.bicycle_rollout(x0, u[i], 0.2), atol=1e-10)


@settings(max_examples=50, deadline=None)
@given(
    st.integers(1, 12),
    st.integers(1, 9),
    st.floats(0.01, 2.0),
    st.booleans(),
    st.integers(0, 2**31 - 1),
)
def test_smooth_reduce_backends_agree(n, b, temperature, take_max, seed):
    vals = np.random.default_rng(seed).normal(scale=3.0, size=(n, b))
    a = kernels.smooth_reduce_numpy(vals, temperature, take_max)
    c = kernels.smooth_reduce_numba(vals, temperature, take_max)
    np.testing.assert_allclose(a, c, rtol=1e-12, atol=1e-12)
    hard = vals.max(axis=0) if take_max else vals.min(axis=0)
    # log-sum-exp lies between the hard value and the hard value shifted by T log n
    gap = (a - hard) if take_max else (hard - a)
    assert np.all(gap >= -1e-12)
    assert np.all(gap <= temperature * math.log(n) + 1e-12)


def test_box_separation_backends_agree():
    rng = np.random.default_rng(2)
    px, py = rng.uniform(-20, 20, (11, 30)), rng.uniform(-5, 5, (11, 30))
    cx, cy, hd = rng.uniform(-5, 5, 11), rng.uniform(-2, 2, 11), rng.uniform(-1, 1, 11)
    a = kernels.box_separation_numpy(px, py, cx, cy, hd, 5.0, 2.0)
    b = kernels.box_separation_numba(px, py, cx, cy, hd, 5.0, 2.0)
    for x, y in zip(a, b):
        np.testing.assert_allclose(x, y, rtol=1e-12, atol=1e-12)


def test_box_separation_axis_aligned():
    px = np.array([[10.0], [0.0], [6.0]])
    py = np.array([[0.0], [3.0], [2.5]])
    z = np.zeros(3)
    sx, sy = kernels.box_separation(px, py, z, z, z, 5.0, 2.0)
    np.testing.assert_allclose(sx[:, 0], [5.0, -5.0, 1.0])
    np.testing.assert_allclose(sy[:, 0], [-2.0, 1.0, 0.5])


def test_backend_flag_selects_numpy():
    env = dict(os.environ, RULEHIER_NUMBA="0")
    out = subprocess.run(
        [sys.executable, "-c", "from rulehier import kernels; print(kernels.BACKEND)"],
        env=env,
        capture_output=True,
        text=True,
        check=True,
    )
    assert out.stdout.strip() == "numpy"


def test_backend_matches_flag():
    expected = "numba" if kernels.USE_NUMBA else "numpy"
    assert kernels.BACKEND == expected
