import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from stl_build import dummy_signals, to_formula
from rulehier import autodiff as ad
from rulehier import stl
from rulehier.stl import Always, And, Eventually, Not, Predicate, robustness_hard, robustness_smooth

TAU = 0.05


def margins_pred(values, name="p"):
    values = np.asarray(values, dtype=float)
    return Predicate(name, lambda sig, w: values[: sig.length])


def test_always_constant_margin():
    traj = np.zeros((11, 4))
    traj[:, 3] = 10.0
    phi = Always(Predicate("vmax", lambda sig, w: 15.0 - sig.v), 0, 10)
    assert robustness_hard(phi, traj, None) == pytest.approx(5.0)


def test_eventually_window_max():
    phi = Eventually(margins_pred([-1.0, 0.5, -2.0]), 0, 2)
    assert robustness_hard(phi, dummy_signals(3), None) == pytest.approx(0.5)


def test_and_with_negation():
    p = margins_pred([0.3])
    assert robustness_hard(And((p, Not(p))), dummy_signals(1), None) == pytest.approx(-0.3)


def test_horizon_too_short():
    phi = Always(margins_pred(np.ones(5)), 0, 5)
    with pytest.raises(stl.HorizonError, match="horizon too short for formula"):
        robustness_hard(phi, dummy_signals(5), None)


def test_bad_interval_rejected():
    with pytest.raises(ValueError):
        Always(margins_pred([1.0]), 3, 1)


def test_smooth_single_predicate_equals_hard_with_exact_gradient():
    u = ad.lift([0.7, 1.2])
    traj = np.empty((1, 4), dtype=object)
    traj[0] = (u[0], u[1], 0.0, 0.0)
    phi = Predicate("lin", lambda sig, w: 2 * sig.px - sig.py)
    r = robustness_smooth(phi, traj, None, TAU)
    assert ad.value(r) == pytest.approx(robustness_hard(phi, ad.value(traj).astype(float), None))
    np.testing.assert_array_equal(ad.gradient(r), [2.0, -1.0])


@pytest.mark.parametrize("n", [2, 5, 11])
def test_smooth_always_equal_margins(n):
    phi = Always(margins_pred(np.full(n, 0.8)), 0, n - 1)
    assert robustness_smooth(phi, dummy_signals(n), None, TAU) == pytest.approx(0.8 - TAU * math.log(n))


def _random_instance(rng, depth=3, n_preds=3):
    f = oracles.random_formula(rng, n_preds, depth)
    length = oracles.span(f) + 1 + int(rng.integers(0, 3))
    margins = rng.normal(0, 1, (n_preds, length))
    return f, margins, length


def test_hard_smooth_gap_bounded_by_fan_in():
    rng = np.random.default_rng(11)
    for _ in range(300):
        f, m, length = _random_instance(rng)
        phi = to_formula(f, m)
        hard = robustness_hard(phi, dummy_signals(length), None)
        smooth = robustness_smooth(phi, dummy_signals(length), None, TAU)
        assert abs(hard - smooth) <= TAU * phi.fan_in_bound() + 1e-12


def _single_polarity(f):
    ops = set()

    def walk(g):
        ops.add(g[0])
        if g[0] == "not":
            walk(g[1])
        elif g[0] in ("and", "or"):
            for c in g[1]:
                walk(c)
        elif g[0] in ("G", "F"):
            walk(g[3])

    walk(f)
    return "not" not in ops and not (ops & {"and", "G"} and ops & {"or", "F"})


def test_smooth_converges_to_hard_monotonically_for_single_polarity():
    # every reduction a smooth min (or every one a smooth max): each is
    # monotone in temperature and in its arguments, so the gap shrinks with tau
    rng = np.random.default_rng(5)
    seen = 0
    while seen < 200:
        f, m, length = _random_instance(rng)
        if not _single_polarity(f):
            continue
        seen += 1
        phi = to_formula(f, m)
        hard = robustness_hard(phi, dummy_signals(length), None)
        gaps = [abs(robustness_smooth(phi, dummy_signals(length), None, t) - hard) for t in (0.2, 0.1, 0.05, 0.01)]
        assert all(b <= a + 1e-12 for a, b in zip(gaps, gaps[1:]))


def test_smooth_converges_to_hard_for_mixed_formulas():
    # mixed min/max nestings can cancel errors, so only the end points and
    # the fan-in bound are asserted
    rng = np.random.default_rng(6)
    for _ in range(300):
        f, m, length = _random_instance(rng)
        phi = to_formula(f, m)
        hard = robustness_hard(phi, dummy_signals(length), None)
        coarse = abs(robustness_smooth(phi, dummy_signals(length), None, 0.2) - hard)
        fine = abs(robustness_smooth(phi, dummy_signals(length), None, 0.01) - hard)
        assert fine <= 0.01 * phi.fan_in_bound() + 1e-12
        assert fine <= coarse + 1e-12 or coarse <= 0.01 * phi.fan_in_bound()


def test_mixed_nesting_gap_is_not_monotone():
    # p0 & (p1 | p2): the inner max overshoots and the outer min undershoots,
    # so at tau = 0.2 the two smoothing errors partly cancel
    m = np.array([[0.07], [-0.12], [-0.07]])
    phi = to_formula(("and", [("p", 0), ("or", [("p", 1), ("p", 2)])]), m)
    hard = robustness_hard(phi, dummy_signals(1), None)
    gaps = [abs(robustness_smooth(phi, dummy_signals(1), None, t) - hard) for t in (0.2, 0.1, 0.05, 0.01)]
    assert gaps[1] > gaps[0]
    assert gaps[-1] < min(gaps[:-1])


def test_hard_sign_agrees_with_boolean_oracle():
    rng = np.random.default_rng(2)
    checked = 0
    for _ in range(500):
        f, m, length = _random_instance(rng)
        rho = robustness_hard(to_formula(f, m), dummy_signals(length), None)
        if abs(rho) > 1e-9:
            assert (rho > 0) == oracles.holds(f, m, 0)
            checked += 1
    assert checked > 450


def test_monotone_in_predicate_margins():
    rng = np.random.default_rng(9)
    for _ in range(200):
        f, m, length = _random_instance(rng)
        bump = np.abs(rng.normal(0, 0.5, m.shape))
        # Not flips monotonicity, so only negation-free formulas qualify
        if "not" in repr(f):
            continue
        lo = robustness_hard(to_formula(f, m), dummy_signals(length), None)
        hi = robustness_hard(to_formula(f, m + bump), dummy_signals(length), None)
        assert hi >= lo


def test_batched_evaluation_matches_single():
    rng = np.random.default_rng(4)
    states = rng.normal(0, 3, (6, 8, 4))
    phi = Eventually(And((Predicate("a", lambda s, w: s.px - s.py), Predicate("b", lambda s, w: 2 - np.abs(s.v)))), 1, 4)
    batch = stl.evaluate(phi, states, None)
    smooth = stl.evaluate(phi, states, None, temperature=TAU)
    for b in range(6):
        assert batch[b] == robustness_hard(phi, states[b], None)
        assert smooth[b] == pytest.approx(robustness_smooth(phi, states[b], None, TAU), rel=1e-12, abs=1e-12)


def test_steps_for_rounds_up():
    assert stl.steps_for(1.0, 0.2) == 5
    assert stl.steps_for(1.0, 0.3) == 4
    assert stl.steps_for(0.4, 0.2) == 2


def test_temperature_must_be_positive():
    with pytest.raises(ValueError):
        robustness_smooth(margins_pred([1.0]), dummy_signals(1), None, 0.0)


@settings(max_examples=100)
@given(vals=st.lists(st.floats(-5, 5), min_size=1, max_size=8))
def test_zero_robustness_counts_as_satisfied(vals):
    vals = [0.0] + vals
    phi = Always(margins_pred(np.abs(vals)), 0, len(vals) - 1)
    rho = robustness_hard(phi, dummy_signals(len(vals)), None)
    assert rho == 0.0 and oracles.holds(("G", 0, len(vals) - 1, ("p", 0)), [np.abs(vals)], 0)
