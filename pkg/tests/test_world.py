import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rulehier import autodiff as ad
from rulehier import world
from rulehier.world import LaneLine, NonEgoTrack, extend_track, occupancy_margin, signed_lateral_offset

LINE = LaneLine([(-50.0, -2.0), (50.0, -2.0)])
coord = st.floats(-40, 40, allow_nan=False)


# -- extend_track -------------------------------------------------------------------


def test_extend_stationary_car_repeats_position():
    tr = NonEgoTrack([[50.0, 0.0, 0.0, 0.0]])
    out = extend_track(tr, 10)
    assert len(out) == 10
    np.testing.assert_array_equal(out.states[:, :2], np.tile([50.0, 0.0], (10, 1)))


def test_extend_uniform_motion():
    tr = NonEgoTrack([[0.0, 0.0, 0.0, 10.0]])
    out = extend_track(tr, 3, dt=0.2)
    np.testing.assert_allclose(out.states[1:, :2], [[2.0, 0.0], [4.0, 0.0]])


def test_extend_preserves_prefix():
    states = np.column_stack([np.arange(5.0), np.zeros(5), np.zeros(5), np.full(5, 5.0)])
    out = extend_track(NonEgoTrack(states), 10)
    assert len(out) == 10
    np.testing.assert_array_equal(out.states[:5], states)


def test_extend_empty_track_raises():
    with pytest.raises(ValueError, match="empty track"):
        extend_track(NonEgoTrack(np.zeros((0, 4))), 5)


@given(n=st.integers(1, 8), h=st.integers(1, 20))
def test_extend_idempotent(n, h):
    tr = NonEgoTrack(np.column_stack([np.arange(n, dtype=float), np.zeros(n), np.zeros(n), np.ones(n)]))
    once = extend_track(tr, h)
    twice = extend_track(once, h)
    assert len(once) >= h
    np.testing.assert_array_equal(once.states, twice.states)


def test_window_starts_at_offset():
    tr = world.track_from_script(0.0, 0.0, 0.0, [10.0], 0.2, 5)
    scene = world.WorldScene(world.MapModel(), (tr,), 0.2)
    w = scene.window(3, 4)
    assert len(w.non_ego[0]) == 4
    np.testing.assert_allclose(w.non_ego[0].states[:, 0], [6.0, 8.0, 10.0, 12.0])


# -- signed_lateral_offset -------------------------------------------------------------


def test_offset_on_line_is_zero():
    assert signed_lateral_offset((3.0, -2.0), LINE) == pytest.approx(0.0, abs=1e-12)


def test_offset_left_side_positive():
    assert signed_lateral_offset((0.0, 0.0), LINE) == pytest.approx(2.0)


def test_offset_right_side_negative():
    assert signed_lateral_offset((0.0, -3.0), LINE) == pytest.approx(-1.0)


def test_offset_beyond_endpoint_uses_endpoint_distance():
    assert signed_lateral_offset((53.0, 2.0), LINE) == pytest.approx(5.0)


def test_offset_polyline_picks_nearest_segment():
    bend = LaneLine([(0.0, 0.0), (10.0, 0.0), (10.0, 10.0)])
    # left of the second segment (pointing +y) is -x
    assert signed_lateral_offset((8.0, 6.0), bend) == pytest.approx(2.0)


@given(x=coord, y1=coord, y2=coord)
def test_offset_sign_changes_iff_crossing(x, y1, y2):
    s1 = signed_lateral_offset((x, y1), LINE)
    s2 = signed_lateral_offset((x, y2), LINE)
    crossed = (y1 + 2.0) * (y2 + 2.0) < 0
    assert (s1 * s2 < 0) == crossed


def test_offset_batched_and_differentiable_agree():
    xs = np.array([-3.0, 0.0, 4.0])
    ys = np.array([-5.0, -2.5, 1.0])
    batch = signed_lateral_offset((xs, ys), LINE)
    for i in range(3):
        lifted = ad.lift([xs[i], ys[i]])
        d = signed_lateral_offset((lifted[0], lifted[1]), LINE)
        assert ad.value(d) == pytest.approx(batch[i])
        np.testing.assert_allclose(ad.gradient(d), [0.0, 1.0], atol=1e-12)


# -- occupancy_margin ----------------------------------------------------------------

CAR = NonEgoTrack([[0.0, 0.0, 0.0, 0.0]], half_extents=(5.0, 2.0))


def test_margin_at_center_is_minus_short_half_extent():
    assert occupancy_margin((0.0, 0.0), CAR, 0) == pytest.approx(-2.0)


def test_margin_ahead_of_box():
    assert occupancy_margin((8.0, 0.0), CAR, 0) == pytest.approx(3.0)


def test_margin_at_corner_is_zero():
    assert occupancy_margin((5.0, 2.0), CAR, 0) == pytest.approx(0.0, abs=1e-12)


def test_margin_step_out_of_range():
    with pytest.raises(IndexError):
        occupancy_margin((0.0, 0.0), CAR, 1)


def test_margin_rotates_with_heading():
    turned = NonEgoTrack([[0.0, 0.0, math.pi / 2, 0.0]])
    # a point 4 m to the side in world frame is 4 m ahead in the body frame
    assert occupancy_margin((4.0, 0.0), turned, 0) == pytest.approx(2.0)
    assert occupancy_margin((4.0, 0.0), turned, 0, rotate=False) == pytest.approx(-1.0)


@settings(max_examples=50)
@given(heading=st.floats(-math.pi, math.pi), x0=coord, y0=coord)
def test_margin_lipschitz_in_body_frame(heading, x0, y0):
    tr = NonEgoTrack([[0.0, 0.0, heading, 0.0]])
    h = 0.05
    c, s = math.cos(heading), math.sin(heading)
    # moves along body axes change the margin by at most the step length
    prev = occupancy_margin((x0, y0), tr, 0)
    for k in range(1, 40):
        ax = (x0 + k * h * c, y0 + k * h * s)
        cur = occupancy_margin(ax, tr, 0)
        assert abs(cur - prev) <= h + 1e-9
        prev = cur


def test_zone_margin_inside_and_outside():
    z = world.StopZone((0.0, 21.0), (1.75, 5.0))
    assert world.zone_margin(0.0, 21.0, z) == pytest.approx(1.75)
    assert world.zone_margin(0.0, 30.0, z) == pytest.approx(-4.0)


# -- map types -----------------------------------------------------------------------


def test_polyline_needs_two_points():
    with pytest.raises(ValueError):
        LaneLine([(0.0, 0.0)])


def test_lane_headings_validated():
    with pytest.raises(ValueError):
        world.Lane([(0, 0), (1, 0)], headings=[0.0, 4.0])
    lane = world.Lane([(0, 0), (-1, 0)])
    assert lane.headings[0] == pytest.approx(math.pi)


def test_stop_zone_extents_positive():
    with pytest.raises(ValueError):
        world.StopZone((0, 0), (0.0, 1.0))


def test_scene_dt_positive():
    with pytest.raises(ValueError):
        world.WorldScene(world.MapModel(), (), 0.0)
