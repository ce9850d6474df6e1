import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.integrate import solve_ivp

from morphoheat.errors import ArgumentError, DegeneratePointError
from morphoheat.flowmap import Trajectory, advect, advect_batch, velocity_field, velocity_field_guarded
from morphoheat.levelset import SpaceTimeBox, field_from_expression, make_normal_form, normal_velocity, scenario
from morphoheat.morse import find_critical_points

GROWING_DISK = field_from_expression("x1**2 + x2**2 - t", 2, (0.0, 2.0))


def test_velocity_on_growing_disk():
    np.testing.assert_allclose(velocity_field(GROWING_DISK, [1.0, 0.0], 1.0), [0.5, 0.0], atol=1e-15)


def test_velocity_vanishes_at_interior_symmetry_point():
    np.testing.assert_array_equal(velocity_field(GROWING_DISK, [0.0, 0.0], 1.0), [0.0, 0.0])


def test_velocity_matches_normal_velocity_on_boundary():
    f = make_normal_form(2, 1, 1)
    v = velocity_field(f, np.array([1.0, 1.0]), 0.0)
    np.testing.assert_allclose(v, [0.25, -0.25], atol=1e-15)
    np.testing.assert_allclose(v, normal_velocity(f, [1.0, 1.0], 0.0), atol=1e-15)


def test_velocity_degenerate_at_critical_point():
    f = make_normal_form(2, 1, 1)
    with pytest.raises(DegeneratePointError):
        velocity_field(f, np.array([0.0, 0.0]), 0.0)
    np.testing.assert_array_equal(velocity_field_guarded(f, np.array([0.0, 0.0]), 0.0), [0.0, 0.0])


def test_advect_boundary_tracks_radius_sqrt_t():
    tr = advect(GROWING_DISK, [1.0, 0.0], 1.0, 0.25, 200)
    np.testing.assert_allclose(tr.points[-1], [0.5, 0.0], atol=1e-10)
    assert tr.max_drift < 1e-10
    assert not tr.truncated


def test_advect_interior_seed_is_fixed():
    tr = advect(GROWING_DISK, [0.0, 0.0], 1.0, 0.5, 50)
    np.testing.assert_array_equal(tr.points[-1], [0.0, 0.0])
    assert np.isnan(tr.max_drift)


def test_advect_rejects_degenerate_span():
    with pytest.raises(ArgumentError):
        advect(GROWING_DISK, [1.0, 0.0], 1.0, 1.0, 1)
    with pytest.raises(ArgumentError):
        advect(GROWING_DISK, [1.0, 0.0], 1.0, 0.5, 0)


def test_trajectory_length_invariant():
    with pytest.raises(ArgumentError):
        Trajectory(np.zeros(2), 0.0, 1.0, np.arange(3.0), np.zeros((2, 2)), 0.0)


def _reference_endpoint(field, y, t0, t1):
    sol = solve_ivp(lambda t, x: velocity_field(field, x, t), (t0, t1), y, method="DOP853",
                    rtol=1e-13, atol=1e-14)
    return sol.y[:, -1]


def test_rk4_observed_order():
    f = field_from_expression("x1**2 + 2*x2**2 - 1 + t*x1 - 0.5*t", 2, (0.0, 1.0))
    y = np.array([0.3, 0.4])
    ref = _reference_endpoint(f, y, 0.0, 0.8)
    errs = [np.linalg.norm(advect(f, y, 0.0, 0.8, n).points[-1] - ref) for n in (10, 20, 40)]
    orders = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    assert np.all(orders >= 3.8), orders


def test_boundary_drift_decreases_at_fourth_order():
    f = field_from_expression("x1**2 + 2*x2**2 - 1 + 0.5*t*x1", 2, (0.0, 1.0))
    angle = 0.7
    # put the seed on the t = 0 boundary x1^2 + 2 x2^2 = 1
    y = np.array([np.cos(angle), np.sin(angle) / np.sqrt(2)])
    drift = [advect(f, y, 0.0, 1.0, n).max_drift for n in (8, 16, 32)]
    orders = np.log2(np.array(drift[:-1]) / np.array(drift[1:]))
    assert np.all(orders >= 3.5), (drift, orders)


def test_truncation_near_critical_point():
    f = scenario("island2d-vanish")
    cps = find_critical_points(f, SpaceTimeBox(1.0, f.time_interval))
    # shrinking circle: the boundary point reaches the origin at t = 0
    t0 = -0.25
    tr = advect(f, [0.5, 0.0], t0, 0.0, 400, cps, guard=1e-2)
    assert tr.truncated
    assert np.linalg.norm(np.r_[tr.points[-1], tr.times[-1]]) < 1e-2 + 1e-12


@settings(max_examples=30, deadline=None)
@given(r=st.floats(0.0, 0.6), angle=st.floats(0, 2 * np.pi))
def test_interior_seeds_stay_interior(r, angle):
    # split2d away from t = 0: phi(y, -0.4) <= -0.1 keeps phi < 0 up to t = -0.05
    f = scenario("split2d")
    y = r * np.array([np.cos(angle), np.sin(angle)])
    if f.eval(y, -0.4) > -0.1:
        return
    t, P, last, stopped = advect_batch(f, y[None], -0.4, -0.05, 100)
    vals = np.array([f.eval(P[k, 0], t[k]) for k in range(len(t))])
    assert np.all(vals < 0)
