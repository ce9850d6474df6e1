import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from morphoheat.errors import ArgumentError, DegeneratePointError
from morphoheat.levelset import (SCENARIOS, SpaceTimeBox, analytic_field, check_derivative_consistency,
                                 expected_label, field_from_expression, linear_chart, make_normal_form,
                                 normal_velocity, scenario, scenario_time_interval)


def test_split_normal_form_vanishes_at_one_one():
    f = make_normal_form(2, 1, 1)
    assert f.eval(np.array([1.0, 1.0]), 0.0) == 0.0
    assert f.eval(np.array([0.3, -0.2]), 0.5) == pytest.approx(-0.09 + 0.04 + 0.5)


def test_island_create_is_ball_of_radius_sqrt_t():
    f = make_normal_form(2, 0, -1)
    t = 0.36
    assert f.eval(np.array([0.6, 0.0]), t) == pytest.approx(0.0, abs=1e-15)
    assert f.eval(np.array([0.5, 0.0]), t) < 0 < f.eval(np.array([0.7, 0.0]), t)


def test_hole_through_normal_form_3d():
    f = make_normal_form(3, 2, 1)
    x = np.array([0.3, 0.4, 0.5])
    assert f.eval(x, 0.1) == pytest.approx(-0.09 - 0.16 + 0.25 + 0.1)


@pytest.mark.parametrize("dim,q,s", [(4, 0, 1), (2, 3, 1), (2, -1, 1), (2, 1, 0), (3, 1, 2)])
def test_make_normal_form_rejects_invalid(dim, q, s):
    with pytest.raises(ArgumentError):
        make_normal_form(dim, q, s)


@settings(max_examples=50, deadline=None)
@given(dim=st.sampled_from([2, 3]), data=st.data())
def test_normal_form_closed_forms(dim, data):
    q = data.draw(st.integers(0, dim))
    s = data.draw(st.sampled_from([-1, 1]))
    x = np.array(data.draw(st.lists(st.floats(-2, 2), min_size=dim, max_size=dim)))
    t = data.draw(st.floats(-1, 1))
    f = make_normal_form(dim, q, s)
    sg = np.r_[-np.ones(q), np.ones(dim - q)]
    assert f.eval(x, t) == pytest.approx(np.sum(sg * x * x) + s * t, abs=1e-14)
    np.testing.assert_allclose(f.grad(x, t), 2 * sg * x, atol=1e-14)
    np.testing.assert_array_equal(f.hess(x, t), np.diag(2 * sg))
    assert f.dphi_dt(x, t) == s


def _samples(dim, n=100, seed=0):
    rng = np.random.default_rng(seed)
    return [(rng.uniform(-1, 1, dim), rng.uniform(-1, 1)) for _ in range(n)]


def test_derivative_consistency_normal_form_exact():
    rep = check_derivative_consistency(make_normal_form(2, 1, 1), _samples(2))
    assert rep.max_error < 1e-7
    assert rep.hess_asymmetry == 0.0
    assert not rep.fd_fallback


def _sine_field(grad=None):
    def ev(x, t):
        return np.sin(x[..., 0]) + x[..., 1] ** 2 + t

    def gr(x, t):
        return np.stack([np.cos(x[..., 0]), 2 * x[..., 1]], -1) + 0 * np.asarray(t)[..., None]

    def he(x, t):
        H = np.zeros(np.broadcast_shapes(x.shape[:-1], np.shape(t)) + (2, 2))
        H[..., 0, 0] = -np.sin(x[..., 0])
        H[..., 1, 1] = 2.0
        return H

    def dt(x, t):
        return np.ones(np.broadcast_shapes(x.shape[:-1], np.shape(t)))

    return analytic_field(2, ev, grad or gr, he, dt)


def test_derivative_consistency_analytic_field():
    rep = check_derivative_consistency(_sine_field(), _samples(2))
    assert rep.max_error < 1e-6


def test_derivative_consistency_flags_wrong_gradient():
    bad = _sine_field(grad=lambda x, t: np.stack([np.sin(x[..., 0]), 2 * x[..., 1]], -1))
    assert check_derivative_consistency(bad, _samples(2)).grad_error > 1e-3


def test_fd_fallback_is_flagged_and_accurate():
    f = analytic_field(2, lambda x, t: np.sin(x[..., 0]) + x[..., 1] ** 2 + t)
    assert f.fd_fallback
    rep = check_derivative_consistency(f, _samples(2))
    assert rep.fd_fallback and rep.grad_error < 1e-6


def test_expression_field_matches_normal_form():
    e = field_from_expression("-x1**2 + x2**2 + t", 2)
    f = make_normal_form(2, 1, 1)
    rng = np.random.default_rng(1)
    X = rng.uniform(-1, 1, (20, 2))
    T = rng.uniform(-1, 1, 20)
    np.testing.assert_allclose(e.eval(X, T), f.eval(X, T), atol=1e-14)
    np.testing.assert_allclose(e.grad(X, T), f.grad(X, T), atol=1e-14)
    np.testing.assert_allclose(e.hess(X, T), f.hess(X, T), atol=1e-14)
    np.testing.assert_allclose(e.dphi_dt(X, T), f.dphi_dt(X, T), atol=1e-14)


def test_expression_field_rejects_unknown_symbols():
    with pytest.raises(ArgumentError):
        field_from_expression("x1 + y", 2)


def test_normal_velocity_growing_disk():
    f = field_from_expression("x1**2 + x2**2 - t", 2)
    np.testing.assert_allclose(normal_velocity(f, [1.0, 0.0], 1.0), [0.5, 0.0], atol=1e-15)


def test_normal_velocity_saddle():
    f = make_normal_form(2, 1, 1)
    np.testing.assert_allclose(normal_velocity(f, [1.0, 1.0], 0.0), [0.25, -0.25], atol=1e-15)


def test_normal_velocity_blows_up_near_critical_point():
    f = field_from_expression("x1**2 + x2**2 - t", 2)
    v = normal_velocity(f, [1e-4, 0.0], 1e-8)
    assert np.linalg.norm(v) == pytest.approx(5e3, rel=1e-10)


def test_normal_velocity_preconditions():
    f = make_normal_form(2, 1, 1)
    with pytest.raises(ArgumentError):
        normal_velocity(f, [0.5, 0.0], 0.0)
    with pytest.raises(DegeneratePointError):
        normal_velocity(f, [0.0, 0.0], 0.0)


@settings(max_examples=50, deadline=None)
@given(t=st.floats(1e-3, 1.0), angle=st.floats(0, 2 * np.pi))
def test_normal_velocity_speed_on_growing_disk(t, angle):
    f = make_normal_form(2, 0, -1)
    x = np.sqrt(t) * np.array([np.cos(angle), np.sin(angle)])
    v = normal_velocity(f, x, t)
    assert np.linalg.norm(v) == pytest.approx(1 / (2 * np.sqrt(t)), rel=1e-10)
    g = f.grad(x, t)
    cos = v @ g / (np.linalg.norm(v) * np.linalg.norm(g))
    assert abs(abs(cos) - 1) < 1e-12


@pytest.mark.parametrize("name", list(SCENARIOS))
def test_catalog_fields_stay_inside_the_box(name):
    f = scenario(name, 1.0)
    assert SpaceTimeBox(1.0, f.time_interval).contains(f)
    assert f.time_interval == scenario_time_interval(name, 1.0)
    assert expected_label(name) == SCENARIOS[name][3]


def test_raw_saddle_is_not_contained():
    assert not SpaceTimeBox(1.0, (-0.5, 0.5)).contains(make_normal_form(2, 1, 1))


def test_unknown_scenario():
    with pytest.raises(ArgumentError):
        scenario("island4d")


def test_linear_chart_pullback():
    f = make_normal_form(2, 1, 1)
    A = np.array([[2.0, 1.0], [0.0, 1.0]])
    g = linear_chart(f, A)
    x = np.array([0.3, -0.4])
    assert g.eval(x, 0.2) == pytest.approx(f.eval(A @ x, 0.2))
    np.testing.assert_allclose(g.grad(x, 0.2), A.T @ f.grad(A @ x, 0.2))
    np.testing.assert_allclose(g.hess(x, 0.2), A.T @ f.hess(A @ x, 0.2) @ A)
