import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from morphoheat.errors import ArgumentError
from morphoheat.geometry import BackgroundGrid, build_slice, count_holes
from morphoheat.levelset import (SCENARIOS, SpaceTimeBox, expected_label, field_from_expression,
                                 linear_chart, make_normal_form, scenario)
from morphoheat.morse import CriticalPoint, classify, find_critical_points, is_nondegenerate


def _cp(spectrum, phi_t):
    return CriticalPoint(np.zeros(len(spectrum)), 0.0, 0.0, 0.0, np.array(spectrum, float), phi_t,
                         is_nondegenerate(spectrum))


@pytest.mark.parametrize("spectrum,phi_t,dim,label", [
    ((-2, 2), 1, 2, "Split"),
    ((2, 2, 2), -1, 3, "IslandCreate"),
    ((-2, -2, 2), 1, 3, "HoleThroughCreate"),
    ((2, 2), 1, 2, "IslandVanish"),
    ((-2, -2), -1, 2, "HoleVanish"),
    ((-2, -2, -2), 1, 3, "VoidCreate"),
    ((-2, 2, 2), -1, 3, "Merge"),
])
def test_classify_table(spectrum, phi_t, dim, label):
    assert classify(_cp(spectrum, phi_t), dim) == label


def test_classify_degenerate_and_stationary():
    assert classify(_cp((0.0, 2.0), 1.0), 2) == "Degenerate"
    assert classify(_cp((-2.0, 2.0), 1e-12), 2) == "Stationary"
    with pytest.raises(ArgumentError):
        classify(_cp((2.0,), 1.0), 1)


@pytest.mark.parametrize("name", list(SCENARIOS))
def test_catalog_round_trip(name):
    f = scenario(name)
    cps = find_critical_points(f, SpaceTimeBox(1.0, f.time_interval))
    assert len(cps) == 1
    cp = cps[0]
    assert np.linalg.norm(np.r_[cp.x, cp.t]) < 1e-6
    assert cp.scenario == expected_label(name)
    assert cp.grad_residual < 1e-8 and cp.phi_residual < 1e-8
    assert np.all(np.diff(cp.spectrum) >= 0)


def test_unbounded_saddle_on_full_interval():
    cps = find_critical_points(make_normal_form(2, 1, 1), SpaceTimeBox(1.0, (-1.0, 1.0)))
    assert len(cps) == 1 and cps[0].scenario == "Split"


def test_no_critical_point_on_static_circle():
    f = field_from_expression("x1**2 + x2**2 - 1 + 0*t", 2)
    assert find_critical_points(f, SpaceTimeBox(1.5, (-1.0, 1.0))) == []


def _brute_force_root(f):
    """Dense residual scan followed by bisection on the phi = 0 equation.

    grad = 0 gives x2 = 0 and -2 x1 + 0.3 x1^2 = 0, so x1 = 0 on the box;
    phi(0, 0, t) = t then vanishes at t = 0.  The scan confirms the root
    independently of Newton.
    """
    ax = np.linspace(-0.5, 0.5, 201)
    X1, X2, T = np.meshgrid(ax, ax, ax, indexing="ij")
    P = np.stack([X1, X2], -1)
    r = np.linalg.norm(f.grad(P, T), axis=-1) + np.abs(f.eval(P, T))
    i = np.unravel_index(np.argmin(r), r.shape)
    x = np.array([ax[i[0]], ax[i[1]]])
    lo, hi = ax[i[2]] - 0.01, ax[i[2]] + 0.01
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        if f.eval(x, lo) * f.eval(x, mid) <= 0:
            hi = mid
        else:
            lo = mid
    return x, 0.5 * (lo + hi)


def test_perturbed_saddle_matches_brute_force():
    f = field_from_expression("-x1**2 + x2**2 + t + 0.1*x1**3", 2)
    cps = find_critical_points(f, SpaceTimeBox(1.0, (-1.0, 1.0)))
    assert len(cps) == 1
    x, t = _brute_force_root(f)
    assert np.linalg.norm(cps[0].x - x) < 1e-6 and abs(cps[0].t - t) < 1e-6
    assert cps[0].scenario == "Split"


def test_two_critical_points_classified_independently():
    f = field_from_expression("(x1**2 - 0.25)**2 + x2**2 - 0.0625 + t", 2)
    cps = find_critical_points(f, SpaceTimeBox(1.0, (-0.5, 0.5)), grid_density=16)
    labels = sorted(c.scenario for c in cps)
    assert "IslandVanish" in labels


def test_grid_density_floor():
    with pytest.raises(ArgumentError):
        find_critical_points(make_normal_form(2, 1, 1), SpaceTimeBox(1.0, (-1, 1)), grid_density=4)


@settings(max_examples=20, deadline=None)
@given(name=st.sampled_from(list(SCENARIOS)), seed=st.integers(0, 2 ** 32 - 1))
def test_label_invariant_under_linear_charts(name, seed):
    rng = np.random.default_rng(seed)
    f = scenario(name)
    d = f.dim
    Q1, _ = np.linalg.qr(rng.standard_normal((d, d)))
    Q2, _ = np.linalg.qr(rng.standard_normal((d, d)))
    A = Q1 @ np.diag(rng.uniform(0.5, 2.0, d)) @ Q2
    cps = find_critical_points(linear_chart(f, A), SpaceTimeBox(1.0, f.time_interval))
    assert [c.scenario for c in cps] == [expected_label(name)]


# components (2D) or holes across the transition, in the label's discrete meaning
_TRANSITIONS = {
    "island2d-create": ("components", 0, 1),
    "island2d-vanish": ("components", 1, 0),
    "split2d": ("components", 1, 2),
    "merge2d": ("components", 2, 1),
    "hole2d-create": ("holes", 0, 1),
    "hole2d-vanish": ("holes", 1, 0),
    "island3d-create": ("components", 0, 1),
    "island3d-vanish": ("components", 1, 0),
    "split3d": ("components", 1, 2),
    "merge3d": ("components", 2, 1),
}


@pytest.mark.parametrize("name", list(_TRANSITIONS))
def test_geometry_agrees_with_label(name):
    f = scenario(name)
    grid = BackgroundGrid(f.dim, 1.0, 65 if f.dim == 2 else 33)
    what, before, after = _TRANSITIONS[name]
    t0, T = f.time_interval
    counts = []
    for t in (max(t0, -0.25), min(T, 0.25)):
        sl = build_slice(f, grid, t)
        counts.append(sl.n_components if what == "components" else count_holes(sl))
    if name in ("island2d-create", "island3d-create"):
        # t = 0 is the creation time itself: at most a single boundary node
        assert build_slice(f, grid, 0.0).n_active <= 1
        counts[0] = 0
    if name in ("island2d-vanish", "island3d-vanish"):
        assert build_slice(f, grid, 0.0).n_active <= 1
        counts[1] = 0
    assert counts == [before, after]
