import numpy as np
import pytest
import scipy.sparse as sp
from scipy.linalg import eigh
from scipy.special import jn_zeros

from morphoheat.acceptance import shrinking_disk, static_disk, static_square
from morphoheat.errors import ArgumentError, ConvergenceError, EmptyDomainError
from morphoheat.geometry import BackgroundGrid, build_slice
from morphoheat.inequalities import (hardy_constant, hardy_forms, largest_generalized_eigenvalue,
                                     poincare_constant, smallest_eigenvalue, trace_constant, trace_forms)
from morphoheat.levelset import field_from_expression, scenario


def test_smallest_eigenvalue_of_1d_laplacian():
    n = 50
    L = sp.diags([-np.ones(n - 1), 2 * np.ones(n), -np.ones(n - 1)], [-1, 0, 1]) * (n + 1) ** 2
    lam, vec, it = smallest_eigenvalue(L)
    exact = 4 * (n + 1) ** 2 * np.sin(np.pi / (2 * (n + 1))) ** 2
    assert lam == pytest.approx(exact, rel=1e-10)


def test_smallest_eigenvalue_reports_stagnation():
    # two nearly equal smallest eigenvalues with a start vector weighted toward the wrong one
    L = sp.diags([1.0, 1.0 + 1e-9, 5.0])
    with pytest.raises(ConvergenceError):
        smallest_eigenvalue(L, max_iter=3, tol=1e-14)


def test_generalized_eigenvalue_matches_dense_solver():
    rng = np.random.default_rng(3)
    X = rng.standard_normal((30, 30))
    A = X @ X.T + 30 * np.eye(30)
    Y = rng.standard_normal((30, 5))
    B = Y @ Y.T
    mu, _, _ = largest_generalized_eigenvalue(sp.csr_matrix(B), sp.csr_matrix(A), tol=1e-12)
    assert mu == pytest.approx(eigh(B, A, eigvals_only=True)[-1], rel=1e-8)


def test_poincare_disk_matches_bessel_zero():
    e = poincare_constant(static_disk(), BackgroundGrid(2, 1.25, 129), 0.0)
    assert e.value == pytest.approx(1 / jn_zeros(0, 1)[0], rel=1e-2)
    assert e.has_extremizer and e.quantity == "poincare" and e.value > 0


def test_poincare_square_matches_separable_oracle():
    e = poincare_constant(static_square(), BackgroundGrid(2, 1.25, 129), 0.0)
    assert e.value == pytest.approx(np.sqrt(2) / np.pi, rel=1e-2)


def test_poincare_domain_monotonicity():
    g = BackgroundGrid(2, 1.25, 129)
    small = poincare_constant(field_from_expression("x1**2 + x2**2 - 0.25 + 0*t", 2), g, 0.0)
    big = poincare_constant(field_from_expression("x1**2 + x2**2 - 1 + 0*t", 2), g, 0.0)
    assert small.value < big.value


def test_poincare_split_sweep_below_cube_bound():
    f = scenario("split2d")
    g = BackgroundGrid(2, 1.0, 65)
    for t in (-0.5, -0.25, -0.1, -0.01, 0.01, 0.1, 0.25, 0.5):
        assert poincare_constant(f, g, t).value <= np.sqrt(2)


def test_poincare_empty_slice():
    f = scenario("island2d-create")
    with pytest.raises(EmptyDomainError):
        poincare_constant(f, BackgroundGrid(2, 1.0, 33), 0.0)


def test_trace_constant_dominates_constant_function():
    f = static_disk()
    sl = build_slice(f, BackgroundGrid(2, 1.25, 129), 0.0)
    B, A = trace_forms(sl)
    one = np.ones(sl.n_active)
    ratio = (one @ (B @ one)) / (one @ (A @ one))
    assert ratio == pytest.approx(2.0, rel=1e-2)
    e = trace_constant(f, BackgroundGrid(2, 1.25, 129), 0.0)
    assert e.value >= ratio


def test_weighted_trace_uniform_unweighted_grows():
    f = shrinking_disk()
    g = BackgroundGrid(2, 0.6, 129)
    ts = (0.25, 0.0625, 0.01)
    w = [trace_constant(f, g, t, weighted=True).value for t in ts]
    u = [trace_constant(f, g, t, weighted=False).value for t in ts]
    assert max(w) / min(w) < 1.5
    assert np.all(np.diff(u) > 0) and u[-1] / u[0] > 2


def test_weighted_trace_needs_nonzero_time():
    sl = build_slice(static_disk(), BackgroundGrid(2, 1.25, 33), 0.0)
    with pytest.raises(ArgumentError):
        trace_forms(sl, weighted=True)


def test_hardy_classical_constant_increases_toward_four():
    vals = [hardy_constant(0, 1, 0, n).value for n in (256, 1024, 4096)]
    assert np.all(np.diff(vals) > 0)
    assert 3.0 <= vals[-1] <= 4.0


def test_hardy_forms_against_dense_quadrature():
    # independent oracle: weighted mass by adaptive quadrature on each hat pair
    from scipy.integrate import quad
    a, b, p, n = 0.2, 1.0, 1.5, 64
    B, _ = hardy_forms(a, b, p, n)
    x = np.linspace(a, b, n + 1)
    h = x[1] - x[0]

    def hat(i, y):
        return max(0.0, 1 - abs(y - x[i]) / h)

    for i, j in ((0, 0), (5, 6), (n - 2, n - 1), (n - 1, n - 1)):
        lo, hi = x[max(min(i, j) - 1, 0)], x[max(i, j) + 1]
        ref = quad(lambda y: hat(i, y) * hat(j, y) * y ** p / (b - y) ** 2, lo, hi, limit=200,
                   points=[x[i], x[j]])[0]
        assert B[i, j] == pytest.approx(ref, rel=1e-8)


def test_hardy_uniform_in_left_endpoint():
    inner = hardy_constant(0.5, 1, 2, 2048).value
    full = hardy_constant(0.0, 1, 2, 4096).value
    assert inner <= full + 1e-8


def test_hardy_rescaling_invariance():
    a = hardy_constant(0.6, 3.0, 1.5, 512).value
    b = hardy_constant(0.2, 1.0, 1.5, 512).value
    assert abs(a - b) < 1e-10


@pytest.mark.parametrize("args", [(1, 1, 0, 64), (-0.1, 1, 0, 64), (0, 1, -1, 64), (0, 1, 0, 63)])
def test_hardy_argument_errors(args):
    with pytest.raises(ArgumentError):
        hardy_constant(*args)
