"""Best constants of the Poincare, trace and Hardy inequalities as extreme
eigenvalues of discrete generalized eigenproblems."""
from dataclasses import dataclass, field as dc_field
from typing import Optional

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu
from scipy.special import roots_jacobi, roots_legendre

from .errors import ArgumentError, ConvergenceError, EmptyDomainError
from .geometry import build_slice
from .stencils import dirichlet_laplacian, neumann_stiffness

TOL = 1e-8
MAX_ITER = 5000


@dataclass
class ConstantEstimate:
    quantity: str
    params: dict
    resolution: int
    value: float
    iterations: int
    extremizer: Optional[np.ndarray] = dc_field(default=None, repr=False)

    @property
    def has_extremizer(self):
        return self.extremizer is not None


def smallest_eigenvalue(L, tol=TOL, max_iter=MAX_ITER):
    """Inverse iteration for the eigenvalue of smallest modulus.

    Returns (lambda, eigenvector, iterations).  Converged when the relative
    eigen-residual drops below ``tol``.
    """
    n = L.shape[0]
    lu = splu(sp.csc_matrix(L))
    x = np.ones(n) / np.sqrt(n)
    lam = np.nan
    for it in range(1, max_iter + 1):
        y = lu.solve(x)
        lam = float(x @ x) / float(x @ y)
        x = y / np.linalg.norm(y)
        res = np.linalg.norm(L @ x - lam * x) / abs(lam)
        if res < tol:
            return lam, x, it
    raise ConvergenceError(f"inverse iteration stagnated (residual {res:.2e} after {max_iter} steps)")


def largest_generalized_eigenvalue(B, A, tol=TOL, max_iter=MAX_ITER, solve=None):
    """Power iteration on A^{-1} B for symmetric B >= 0 and SPD A.

    Stops when the Rayleigh quotient changes by less than ``tol`` relative.
    Returns (mu, vector, iterations).
    """
    n = A.shape[0]
    if solve is None:
        lu = splu(sp.csc_matrix(A))
        solve = lu.solve
    x = np.ones(n)
    x /= np.sqrt(x @ (A @ x))
    mu_old = None
    for it in range(1, max_iter + 1):
        y = solve(B @ x)
        Ay = A @ y
        nrm = np.sqrt(float(y @ Ay))
        if nrm == 0:
            return 0.0, x, it
        x = y / nrm
        mu = float(x @ (B @ x))
        if mu_old is not None and abs(mu - mu_old) <= tol * abs(mu):
            return mu, x, it
        mu_old = mu
    raise ConvergenceError(f"power iteration did not settle in {max_iter} steps")


def poincare_constant(field, grid, t, tol=TOL, max_iter=MAX_ITER):
    """C_P = lambda_min^{-1/2} of the Shortley-Weller Dirichlet Laplacian on Omega(t)."""
    sl = build_slice(field, grid, t)
    if sl.empty:
        raise EmptyDomainError(f"Omega({t}) is empty on this grid")
    L = dirichlet_laplacian(sl, "shortley-weller")
    lam, vec, it = smallest_eigenvalue(L, tol, max_iter)
    return ConstantEstimate("poincare", {"t": float(t)}, grid.n, lam ** -0.5, it, vec)


def trace_forms(sl, weighted=False):
    """(B, A): boundary mass and (optionally |t|-weighted) H^1 Gram matrix on active nodes."""
    m = sl.n_active
    dof = sl.dof_index()
    fn = dof[sl.facet_nodes]
    nv = fn.shape[1]
    # facet value = mean of the owning-node values at its vertices
    rows = np.repeat(np.arange(len(fn)), nv)
    P = sp.csr_matrix((np.full(fn.size, 1.0 / nv), (rows, fn.ravel())), shape=(len(fn), m))
    B = (P.T @ sp.diags(sl.facet_measures) @ P).tocsr()
    M = sp.diags(sl.weights[sl.active])
    K = neumann_stiffness(sl)
    if weighted:
        if sl.t == 0:
            raise ArgumentError("weighted trace form needs t != 0")
        w = abs(sl.t)
        A = w ** -0.5 * M + w ** 0.5 * K
    else:
        A = M + K
    return B, A.tocsr()


def trace_constant(field, grid, t, weighted=False, tol=TOL, max_iter=MAX_ITER):
    """Largest mu with ||u||^2_boundary = mu ||u||^2_A over the discrete space."""
    sl = build_slice(field, grid, t)
    if sl.empty or len(sl.facet_measures) == 0:
        raise EmptyDomainError(f"Omega({t}) has no boundary on this grid")
    B, A = trace_forms(sl, weighted)
    mu, vec, it = largest_generalized_eigenvalue(B, A, tol, max_iter)
    name = "trace_weighted" if weighted else "trace_plain"
    return ConstantEstimate(name, {"t": float(t)}, grid.n, mu, it, vec)


def _is_integer(p):
    return float(p).is_integer()


def hardy_forms(a, b, p, n, order=12):
    """Tridiagonal forms (B, A) for P1 elements on [a, b] with u(b) = 0.

    B is the Gram matrix of int u^2 x^p / (b - x)^2, A of int u'^2 x^p.
    Unknowns are the nodal values at x_0 = a, ..., x_{n-1}.
    """
    x = np.linspace(a, b, n + 1)
    h = x[1] - x[0]
    xl, xr = x[:-1], x[1:]
    # stiffness: int over cell of x^p, exactly
    wp = (xr ** (p + 1) - xl ** (p + 1)) / (p + 1) / h ** 2

    # weighted mass on regular cells 0..n-2: Gauss rule in the local coordinate
    z, wz = roots_legendre(order)
    s = 0.5 * (z + 1.0)
    ws = 0.5 * wz
    X = xl[:-1, None] + h * s[None, :]
    wgt = X ** p / (b - X) ** 2 * h * ws[None, :]
    phi_l = 1.0 - s
    phi_r = s
    m_ll = wgt @ (phi_l * phi_l)
    m_lr = wgt @ (phi_l * phi_r)
    m_rr = wgt @ (phi_r * phi_r)
    if a == 0 and p > 0 and not _is_integer(p):
        # x^p is not smooth at the origin: Gauss-Jacobi with the x^p weight on cell 0
        zj, wj = roots_jacobi(order, 0.0, float(p))
        sj = 0.5 * (zj + 1.0)
        wsj = wj * 0.5 ** (p + 1) * h ** (p + 1)
        Xj = h * sj
        g = wsj / (b - Xj) ** 2
        m_ll[0] = g @ ((1 - sj) ** 2)
        m_lr[0] = g @ ((1 - sj) * sj)
        m_rr[0] = g @ (sj * sj)
        wp[0] = h ** (p + 1) / (p + 1) / h ** 2
    # last cell: only the left basis function lives there and (b - x)^2 cancels
    last = (b ** (p + 1) - xl[-1] ** (p + 1)) / (p + 1) / h ** 2

    main_B = np.zeros(n)
    main_B[:-1] += m_ll
    main_B[1:] += m_rr
    main_B[-1] += last
    off_B = m_lr

    main_A = np.zeros(n)
    main_A[:] += wp[:n]
    main_A[1:] += wp[: n - 1]
    off_A = -wp[: n - 1]
    B = sp.diags([off_B, main_B, off_B], [-1, 0, 1], format="csr")
    A = sp.diags([off_A, main_A, off_A], [-1, 0, 1], format="csr")
    return B, A


def hardy_constant(a, b, p, n, tol=TOL, max_iter=MAX_ITER):
    """Discrete best constant of int (u/(b-x))^2 x^p <= C int u'^2 x^p, u(b) = 0."""
    if not (0 <= a < b):
        raise ArgumentError(f"need 0 <= a < b, got a={a}, b={b}")
    if p < 0:
        raise ArgumentError(f"need p >= 0, got {p}")
    if n < 64:
        raise ArgumentError(f"need n >= 64, got {n}")
    B, A = hardy_forms(float(a), float(b), float(p), int(n))
    mu, vec, it = largest_generalized_eigenvalue(B, A, tol, max_iter)
    return ConstantEstimate("hardy", {"a": float(a), "b": float(b), "p": float(p)}, int(n), mu, it, vec)
