"""Backward-Euler fictitious-domain solver for u_t - div(grad u - u w) = f on
the evolving domain, with the discrete H, H^-1 and W norms built on the
same operators, and checks of Garding, inf-sup, continuity and the
integration-by-parts identity.

All discrete inner products use the lumped mass h^d on active nodes, so
energy identities hold exactly at the discrete level.
"""
import logging
from dataclasses import dataclass, field as dc_field
from typing import Callable, Optional

import numpy as np
import scipy.linalg as la
import scipy.sparse as sp
from scipy.sparse.linalg import LinearOperator, bicgstab, cg, splu
from scipy.spatial import cKDTree

from .errors import ArgumentError, ConvergenceError
from .flowmap import velocity_field_guarded
from .geometry import build_slice
from .stencils import dirichlet_laplacian, transfer, upwind_advection

log = logging.getLogger(__name__)

RTOL = 1e-10
MAX_UNKNOWNS = 4000


@dataclass
class BilinearFormSpec:
    """a(u, v) = (grad u, grad v)_Q - (u w, grad v)_Q; diffusion coefficient 1."""
    advection: Optional[Callable] = None
    name: str = "heat"

    @classmethod
    def heat(cls):
        return cls(None, "heat")

    @classmethod
    def domain_velocity(cls, field):
        """Advection by the boundary velocity of ``field`` (zero where undefined)."""
        return cls(lambda x, t: velocity_field_guarded(field, x, t), "advection")

    @property
    def has_advection(self):
        return self.advection is not None


@dataclass
class SpaceTimeSolution:
    field: object
    grid: object
    form: BilinearFormSpec
    times: np.ndarray
    slices: list
    values: list                 # per time level, active-node arrays; level 0 is the initial value
    carried: list                # carried[n] = previous level zero-extended onto slice n (None at n=0)
    stiffness: list              # K_n, SPD, level 0 included
    advection: list              # C_n or None
    source: list                 # f^n on active nodes (None at n=0)
    div: list = dc_field(default_factory=list)

    @property
    def n_slabs(self):
        return len(self.times) - 1

    @property
    def tau(self):
        return float(self.times[1] - self.times[0])

    @property
    def cell(self):
        return self.grid.h ** self.grid.dim

    def nodal(self, n):
        """Values of level n on the whole grid, zero off the domain."""
        out = np.zeros(self.grid.size)
        out[self.slices[n].active] = self.values[n]
        return out

    def norms(self):
        H = h_norm(self)
        D, F = riesz_dual_norms(self, time_differences(self), self.source)
        return {
            "L2_Q": l2_norm(self),
            "grad_Q": grad_norm(self),
            "H": H,
            "dual_ut": D,
            "W": float(np.hypot(H, D)),
            "f_dual": F,
            "slices": slice_norms(self),
        }


def _sample(fun, pts, t):
    if fun is None:
        return np.zeros(len(pts))
    if callable(fun):
        return np.asarray(fun(pts, t), dtype=float) * np.ones(len(pts))
    vals = np.asarray(fun, dtype=float)
    if vals.ndim == 0:
        return np.full(len(pts), float(vals))
    raise ArgumentError("expected a callable (points, t) or a constant")


def _time_levels(field, N_t):
    if N_t < 8:
        raise ArgumentError(f"need at least 8 slabs, got {N_t}")
    t0, T = field.time_interval
    return np.linspace(t0, T, N_t + 1)


def _discretize(field, grid, N_t, form, scheme):
    """Slices, operators and transfers for every time level."""
    times = _time_levels(field, N_t)
    slices, K, C, P, div = [], [], [], [], []
    for n, t in enumerate(times):
        sl = build_slice(field, grid, t)
        slices.append(sl)
        K.append(dirichlet_laplacian(sl, scheme) if sl.n_active else sp.csr_matrix((0, 0)))
        if form.has_advection and sl.n_active:
            c, d = upwind_advection(sl, form.advection)
        else:
            c, d = None, np.zeros(sl.n_active)
        C.append(c)
        div.append(d)
        P.append(transfer(slices[n - 1], sl) if n else None)
    return times, slices, K, C, P, div


def _linear_solve(A, b, x0, symmetric, slab):
    if len(b) == 0:
        return b.copy()
    d = A.diagonal()
    M = LinearOperator(A.shape, matvec=lambda r: r / d)
    if symmetric:
        x, info = cg(A, b, x0=x0, rtol=RTOL, atol=0.0, M=M, maxiter=20 * len(b) + 100)
    else:
        x, info = bicgstab(A, b, x0=x0, rtol=RTOL, atol=0.0, M=M, maxiter=20 * len(b) + 100)
    if info != 0:
        # one direct fallback before giving up
        try:
            x = splu(sp.csc_matrix(A)).solve(b)
        except RuntimeError as exc:
            raise ConvergenceError(f"linear solve failed on slab {slab}: {exc}") from exc
        if not np.all(np.isfinite(x)) or np.linalg.norm(A @ x - b) > 1e-8 * max(np.linalg.norm(b), 1e-300):
            raise ConvergenceError(f"linear solve failed on slab {slab} (info={info})")
    return x


def solve(field, grid, N_t, f=0.0, u0=None, form=None, scheme="symmetric"):
    """Backward Euler over N_t slabs of the field's time interval.

    At each level t_n solves (I/tau + K_n [+ C_n]) u^n = f^n + u_carried/tau,
    where u_carried is u^{n-1} zero-extended to the new active set.
    ``f`` is a callable (points, t) or a constant; ``u0`` a callable
    (points, t), a constant, or None (zero).  ``scheme`` selects the
    Dirichlet stencil ("symmetric" keeps the system SPD for CG).
    """
    form = form or BilinearFormSpec.heat()
    times, slices, K, C, P, div = _discretize(field, grid, N_t, form, scheme)
    tau = float(times[1] - times[0])
    pts = grid.points
    values = [_sample(u0, pts[slices[0].active], times[0])]
    carried, source = [None], [None]
    for n in range(1, len(times)):
        sl = slices[n]
        ubar = P[n] @ values[n - 1]
        fn = _sample(f, pts[sl.active], times[n])
        A = sp.identity(sl.n_active, format="csr") / tau + K[n]
        if C[n] is not None:
            A = A + C[n]
        u = _linear_solve(A.tocsr(), fn + ubar / tau, ubar, C[n] is None, n)
        values.append(u)
        carried.append(ubar)
        source.append(fn)
    return SpaceTimeSolution(field, grid, form, times, slices, values, carried, K, C, source, div)


def sample_field(field, grid, N_t, u, form=None, scheme="symmetric"):
    """A SpaceTimeSolution holding the samples of ``u`` (callable (points, t))
    at every time level instead of a computed solution; f is left at zero."""
    form = form or BilinearFormSpec.heat()
    times, slices, K, C, P, div = _discretize(field, grid, N_t, form, scheme)
    pts = grid.points
    values = [_sample(u, pts[sl.active], t) for sl, t in zip(slices, times)]
    carried = [None] + [P[n] @ values[n - 1] for n in range(1, len(times))]
    source = [None] + [np.zeros(sl.n_active) for sl in slices[1:]]
    return SpaceTimeSolution(field, grid, form, times, slices, values, carried, K, C, source, div)


# ---------------------------------------------------------------- norms

def l2_norm(sol):
    return float(np.sqrt(sol.tau * sol.cell * sum(float(u @ u) for u in sol.values[1:])))


def grad_norm(sol):
    return float(np.sqrt(sol.tau * sol.cell * sum(float(u @ (K @ u)) for u, K in
                                                 zip(sol.values[1:], sol.stiffness[1:]))))


def h_norm(sol):
    """sqrt(||u||_Q^2 + ||grad u||_Q^2) with the slab values at the right endpoints."""
    return float(np.hypot(l2_norm(sol), grad_norm(sol)))


def slice_norms(sol):
    """||u(t_n)||_{Omega(t_n)} for every time level, including the initial one."""
    return np.array([np.sqrt(sol.cell * float(u @ u)) for u in sol.values])


def riesz_dual_norms(sol, *densities):
    """Dual norms over H_0 of v -> sum_n tau h^d (g^n, v^n), one per list of
    per-slab densities g^n (indexed like sol.values, entry 0 ignored).

    The H-Gram matrix is block diagonal, tau h^d (I + K_n), so the Riesz
    representers are computed slab by slab, sharing one factorization.
    """
    totals = np.zeros(len(densities))
    for n in range(1, len(sol.times)):
        m = sol.slices[n].n_active
        if m == 0:
            continue
        gs = [(i, d[n]) for i, d in enumerate(densities) if d[n] is not None and np.any(d[n])]
        if not gs:
            continue
        lu = splu(sp.csc_matrix(sp.identity(m) + sol.stiffness[n]))
        for i, g in gs:
            totals[i] += sol.tau * sol.cell * float(g @ lu.solve(g))
    return tuple(float(np.sqrt(max(v, 0.0))) for v in totals)


def riesz_dual_norm(sol, densities):
    return riesz_dual_norms(sol, densities)[0]


def time_differences(sol):
    """(u^n - u_carried^{n-1}) / tau per slab."""
    return [None] + [(u - ub) / sol.tau for u, ub in zip(sol.values[1:], sol.carried[1:])]


def dual_norm_ut(sol):
    """||d_t u||_{H^-1} through the backward-difference pairing."""
    return riesz_dual_norm(sol, time_differences(sol))


def f_dual_norm(sol):
    return riesz_dual_norm(sol, sol.source)


def w_norm(sol):
    return float(np.hypot(h_norm(sol), dual_norm_ut(sol)))


def trace_in_time_ratio(sol):
    """max_n ||u(t_n)|| / ||u||_W (0 when u vanishes)."""
    W = w_norm(sol)
    m = float(slice_norms(sol).max())
    return 0.0 if W == 0 else m / W


# ---------------------------------------------------------------- checks

@dataclass
class AprioriLevel:
    n: int
    N_t: int
    w_norm: float
    f_dual: float
    ratio: float


def apriori_check(field, grid_levels, f, form=None, a=None, u0=None):
    """||u||_W / ||f||_{H^-1} for each (n, N_t) level; 0/0 is reported as 0."""
    from .geometry import BackgroundGrid
    if len(grid_levels) < 2:
        raise ArgumentError("need at least two refinement levels")
    a = float(a if a is not None else (field.box or 1.0))
    out = []
    for n, N_t in grid_levels:
        sol = solve(field, BackgroundGrid(field.dim, a, n), N_t, f, u0, form)
        D, F = riesz_dual_norms(sol, time_differences(sol), sol.source)
        W = float(np.hypot(h_norm(sol), D))
        ratio = 0.0 if W == 0 and F == 0 else W / F
        out.append(AprioriLevel(int(n), int(N_t), W, F, ratio))
    return out


@dataclass
class GardingResult:
    min_margin: float
    c0: float
    c1: float
    gamma: float
    margins: np.ndarray


def _weights(sol, gamma):
    return np.exp(-gamma * sol.times)


def garding_margins(sol, fields, gamma=0.0, c1=None):
    """a(u, g u) + c1 (u, g u)_Q - c0 ||u||_H^2 for each trial field.

    g(t) = exp(-gamma t), c0 = (2a^2 + 1)^-1 min g.  With advection, c1
    defaults to -1/2 min div_h(w) (clipped at 0), which makes the upwind
    term plus c1 (u, g u) nonnegative slab by slab.
    """
    g = _weights(sol, gamma)
    a = sol.grid.a
    c0 = 1.0 / (2 * a * a + 1.0) * float(g[1:].min())
    if c1 is None:
        mins = [float(d.min()) for d in sol.div[1:] if len(d)]
        c1 = max(0.0, -0.5 * min(mins)) if (sol.form.has_advection and mins) else 0.0
    w = sol.tau * sol.cell
    margins = []
    for u in fields:
        form_val = 0.0
        mass = 0.0
        grad = 0.0
        for n in range(1, len(sol.times)):
            x = u[n]
            if len(x) == 0:
                continue
            Kx = sol.stiffness[n] @ x
            ax = float(x @ Kx)
            if sol.advection[n] is not None:
                ax += float(x @ (sol.advection[n] @ x))
            form_val += w * g[n] * (ax + c1 * float(x @ x))
            mass += w * float(x @ x)
            grad += w * float(x @ Kx)
        margins.append(form_val - c0 * (mass + grad))
    return np.array(margins), c0, c1


def random_fields(sol, n_samples, rng, normalize=True):
    """Gaussian nodal fields on the active sets, scaled to ||u||_H = 1."""
    out = []
    for _ in range(n_samples):
        u = [np.zeros(0)] + [rng.standard_normal(sl.n_active) for sl in sol.slices[1:]]
        if normalize:
            nrm = np.sqrt(sol.tau * sol.cell * sum(float(x @ x + x @ (K @ x))
                                                   for x, K in zip(u[1:], sol.stiffness[1:])))
            if nrm > 0:
                u = [x / nrm for x in u]
        out.append(u)
    return out


def garding_check(field, grid, N_t, form=None, gamma=0.0, n_samples=200, seed=0, c1=None):
    """Minimum Garding margin over random discrete fields."""
    if gamma < 0:
        raise ArgumentError("gamma must be nonnegative")
    form = form or BilinearFormSpec.heat()
    sol = sample_field(field, grid, N_t, None, form)
    fields = random_fields(sol, n_samples, np.random.default_rng(seed))
    margins, c0, c1 = garding_margins(sol, fields, gamma, c1)
    return GardingResult(float(margins.min()), c0, c1, float(gamma), margins)


@dataclass
class InfSupResult:
    sigma_min: float
    sigma_max: float
    gamma_a: float
    n_unknowns: int

    @property
    def continuity_bound(self):
        return float(np.sqrt(1.0 + self.gamma_a ** 2))


def _block_offsets(sizes):
    return np.concatenate([[0], np.cumsum(sizes)])


def infsup_matrices(field, grid, N_t, form=None, scheme="symmetric", max_unknowns=MAX_UNKNOWNS):
    """Dense (B, A_a, A_H, A_W) on the trial space with zero initial value.

    B = D + A_a with D the backward-difference pairing h^d (u^n - P_n u^{n-1})
    and A_a = blockdiag(tau h^d (K_n + C_n)); A_H = blockdiag(tau h^d (I + K_n))
    and A_W = A_H + D^T A_H^-1 D.
    """
    form = form or BilinearFormSpec.heat()
    times, slices, K, C, P, _ = _discretize(field, grid, N_t, form, scheme)
    tau = float(times[1] - times[0])
    cell = grid.h ** grid.dim
    sizes = [sl.n_active for sl in slices[1:]]
    N = int(sum(sizes))
    if N > max_unknowns:
        raise ArgumentError(f"{N} space-time unknowns exceed the dense cap of {max_unknowns}")
    if N == 0:
        raise ArgumentError("no active space-time unknowns")
    off = _block_offsets(sizes)
    D = np.zeros((N, N))
    Aa = np.zeros((N, N))
    AH = np.zeros((N, N))
    for k, n in enumerate(range(1, len(times))):
        s = slice(off[k], off[k + 1])
        m = sizes[k]
        if m == 0:
            continue
        Kd = K[n].toarray()
        A = Kd + (C[n].toarray() if C[n] is not None else 0.0)
        Aa[s, s] = tau * cell * A
        AH[s, s] = tau * cell * (np.eye(m) + Kd)
        D[s, s] = cell * np.eye(m)
        if k > 0:
            D[s, off[k - 1]:off[k]] = -cell * P[n].toarray()
    B = D + Aa
    AW = AH + D.T @ la.cho_solve(la.cho_factor(AH), D)
    return B, Aa, AH, AW


def infsup_estimate(field, grid, N_t, form=None, scheme="symmetric", max_unknowns=MAX_UNKNOWNS):
    """Extreme singular values of B normalized by the W (trial) and H (test) norms.

    sigma_min is the discrete inf-sup constant; gamma_a is the exact
    continuity constant of a(., .) in the H norm, sigma_max(L_H^-1 A_a L_H^-T).
    """
    B, Aa, AH, AW = infsup_matrices(field, grid, N_t, form, scheme, max_unknowns)
    LH = la.cholesky(AH, lower=True)
    LW = la.cholesky(AW, lower=True)
    X = la.solve_triangular(LH, B, lower=True)
    X = la.solve_triangular(LW, X.T, lower=True).T
    s = la.svd(X, compute_uv=False)
    Y = la.solve_triangular(LH, Aa, lower=True)
    Y = la.solve_triangular(LH, Y.T, lower=True).T
    gamma = la.svd(Y, compute_uv=False)[0]
    return InfSupResult(float(s[-1]), float(s[0]), float(gamma), B.shape[0])


def partint_residual(sol_u, sol_v):
    """Residual of the discrete integration by parts identity

        <d_t u, v> + <d_t v, u> = (u, v)_{Omega(T)} - (u, v)_{Omega(t_0)}

    for two fields on the same discretization (backward-difference pairing)."""
    if len(sol_u.times) != len(sol_v.times) or not np.allclose(sol_u.times, sol_v.times):
        raise ArgumentError("u and v must share the time levels")
    du, dv = time_differences(sol_u), time_differences(sol_v)
    w = sol_u.tau * sol_u.cell
    lhs = sum(w * (float(du[n] @ sol_v.values[n]) + float(dv[n] @ sol_u.values[n]))
              for n in range(1, len(sol_u.times)))
    end = sol_u.cell * float(sol_u.values[-1] @ sol_v.values[-1])
    start = sol_u.cell * float(sol_u.values[0] @ sol_v.values[0])
    return abs(lhs - (end - start))


def continuity_weight_bound(field, grid, velocity, t_samples):
    """max over sampled domain nodes of dist(x, boundary(t)) * |w(x, t)|."""
    best = 0.0
    for t in np.atleast_1d(np.asarray(t_samples, dtype=float)):
        sl = build_slice(field, grid, t)
        if sl.empty or len(sl.facet_measures) == 0:
            continue
        tree = cKDTree(sl.facet_vertices.reshape(-1, grid.dim))
        X = grid.points[sl.active]
        d = tree.query(X)[0]
        wn = np.linalg.norm(np.asarray(velocity(X, t)), axis=-1)
        best = max(best, float(np.max(d * wn)))
    return best


def max_slice_jump(sol):
    """Largest change of ||u(t_n)|| between consecutive levels."""
    s = slice_norms(sol)
    return float(np.max(np.abs(np.diff(s)))) if len(s) > 1 else 0.0
