"""Smooth cut-off theta_eps = h(-phi/eps) that vanishes near the lateral
boundary, and the convergence studies built on it."""
from dataclasses import dataclass

import numpy as np
from scipy import integrate
from scipy.spatial import cKDTree

from .errors import ArgumentError
from .geometry import build_slice

XI_RANGE = (10.0, 1e6)
MIN_SLABS = 64


def smoothstep(z):
    """Quintic S(z) = 6z^5 - 15z^4 + 10z^3 clamped to [0, 1]."""
    z = np.clip(z, 0.0, 1.0)
    return z ** 3 * (10.0 - 15.0 * z + 6.0 * z * z)


def smoothstep_derivative(z):
    z = np.asarray(z, dtype=float)
    inside = (z > 0) & (z < 1)
    return np.where(inside, 30.0 * z * z * (1.0 - z) ** 2, 0.0)


@dataclass(frozen=True)
class CutoffProfile:
    """h(r) = S((r - 1)/2): zero on [0, 1], one on [3, inf), |h'| <= 15/16."""
    eps: float

    def __post_init__(self):
        if not self.eps > 0:
            raise ArgumentError(f"eps must be positive, got {self.eps}")

    @staticmethod
    def h(r):
        return smoothstep((np.asarray(r, dtype=float) - 1.0) / 2.0)

    @staticmethod
    def dh(r):
        return 0.5 * smoothstep_derivative((np.asarray(r, dtype=float) - 1.0) / 2.0)

    def theta_of_phi(self, phi):
        return self.h(-np.asarray(phi, dtype=float) / self.eps)

    def with_eps(self, eps):
        return CutoffProfile(eps)


def theta(field, profile, x, t):
    """theta_eps(x, t) = h(-phi(x, t)/eps), in [0, 1]."""
    return profile.theta_of_phi(field.eval(np.asarray(x, dtype=float), t))


def grad_theta(field, profile, x, t):
    """Spatial gradient h'(-phi/eps) * (-grad phi / eps)."""
    x = np.asarray(x, dtype=float)
    r = -field.eval(x, t) / profile.eps
    return (-profile.dh(r) / profile.eps)[..., None] * field.grad(x, t)


def _time_midpoints(field, n_slabs):
    t0, T = field.time_interval
    n_slabs = max(int(n_slabs), MIN_SLABS)
    dt = (T - t0) / n_slabs
    return t0 + dt * (np.arange(n_slabs) + 0.5), dt


def _nodal(u, pts, t):
    if callable(u):
        return np.asarray(u(pts, t), dtype=float) * np.ones(len(pts))
    return np.full(len(pts), float(u))


def support_distances(field, profile, grid, eps, t_samples):
    """(d_in, d_out): space-time distances from the cut-off supports to the
    sampled lateral boundary.

    d_in is the smallest distance from a node with theta > 0, d_out the
    largest from a domain node with theta < 1.  Either is nan when its point
    set is empty on the grid.
    """
    prof = profile.with_eps(eps)
    bnd, inner, outer, deep = [], [], [], []
    for t in np.atleast_1d(np.asarray(t_samples, dtype=float)):
        sl = build_slice(field, grid, t)
        if len(sl.facet_measures):
            v = sl.facet_vertices.reshape(-1, grid.dim)
            bnd.append(np.column_stack([v, np.full(len(v), t)]))
        pts = grid.points[sl.active]
        th = prof.theta_of_phi(sl.phi[sl.active])
        tt = np.full((len(pts), 1), t)
        Z = np.hstack([pts, tt])
        # any path from {theta = 1} to the boundary crosses the ring
        # 0 < theta < 1, so the ring alone decides d_in when it is sampled
        inner.append(Z[(th > 0) & (th < 1)])
        deep.append(Z[th >= 1])
        outer.append(Z[th < 1])
    if not bnd:
        return float("nan"), float("nan")
    tree = cKDTree(np.unique(np.concatenate(bnd), axis=0), balanced_tree=False, compact_nodes=False)
    inner = np.concatenate(inner)
    if len(inner) == 0:
        inner = np.concatenate(deep)
    outer = np.concatenate(outer)
    d_in = float(tree.query(inner)[0].min()) if len(inner) else float("nan")
    d_out = float(tree.query(outer)[0].max()) if len(outer) else float("nan")
    return d_in, d_out


def cutoff_study(field, profile, grid, u, eps_list, n_slabs=MIN_SLABS):
    """Both sweeps from one pass over the time slices.

    Returns (norms, masses): ||(grad theta_eps) u||_Q and the scaled strip
    mass eps^{-1} ||u||^2 over {0 < -phi < 3 eps}, one entry per eps.
    Space uses the cut-cell weights of each slice, time the midpoint rule
    over at least 64 slabs.  ``u`` is a callable (points, t) or a constant.
    """
    eps = np.asarray([float(e) for e in eps_list])
    times, dt = _time_midpoints(field, n_slabs)
    grad_acc = np.zeros(len(eps))
    mass_acc = np.zeros(len(eps))
    for t in times:
        sl = build_slice(field, grid, t)
        if sl.empty:
            continue
        pts = grid.points[sl.active]
        phi = sl.phi[sl.active]
        wu2 = sl.weights[sl.active] * _nodal(u, pts, t) ** 2
        g2 = np.sum(field.grad(pts, t) ** 2, axis=-1)
        r = -phi[None, :] / eps[:, None]
        dh = profile.dh(r)
        grad_acc += dt * (dh * dh * g2) @ wu2 / eps ** 2
        mass_acc += dt * (r < 3.0) @ wu2
    return list(np.sqrt(grad_acc)), list(mass_acc / eps)


def grad_theta_norm_sweep(field, profile, grid, u, eps_list, n_slabs=MIN_SLABS):
    """||(grad theta_eps) u||_Q for each eps; see cutoff_study."""
    return cutoff_study(field, profile, grid, u, eps_list, n_slabs)[0]


def small_strip_mass(field, grid, u, eps_list, n_slabs=MIN_SLABS):
    """eps^{-1} ||u||^2 over the strip {0 < -phi < 3 eps} where theta_eps < 1."""
    return cutoff_study(field, CutoffProfile(1.0), grid, u, eps_list, n_slabs)[1]


@dataclass
class CounterexampleRow:
    xi: float
    numerator: float
    denominator: float
    ratio: float


def _quad(f, lo, hi):
    val, _ = integrate.quad(f, lo, hi, epsabs=0.0, epsrel=1e-13, limit=200)
    return val


def hole_counterexample(xi_list):
    """Ratio of the cut-off gradient term to the H-norm for u = ln(r/sqrt(t))
    around a hole, in the rescaled radial variable y = r/sqrt(t).

    numerator   = 2 pi xi^-2 int_{sqrt(1+xi)}^{sqrt(1+3xi)} y^3 ln^2 y dy
    denominator = 2 pi int_1^{sqrt(1+3xi)} dy / y
    """
    xi_list = [float(x) for x in xi_list]
    if not xi_list:
        raise ArgumentError("xi list is empty")
    rows = []
    for xi in xi_list:
        if not (XI_RANGE[0] <= xi <= XI_RANGE[1]):
            raise ArgumentError(f"xi={xi} outside [{XI_RANGE[0]:g}, {XI_RANGE[1]:g}]")
        lo, hi = np.sqrt(1.0 + xi), np.sqrt(1.0 + 3.0 * xi)
        num = 2 * np.pi / xi ** 2 * _quad(lambda y: y ** 3 * np.log(y) ** 2, lo, hi)
        den = 2 * np.pi * _quad(lambda y: 1.0 / y, 1.0, hi)
        rows.append(CounterexampleRow(xi, num, den, num / den))
    return rows
