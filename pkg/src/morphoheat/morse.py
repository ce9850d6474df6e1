"""Critical points of phi on the space-time zero level and their classification."""
import logging
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .errors import ArgumentError

log = logging.getLogger(__name__)

TOL_EIG = 1e-6
TOL_T = 1e-8

# (dim, number of negative Hessian eigenvalues) -> (label if phi_t > 0, label if phi_t < 0)
_LABELS = {
    (2, 0): ("IslandVanish", "IslandCreate"),
    (2, 1): ("Split", "Merge"),
    (2, 2): ("HoleCreate", "HoleVanish"),
    (3, 0): ("IslandVanish", "IslandCreate"),
    (3, 1): ("Split", "Merge"),
    (3, 2): ("HoleThroughCreate", "HoleThroughVanish"),
    (3, 3): ("VoidCreate", "VoidVanish"),
}

LABELS = sorted({lab for pair in _LABELS.values() for lab in pair} | {"Degenerate", "Stationary"})


@dataclass
class CriticalPoint:
    x: np.ndarray
    t: float
    grad_residual: float
    phi_residual: float
    spectrum: np.ndarray
    phi_t: float
    nondegenerate: bool
    scenario: str = ""

    @property
    def location(self):
        return (self.x, self.t)

    @property
    def residuals(self):
        return (self.grad_residual, self.phi_residual)


def is_nondegenerate(spectrum, tol_eig=TOL_EIG):
    lam = np.abs(np.asarray(spectrum, dtype=float))
    return bool(lam.min() > tol_eig * lam.max()) if lam.size and lam.max() > 0 else False


def classify(cp, dim):
    """Transition label from the Hessian inertia and the sign of phi_t."""
    if dim not in (2, 3):
        raise ArgumentError(f"classification is defined for dim 2 or 3, got {dim}")
    if not is_nondegenerate(cp.spectrum):
        return "Degenerate"
    if abs(cp.phi_t) < TOL_T:
        return "Stationary"
    n_neg = int(np.sum(np.asarray(cp.spectrum) < 0))
    up, down = _LABELS[(dim, n_neg)]
    return up if cp.phi_t > 0 else down


def _residual_system(field, z, dt_step):
    d = field.dim
    x, t = z[:, :d], z[:, d]
    g = field.grad(x, t)
    phi = field.eval(x, t)
    H = field.hess(x, t)
    pt = field.dphi_dt(x, t)
    # mixed derivative d/dt grad(phi) by central differences in time
    gt = (field.grad(x, t + dt_step) - field.grad(x, t - dt_step)) / (2 * dt_step)
    F = np.concatenate([g, phi[:, None]], axis=1)
    J = np.zeros((len(z), d + 1, d + 1))
    J[:, :d, :d] = H
    J[:, :d, d] = gt
    J[:, d, :d] = g
    J[:, d, d] = pt
    return F, J


def find_critical_points(field, box, grid_density=8, max_iter=50):
    """Newton on (grad phi, phi) = 0 seeded from local minima of |grad phi| + |phi|.

    Returns converged, deduplicated roots inside the box, sorted by location.
    """
    if grid_density < 8:
        raise ArgumentError("grid_density must be at least 8")
    d = field.dim
    a = float(box.a)
    t0, T = box.time_interval
    scale = max(1.0, a * a)
    tol_crit = 1e-8 * scale

    ax = np.linspace(-a, a, grid_density)
    at = np.linspace(t0, T, grid_density)
    mesh = np.meshgrid(*([ax] * d), at, indexing="ij")
    Z = np.stack([m.ravel() for m in mesh], axis=-1)
    r = np.linalg.norm(field.grad(Z[:, :d], Z[:, d]), axis=-1) + np.abs(field.eval(Z[:, :d], Z[:, d]))
    R = r.reshape(mesh[0].shape)

    # a root inside a cell lies within one cell diagonal of some node; bound
    # the residual there by a Lipschitz estimate taken from neighbor differences
    spacing = [ax[1] - ax[0]] * d + [at[1] - at[0]]
    lip = max(float(np.max(np.abs(np.diff(R, axis=k)))) / spacing[k] for k in range(d + 1))
    screen = lip * float(np.sqrt(np.sum(np.square(spacing)))) + tol_crit
    is_min = (R == ndimage.minimum_filter(R, size=3, mode="nearest")) & (R < screen)
    seeds = Z[is_min.ravel()]
    seed_r = r[is_min.ravel()]
    seeds = seeds[np.argsort(seed_r, kind="stable")]

    dt_step = 1e-6 * max(1.0, abs(T - t0))
    z = seeds.copy()
    alive = np.ones(len(z), dtype=bool)
    for _ in range(max_iter):
        if not alive.any():
            break
        F, J = _residual_system(field, z[alive], dt_step)
        cond = np.linalg.cond(J)
        bad = ~np.isfinite(cond) | (cond > 1e12)
        idx = np.flatnonzero(alive)
        if bad.any():
            for i in idx[bad]:
                log.debug("skipping seed %s: singular Jacobian", seeds[i])
            alive[idx[bad]] = False
            F, J, idx = F[~bad], J[~bad], idx[~bad]
        if idx.size == 0:
            break
        step = np.linalg.solve(J, F[..., None])[..., 0]
        z[idx] -= step
        done = np.linalg.norm(step, axis=-1) < 1e-14 * scale
        alive[idx[done]] = False
    finite = np.all(np.isfinite(z), axis=1)

    found = []
    lo = np.r_[np.full(d, -a), t0] - 1e-9 * scale
    hi = np.r_[np.full(d, a), T] + 1e-9 * scale
    for zi in z[finite]:
        if np.any(zi < lo) or np.any(zi > hi):
            continue
        x, t = zi[:d], zi[d]
        gr = float(np.linalg.norm(field.grad(x, t)))
        ph = float(abs(field.eval(x, t)))
        if gr >= tol_crit or ph >= tol_crit:
            continue
        if any(np.linalg.norm(zi - np.r_[c.x, c.t]) <= 10 * tol_crit for c in found):
            continue
        spec = np.sort(np.linalg.eigvalsh(field.hess(x, t)))
        cp = CriticalPoint(x.copy(), float(t), gr, ph, spec, float(field.dphi_dt(x, t)),
                           is_nondegenerate(spec))
        if d in (2, 3):
            cp.scenario = classify(cp, d)
        found.append(cp)
    found.sort(key=lambda c: tuple(np.r_[c.x, c.t]))
    return found
