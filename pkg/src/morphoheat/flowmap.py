"""Flow map x_t = V(x, t) that carries the domain boundary along with phi."""
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import ArgumentError, DegeneratePointError
from .levelset import tol_surface


def _denominator_tol(field):
    return 1e-12 * field.scale ** 2


def velocity_field(field, x, t):
    """V = -phi_t grad(phi) / (|grad(phi)|^2 + phi^2), vectorized over points."""
    x = np.asarray(x, dtype=float)
    g = field.grad(x, t)
    phi = field.eval(x, t)
    den = np.sum(g * g, axis=-1) + phi * phi
    if np.any(den <= _denominator_tol(field)):
        raise DegeneratePointError("flow velocity is undefined at the critical point")
    return -(field.dphi_dt(x, t) / den)[..., None] * g


def velocity_field_guarded(field, x, t):
    """Same as velocity_field but returns 0 where the denominator degenerates."""
    x = np.asarray(x, dtype=float)
    g = field.grad(x, t)
    phi = field.eval(x, t)
    den = np.sum(g * g, axis=-1) + phi * phi
    ok = den > _denominator_tol(field)
    coef = np.where(ok, -field.dphi_dt(x, t) / np.where(ok, den, 1.0), 0.0)
    return coef[..., None] * g


@dataclass
class Trajectory:
    seed: np.ndarray
    t_start: float
    t_end: float
    times: np.ndarray
    points: np.ndarray
    max_drift: float
    truncated: bool = False

    def __post_init__(self):
        if len(self.times) != len(self.points):
            raise ArgumentError("times and points must have equal length")


def advect_batch(field, seeds, t_start, t_end, n_steps, critical_points=(), guard=1e-3):
    """Classical RK4 for many seeds at once.

    Returns (times, points, last, stopped): points has shape (n_steps+1, m, dim);
    ``last`` is the per-seed index of the last valid sample and ``stopped``
    flags seeds that came within ``guard`` of a critical point in space-time
    (they are frozen there).
    """
    if t_end == t_start:
        raise ArgumentError("t_end must differ from t_start")
    if n_steps < 1:
        raise ArgumentError("n_steps must be positive")
    Y = np.atleast_2d(np.asarray(seeds, dtype=float)).copy()
    dt = (t_end - t_start) / n_steps
    times = t_start + dt * np.arange(n_steps + 1)
    out = np.empty((n_steps + 1,) + Y.shape)
    out[0] = Y
    last = np.full(len(Y), n_steps)
    live = np.ones(len(Y), dtype=bool)
    cps = [np.r_[c.x, c.t] for c in critical_points]

    def near(P, t):
        if not cps:
            return np.zeros(len(P), dtype=bool)
        Z = np.concatenate([P, np.full((len(P), 1), t)], axis=1)
        return np.any([np.linalg.norm(Z - c, axis=1) < guard for c in cps], axis=0)

    hit = near(Y, times[0])
    last[hit] = 0
    stopped = hit.copy()
    live &= ~hit
    for k in range(n_steps):
        t = times[k]
        if live.any():
            P = Y[live]
            k1 = velocity_field(field, P, t)
            k2 = velocity_field(field, P + 0.5 * dt * k1, t + 0.5 * dt)
            k3 = velocity_field(field, P + 0.5 * dt * k2, t + 0.5 * dt)
            k4 = velocity_field(field, P + dt * k3, t + dt)
            Y[live] = P + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
            hit = np.zeros(len(Y), dtype=bool)
            hit[live] = near(Y[live], times[k + 1])
            last[hit] = k + 1
            stopped |= hit
            live &= ~hit
        out[k + 1] = Y
    return times, out, last, stopped


def advect(field, y, t_start, t_end, n_steps, critical_points=(), guard=1e-3):
    """Integrate one seed with RK4; see advect_batch."""
    y = np.asarray(y, dtype=float).reshape(field.dim)
    times, P, last, stopped = advect_batch(field, y[None], t_start, t_end, n_steps, critical_points, guard)
    m = int(last[0]) + 1
    times, pts = times[:m], P[:m, 0]
    on_boundary = abs(float(field.eval(y, t_start))) < tol_surface(y)
    drift = float(np.max(np.abs(field.eval(pts, times)))) if on_boundary else float("nan")
    return Trajectory(y, float(t_start), float(t_end), times, pts, drift, truncated=bool(stopped[0]))
