"""Space-time level-set fields phi(x, t) and the normal-form scenario catalog.

All evaluators are vectorized: points have shape (..., dim) and times
broadcast against points.shape[:-1].
"""
from dataclasses import dataclass, field as dc_field
from typing import Callable, Optional

import numpy as np

from .errors import ArgumentError, DegeneratePointError

TOL_GRAD = 1e-8


def tol_surface(x):
    x = np.asarray(x, dtype=float)
    return 1e-8 * (1.0 + np.sum(x * x, axis=-1))


@dataclass(frozen=True)
class LevelSetField:
    """A smooth level-set function with its first and second spatial derivatives.

    ``kind`` is "normal_form", "windowed_normal_form" or "analytic".  ``q`` and
    ``s`` are set for the normal-form kinds.  ``fd_fallback`` flags fields
    whose derivatives come from finite differences.
    """

    dim: int
    time_interval: tuple
    eval: Callable
    grad: Callable
    hess: Callable
    dphi_dt: Callable
    kind: str = "analytic"
    q: Optional[int] = None
    s: Optional[int] = None
    fd_fallback: bool = False
    box: Optional[float] = None
    window: Optional[float] = None
    name: str = ""
    meta: dict = dc_field(default_factory=dict, compare=False)

    def __call__(self, x, t):
        return self.eval(x, t)

    @property
    def scale(self):
        a = 1.0 if self.box is None else self.box
        return max(1.0, a * a)


def _pts(x, dim):
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != dim:
        raise ArgumentError(f"points must have trailing dimension {dim}, got {x.shape}")
    return x


def _signs(dim, q):
    sg = np.ones(dim)
    sg[:q] = -1.0
    return sg


def make_normal_form(dim, q, s, time_interval=(-1.0, 1.0)):
    """Exact quadratic field -sum_{i<=q} x_i^2 + sum_{i>q} x_i^2 + s t."""
    if dim not in (2, 3):
        raise ArgumentError(f"normal forms need dim 2 or 3, got {dim}")
    if not (0 <= q <= dim) or int(q) != q:
        raise ArgumentError(f"q must be an integer in [0, {dim}], got {q}")
    if s not in (1, -1):
        raise ArgumentError(f"s must be +1 or -1, got {s}")
    sg = _signs(dim, q)
    s = float(s)

    def ev(x, t):
        x = _pts(x, dim)
        return np.sum(sg * x * x, axis=-1) + s * np.asarray(t, dtype=float)

    def gr(x, t):
        x = _pts(x, dim)
        g = 2.0 * sg * x
        return np.broadcast_to(g, np.broadcast_shapes(g.shape, np.shape(t) + (dim,))).copy()

    def he(x, t):
        x = _pts(x, dim)
        shape = np.broadcast_shapes(x.shape[:-1], np.shape(t))
        return np.broadcast_to(np.diag(2.0 * sg), shape + (dim, dim)).copy()

    def dt(x, t):
        x = _pts(x, dim)
        shape = np.broadcast_shapes(x.shape[:-1], np.shape(t))
        return np.full(shape, s)

    return LevelSetField(dim, tuple(time_interval), ev, gr, he, dt,
                         kind="normal_form", q=int(q), s=int(s))


def _fd_grad(ev, dim, step):
    def gr(x, t):
        x = np.asarray(x, dtype=float)
        out = []
        for i in range(dim):
            e = np.zeros(dim)
            e[i] = step
            out.append((ev(x + e, t) - ev(x - e, t)) / (2 * step))
        return np.stack(out, axis=-1)
    return gr


def _fd_hess_from_grad(gr, dim, step):
    def he(x, t):
        x = np.asarray(x, dtype=float)
        cols = []
        for j in range(dim):
            e = np.zeros(dim)
            e[j] = step
            cols.append((gr(x + e, t) - gr(x - e, t)) / (2 * step))
        H = np.stack(cols, axis=-1)
        return 0.5 * (H + np.swapaxes(H, -1, -2))
    return he


def _fd_dt(ev, step):
    def dt(x, t):
        t = np.asarray(t, dtype=float)
        return (ev(x, t + step) - ev(x, t - step)) / (2 * step)
    return dt


def analytic_field(dim, eval, grad=None, hess=None, dphi_dt=None,
                   time_interval=(-1.0, 1.0), scale=1.0, box=None, name=""):
    """Wrap user callables into a field.

    Missing derivatives are replaced by central differences with step
    1e-5*scale; such fields carry ``fd_fallback=True``.
    """
    if dim not in (1, 2, 3):
        raise ArgumentError(f"dim must be 1, 2 or 3, got {dim}")
    step = 1e-5 * scale
    fd = grad is None or hess is None or dphi_dt is None
    if grad is None:
        grad = _fd_grad(eval, dim, step)
    if hess is None:
        hess = _fd_hess_from_grad(grad, dim, step)
    if dphi_dt is None:
        dphi_dt = _fd_dt(eval, step)
    return LevelSetField(dim, tuple(time_interval), eval, grad, hess, dphi_dt,
                         kind="analytic", fd_fallback=fd, box=box, name=name)


def field_from_expression(expr, dim, time_interval=(-1.0, 1.0), box=None):
    """Field from a sympy-parsable expression in x1..x<dim> and t.

    Derivatives are taken symbolically, so the result is exact.
    """
    import sympy as sp

    xs = sp.symbols(" ".join(f"x{i + 1}" for i in range(dim)))
    if dim == 1:
        xs = (xs,)
    t = sp.Symbol("t")
    try:
        e = sp.sympify(expr, locals={str(v): v for v in (*xs, t)})
    except (sp.SympifyError, SyntaxError, TypeError) as err:
        raise ArgumentError(f"cannot parse field expression {expr!r}: {err}") from None
    extra = e.free_symbols - set(xs) - {t}
    if extra:
        raise ArgumentError(f"unknown symbols in field expression: {sorted(map(str, extra))}")
    g = [sp.diff(e, v) for v in xs]
    H = [[sp.diff(gi, v) for v in xs] for gi in g]
    et = sp.diff(e, t)
    args = (*xs, t)
    f_e = sp.lambdify(args, e, "numpy")
    f_g = [sp.lambdify(args, gi, "numpy") for gi in g]
    f_h = [[sp.lambdify(args, hij, "numpy") for hij in row] for row in H]
    f_t = sp.lambdify(args, et, "numpy")

    def call(f, x, tt):
        x = _pts(x, dim)
        shape = np.broadcast_shapes(x.shape[:-1], np.shape(tt))
        cols = [x[..., i] for i in range(dim)]
        return np.broadcast_to(np.asarray(f(*cols, np.asarray(tt, dtype=float)), dtype=float),
                               shape).copy()

    def ev(x, tt):
        return call(f_e, x, tt)

    def gr(x, tt):
        return np.stack([call(f, x, tt) for f in f_g], axis=-1)

    def he(x, tt):
        return np.stack([np.stack([call(f, x, tt) for f in row], axis=-1) for row in f_h], axis=-2)

    def dt(x, tt):
        return call(f_t, x, tt)

    return LevelSetField(dim, tuple(time_interval), ev, gr, he, dt, kind="analytic",
                         box=box, name=str(expr), meta={"expression": str(expr)})


def linear_chart(field, A):
    """Pull back a field through the linear map x -> A x (spatial only)."""
    A = np.asarray(A, dtype=float)
    d = field.dim
    if A.shape != (d, d):
        raise ArgumentError(f"chart matrix must be {d}x{d}")

    def ev(x, t):
        return field.eval(np.asarray(x, dtype=float) @ A.T, t)

    def gr(x, t):
        return field.grad(np.asarray(x, dtype=float) @ A.T, t) @ A

    def he(x, t):
        H = field.hess(np.asarray(x, dtype=float) @ A.T, t)
        return np.einsum("ki,...kl,lj->...ij", A, H, A)

    def dt(x, t):
        return field.dphi_dt(np.asarray(x, dtype=float) @ A.T, t)

    return LevelSetField(d, field.time_interval, ev, gr, he, dt, kind="analytic",
                         fd_fallback=field.fd_fallback, box=field.box,
                         name=f"{field.name}@chart")


def windowed(field, r0):
    """max(phi, |x|^2 - r0^2): bounds the subzero set inside the ball of radius r0."""
    d = field.dim

    def ev(x, t):
        x = _pts(x, d)
        return np.maximum(field.eval(x, t), np.sum(x * x, axis=-1) - r0 * r0)

    def _use_base(x, t):
        x = _pts(x, d)
        return field.eval(x, t) >= np.sum(x * x, axis=-1) - r0 * r0

    def gr(x, t):
        x = _pts(x, d)
        base = _use_base(x, t)
        g = field.grad(x, t)
        return np.where(base[..., None], g, 2.0 * x)

    def he(x, t):
        x = _pts(x, d)
        base = _use_base(x, t)
        H = field.hess(x, t)
        return np.where(base[..., None, None], H, 2.0 * np.eye(d))

    def dt(x, t):
        x = _pts(x, d)
        base = _use_base(x, t)
        return np.where(base, field.dphi_dt(x, t), 0.0)

    return LevelSetField(d, field.time_interval, ev, gr, he, dt,
                         kind="windowed_normal_form" if field.kind == "normal_form" else field.kind,
                         q=field.q, s=field.s, fd_fallback=field.fd_fallback,
                         box=field.box, window=r0, name=field.name)


# name -> (dim, q, s, label)
SCENARIOS = {
    "island2d-create": (2, 0, -1, "IslandCreate"),
    "island2d-vanish": (2, 0, 1, "IslandVanish"),
    "split2d": (2, 1, 1, "Split"),
    "merge2d": (2, 1, -1, "Merge"),
    "hole2d-create": (2, 2, 1, "HoleCreate"),
    "hole2d-vanish": (2, 2, -1, "HoleVanish"),
    "island3d-create": (3, 0, -1, "IslandCreate"),
    "island3d-vanish": (3, 0, 1, "IslandVanish"),
    "split3d": (3, 1, 1, "Split"),
    "merge3d": (3, 1, -1, "Merge"),
    "holethrough3d-create": (3, 2, 1, "HoleThroughCreate"),
    "holethrough3d-vanish": (3, 2, -1, "HoleThroughVanish"),
    "void3d-create": (3, 3, 1, "VoidCreate"),
    "void3d-vanish": (3, 3, -1, "VoidVanish"),
}

# The r0 = 0.8a window turns the split/hole pieces into islands that vanish
# at |t| = r0^2 = 0.64 a^2, so the catalog stays inside |t| <= a^2/2.
HALF_SPAN = 0.5


def scenario_time_interval(name, a=1.0):
    dim, q, s, _ = SCENARIOS[name]
    T = HALF_SPAN * a * a
    if q == 0:
        return (0.0, T) if s < 0 else (-T, 0.0)
    return (-T, T)


def scenario(name, a=1.0):
    """Catalog field for a named transition, sized for the box [-a, a]^dim.

    Islands are the bare normal form (bounded already); every other entry is
    windowed to the ball of radius 0.8a.
    """
    if name not in SCENARIOS:
        raise ArgumentError(f"unknown scenario {name!r}; known: {', '.join(SCENARIOS)}")
    dim, q, s, _ = SCENARIOS[name]
    base = make_normal_form(dim, q, s, scenario_time_interval(name, a))
    base = LevelSetField(base.dim, base.time_interval, base.eval, base.grad, base.hess,
                         base.dphi_dt, kind=base.kind, q=q, s=s, box=float(a), name=name)
    if q == 0:
        return base
    return windowed(base, 0.8 * a)


def expected_label(name):
    return SCENARIOS[name][3]


@dataclass
class DerivativeReport:
    grad_error: float
    dphi_dt_error: float
    hess_error: float
    hess_asymmetry: float
    fd_fallback: bool

    @property
    def max_error(self):
        return max(self.grad_error, self.dphi_dt_error, self.hess_error)


def check_derivative_consistency(field, samples, step=1e-4):
    """Compare grad, dphi_dt and hess with central differences of eval.

    ``samples`` is a sequence of (point, time) pairs.  Errors are relative,
    |provided - fd| / max(|fd|, 1), maximized over samples and components.
    """
    d = field.dim
    X = np.array([np.asarray(p, dtype=float).reshape(d) for p, _ in samples])
    T = np.array([float(t) for _, t in samples])
    ev = field.eval
    E = np.eye(d) * step
    fd_g = np.stack([(ev(X + E[i], T) - ev(X - E[i], T)) / (2 * step) for i in range(d)], axis=-1)
    fd_t = (ev(X, T + step) - ev(X, T - step)) / (2 * step)
    f0 = ev(X, T)
    fd_h = np.empty((len(X), d, d))
    for i in range(d):
        for j in range(d):
            if i == j:
                fd_h[:, i, i] = (ev(X + E[i], T) - 2 * f0 + ev(X - E[i], T)) / step ** 2
            else:
                fd_h[:, i, j] = (ev(X + E[i] + E[j], T) - ev(X + E[i] - E[j], T)
                                 - ev(X - E[i] + E[j], T) + ev(X - E[i] - E[j], T)) / (4 * step ** 2)

    def rel(a, b):
        return float(np.max(np.abs(a - b) / np.maximum(np.abs(b), 1.0))) if len(X) else 0.0

    H = field.hess(X, T)
    asym = float(np.max(np.abs(H - np.swapaxes(H, -1, -2)))) if len(X) else 0.0
    return DerivativeReport(rel(field.grad(X, T), fd_g), rel(field.dphi_dt(X, T), fd_t),
                            rel(H, fd_h), asym, field.fd_fallback)


def normal_velocity(field, x, t):
    """Boundary normal velocity -phi_t grad(phi) / |grad(phi)|^2 at a boundary point."""
    x = _pts(x, field.dim)
    if x.ndim != 1:
        raise ArgumentError("normal_velocity takes a single point")
    phi = float(field.eval(x, t))
    if abs(phi) >= tol_surface(x):
        raise ArgumentError(f"point is not on the boundary (phi = {phi:.3e})")
    g = field.grad(x, t)
    gn2 = float(g @ g)
    if np.sqrt(gn2) <= TOL_GRAD:
        raise DegeneratePointError("gradient vanishes: normal velocity is unbounded here")
    return -float(field.dphi_dt(x, t)) * g / gn2


@dataclass(frozen=True)
class SpaceTimeBox:
    a: float
    time_interval: tuple

    def face_minimum(self, field, n_times=9, n_per_axis=33):
        """Minimum of phi over sampled points on the box faces at sampled times."""
        d = field.dim
        ax = np.linspace(-self.a, self.a, n_per_axis)
        pts = []
        for k in range(d):
            for side in (-self.a, self.a):
                grids = np.meshgrid(*([ax] * (d - 1)), indexing="ij") if d > 1 else []
                cols = [g.ravel() for g in grids]
                m = cols[0].size if cols else 1
                cols.insert(k, np.full(m, side))
                pts.append(np.stack(cols, axis=-1))
        P = np.concatenate(pts)
        ts = np.linspace(*self.time_interval, n_times)
        return float(min(np.min(field.eval(P, t)) for t in ts))

    def contains(self, field, **kw):
        return self.face_minimum(field, **kw) >= 0.0
