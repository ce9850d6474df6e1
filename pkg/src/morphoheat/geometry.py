"""Discrete slices Omega(t) = {phi(., t) < 0} on a uniform background grid.

Boundary crossings are located by 1D root finding along grid edges (and, in
3D, along the edges of a Kuhn tetrahedral split of each cube).  The same
roots feed the cut fractions, the boundary facets and the cut-cell volumes,
so all three are mutually consistent.
"""
from dataclasses import dataclass
from itertools import permutations

import numpy as np
from scipy import ndimage

from .errors import ArgumentError

THETA_MIN = 1e-3
_BISECT_ITERS = 34  # 2**-34 < 1e-10


class BackgroundGrid:
    """Uniform grid on [-a, a]^dim with n points per axis."""

    def __init__(self, dim, a, n, min_points=16):
        if dim not in (1, 2, 3):
            raise ArgumentError(f"dim must be 1, 2 or 3, got {dim}")
        if n < min_points:
            raise ArgumentError(f"need at least {min_points} points per axis, got {n}")
        if a <= 0:
            raise ArgumentError("half-width a must be positive")
        self.dim = int(dim)
        self.a = float(a)
        self.n = int(n)
        self.h = 2.0 * self.a / (self.n - 1)
        self.axis = np.linspace(-self.a, self.a, self.n)
        self.shape = (self.n,) * self.dim
        self.size = self.n ** self.dim
        self.strides = tuple(self.n ** (self.dim - 1 - k) for k in range(self.dim))
        self._points = None

    @property
    def points(self):
        if self._points is None:
            mesh = np.meshgrid(*([self.axis] * self.dim), indexing="ij")
            self._points = np.stack([m.ravel() for m in mesh], axis=-1)
        return self._points

    def index_along(self, k):
        """Grid index along axis k for every flat node index."""
        return (np.arange(self.size) // self.strides[k]) % self.n

    def __repr__(self):
        return f"BackgroundGrid(dim={self.dim}, a={self.a}, n={self.n})"


@dataclass
class DomainSlice:
    grid: BackgroundGrid
    t: float
    phi: np.ndarray
    active: np.ndarray
    theta: np.ndarray          # (dim, 2, N): cut fraction toward -/+ neighbor, nan if uncut
    facet_vertices: np.ndarray  # (m, dim, dim) (1D: (m, 1, 1))
    facet_nodes: np.ndarray     # (m, dim) active node owning each facet vertex
    facet_measures: np.ndarray  # (m,)
    weights: np.ndarray         # (N,) cut-cell quadrature weights, zero off the domain
    labels: np.ndarray          # (N,) component labels, 0 off the domain
    n_components: int
    scale: float

    @property
    def volume(self):
        return float(self.weights.sum())

    @property
    def area(self):
        return float(self.facet_measures.sum())

    @property
    def n_active(self):
        return int(self.active.sum())

    @property
    def empty(self):
        return not self.active.any()

    @property
    def active_nodes(self):
        return np.flatnonzero(self.active)

    def dof_index(self):
        """Map flat node index -> position in the active list (-1 if inactive)."""
        idx = np.full(self.grid.size, -1)
        idx[self.active] = np.arange(self.n_active)
        return idx

    def facet_centroids(self):
        return self.facet_vertices.mean(axis=1)


def segment_roots(field, t, p_in, p_out):
    """Fraction s in [0, 1] of the zero of phi on p_in + s (p_out - p_in).

    phi(p_in) < 0 <= phi(p_out) is assumed.  Bisection to 1e-10 relative,
    then one guarded Newton step.
    """
    m = len(p_in)
    if m == 0:
        return np.zeros(0)
    D = p_out - p_in
    lo = np.zeros(m)
    hi = np.ones(m)
    for _ in range(_BISECT_ITERS):
        mid = 0.5 * (lo + hi)
        inside = field.eval(p_in + mid[:, None] * D, t) < 0
        lo = np.where(inside, mid, lo)
        hi = np.where(inside, hi, mid)
    s = 0.5 * (lo + hi)
    P = p_in + s[:, None] * D
    v = field.eval(P, t)
    dv = np.sum(field.grad(P, t) * D, axis=-1)
    with np.errstate(divide="ignore", invalid="ignore"):
        sn = s - v / dv
    ok = np.isfinite(sn) & (sn >= lo) & (sn <= hi)
    if ok.any():
        vn = np.full(m, np.inf)
        vn[ok] = field.eval(p_in[ok] + sn[ok, None] * D[ok], t)
        better = ok & (np.abs(vn) <= np.abs(v))
        s = np.where(better, sn, s)
    return s


def _shoelace(P, valid):
    """Signed area of polygons given as fixed-length vertex lists with a validity mask.

    Invalid entries are replaced by the previous valid vertex (cyclically),
    which adds zero-length edges only.
    """
    m, L, _ = P.shape
    pos = np.where(valid, np.arange(L), -1)
    pos = np.maximum.accumulate(pos, axis=1)
    last = pos[:, -1:]
    pos = np.where(pos < 0, last, pos)
    Q = P[np.arange(m)[:, None], pos]
    x, y = Q[..., 0], Q[..., 1]
    return 0.5 * np.sum(x * np.roll(y, -1, axis=1) - np.roll(x, -1, axis=1) * y, axis=1)


def _tri_area(a, b, c):
    u, v = b - a, c - a
    return 0.5 * np.abs(u[:, 0] * v[:, 1] - u[:, 1] * v[:, 0])


def _tet_volume(a, b, c, d):
    return np.abs(np.einsum("ij,ij->i", b - a, np.cross(c - a, d - a))) / 6.0


def _distribute(weights, corner_nodes, corner_inside, cell_measure):
    cnt = corner_inside.sum(axis=1)
    share = np.where(cnt > 0, cell_measure / np.maximum(cnt, 1), 0.0)
    w = corner_inside * share[:, None]
    np.add.at(weights, corner_nodes.ravel(), w.ravel())


def _axis_edges(grid, active, k):
    """Lower/upper flat indices of all grid edges along axis k."""
    idx = np.arange(grid.size).reshape(grid.shape)
    sl0 = [slice(None)] * grid.dim
    sl1 = [slice(None)] * grid.dim
    sl0[k] = slice(0, -1)
    sl1[k] = slice(1, None)
    return idx[tuple(sl0)].ravel(), idx[tuple(sl1)].ravel()


def _cut_data(field, grid, t, active):
    """Edge roots along every axis, cut fractions and root positions."""
    N, d = grid.size, grid.dim
    X = grid.points
    theta = np.full((d, 2, N), np.nan)
    roots = []
    for k in range(d):
        i0, i1 = _axis_edges(grid, active, k)
        cross = active[i0] != active[i1]
        i0, i1 = i0[cross], i1[cross]
        lower_in = active[i0]
        nin = np.where(lower_in, i0, i1)
        nout = np.where(lower_in, i1, i0)
        s = segment_roots(field, t, X[nin], X[nout])
        pos = np.full((N, d), np.nan)
        pos[i0] = X[nin] + s[:, None] * (X[nout] - X[nin])
        owner = np.full(N, -1)
        owner[i0] = nin
        roots.append((pos, owner))
        th = np.clip(s, THETA_MIN, 1.0)
        theta[k, 1, nin[lower_in]] = th[lower_in]
        theta[k, 0, nin[~lower_in]] = th[~lower_in]
        ik = grid.index_along(k)
        theta[k, 0, active & (ik == 0)] = 1.0
        theta[k, 1, active & (ik == grid.n - 1)] = 1.0
    return theta, roots


def _slice_1d(grid, active, roots):
    h = grid.h
    pos, owner = roots[0]
    i0 = np.arange(grid.n - 1)
    i1 = i0 + 1
    inside = np.stack([active[i0], active[i1]], axis=1)
    cut = inside[:, 0] != inside[:, 1]
    length = np.where(inside.all(axis=1), h, 0.0)
    nin = np.where(inside[:, 0], i0, i1)
    s = np.abs(pos[i0, 0] - grid.axis[nin]) / h
    length = np.where(cut, s * h, length)
    weights = np.zeros(grid.size)
    _distribute(weights, np.stack([i0, i1], axis=1), inside, length)
    fv = pos[i0[cut]][:, None, :]
    fn = owner[i0[cut]][:, None]
    return weights, fv, fn, np.ones(int(cut.sum()))


def _slice_2d(grid, phi, active, roots):
    n, h = grid.n, grid.h
    X = grid.points
    (px, ox), (py, oy) = roots
    I = np.arange(grid.size).reshape(grid.shape)[:-1, :-1].ravel()
    c = np.stack([I, I + n, I + n + 1, I + 1], axis=1)  # counterclockwise corners
    s = active[c]
    cnt = s.sum(axis=1)
    weights = np.zeros(grid.size)
    full = cnt == 4
    _distribute(weights, c[full], s[full], np.full(int(full.sum()), h * h))
    cut = (cnt > 0) & (cnt < 4)
    c, s = c[cut], s[cut]
    m = len(c)
    # crossing points on edges e0 (c0-c1), e1 (c1-c2), e2 (c3-c2), e3 (c0-c3)
    E = np.stack([px[c[:, 0]], py[c[:, 1]], px[c[:, 3]], py[c[:, 0]]], axis=1)
    Eo = np.stack([ox[c[:, 0]], oy[c[:, 1]], ox[c[:, 3]], oy[c[:, 0]]], axis=1)
    ex = np.stack([s[:, 0] != s[:, 1], s[:, 1] != s[:, 2], s[:, 2] != s[:, 3], s[:, 3] != s[:, 0]], axis=1)
    V = X[c]
    P = np.empty((m, 8, 2))
    valid = np.empty((m, 8), dtype=bool)
    P[:, 0::2] = V
    P[:, 1::2] = np.nan_to_num(E)
    valid[:, 0::2] = s
    valid[:, 1::2] = ex
    area = np.abs(_shoelace(P, valid))

    code = s[:, 0] * 1 + s[:, 1] * 2 + s[:, 2] * 4 + s[:, 3] * 8
    saddle = (code == 5) | (code == 10)
    f = phi[c]
    den = f[:, 0] + f[:, 2] - f[:, 1] - f[:, 3]
    with np.errstate(divide="ignore", invalid="ignore"):
        fs = (f[:, 0] * f[:, 2] - f[:, 1] * f[:, 3]) / den
    connected = ~(np.isfinite(fs) & (fs >= 0))  # inside corners joined through the saddle
    sep5 = saddle & (code == 5) & ~connected
    sep10 = saddle & (code == 10) & ~connected
    if sep5.any():
        area[sep5] = (_tri_area(V[sep5, 0], E[sep5, 0], E[sep5, 3])
                      + _tri_area(V[sep5, 2], E[sep5, 2], E[sep5, 1]))
    if sep10.any():
        area[sep10] = (_tri_area(V[sep10, 1], E[sep10, 1], E[sep10, 0])
                       + _tri_area(V[sep10, 3], E[sep10, 3], E[sep10, 2]))
    _distribute(weights, c, s, area)

    # segments: plain cells join their two crossings; saddles pick a pairing
    plain = ~saddle
    order = np.argsort(~ex[plain], axis=1, kind="stable")[:, :2]
    rows = np.flatnonzero(plain)
    pairs = [(rows, order[:, 0], order[:, 1])]
    cut_v1 = saddle & (((code == 5) & connected) | ((code == 10) & ~connected))
    cut_v0 = saddle & ~cut_v1
    r1 = np.flatnonzero(cut_v1)
    r0 = np.flatnonzero(cut_v0)
    pairs += [(r1, np.full(r1.size, 0), np.full(r1.size, 1)), (r1, np.full(r1.size, 2), np.full(r1.size, 3)),
              (r0, np.full(r0.size, 3), np.full(r0.size, 0)), (r0, np.full(r0.size, 1), np.full(r0.size, 2))]
    rr = np.concatenate([p[0] for p in pairs])
    ea = np.concatenate([p[1] for p in pairs])
    eb = np.concatenate([p[2] for p in pairs])
    fv = np.stack([E[rr, ea], E[rr, eb]], axis=1)
    fn = np.stack([Eo[rr, ea], Eo[rr, eb]], axis=1)
    meas = np.linalg.norm(fv[:, 1] - fv[:, 0], axis=1)
    return weights, fv, fn, meas


_KUHN = [(0, 1 << p[0], (1 << p[0]) | (1 << p[1]), 7) for p in permutations(range(3))]


def _slice_3d(field, grid, t, active):
    n, h = grid.n, grid.h
    X = grid.points
    st = grid.strides
    I = np.arange(grid.size).reshape(grid.shape)[:-1, :-1, :-1].ravel()
    offs = np.array([(b & 1) * st[0] + ((b >> 1) & 1) * st[1] + ((b >> 2) & 1) * st[2] for b in range(8)])
    c = I[:, None] + offs[None, :]
    s = active[c]
    cnt = s.sum(axis=1)
    weights = np.zeros(grid.size)
    full = cnt == 8
    _distribute(weights, c[full], s[full], np.full(int(full.sum()), h ** 3))
    cut = (cnt > 0) & (cnt < 8)
    c, s = c[cut], s[cut]
    mc = len(c)
    cube_vol = np.zeros(mc)
    tv, tn = [], []

    # every edge of the Kuhn split joins corners b < b' with b a bit-subset of b';
    # solve each sign-changing edge once and look roots up by (inside, outside) key
    pairs = [(b, bb) for b in range(8) for bb in range(8) if b != bb and b & bb == b]
    ea = np.concatenate([c[:, b] for b, _ in pairs])
    eb = np.concatenate([c[:, bb] for _, bb in pairs])
    sa, sb = active[ea], active[eb]
    cross = sa != sb
    e_in = np.where(sa, ea, eb)[cross]
    e_out = np.where(sa, eb, ea)[cross]
    keys, first = np.unique(e_in * grid.size + e_out, return_index=True)
    svals = segment_roots(field, t, X[e_in[first]], X[e_out[first]])
    for tet in _KUHN:
        nodes = c[:, tet]
        ins = s[:, tet]
        k = ins.sum(axis=1)
        # order vertices inside-first
        perm = np.argsort(~ins, axis=1, kind="stable")
        nodes = np.take_along_axis(nodes, perm, axis=1)
        full_t = k == 4
        cube_vol[full_t] += h ** 3 / 6.0
        for kk in (1, 2, 3):
            sel = np.flatnonzero(k == kk)
            if sel.size == 0:
                continue
            nd = nodes[sel]
            P = X[nd]

            def root(i, j):
                sr = svals[np.searchsorted(keys, nd[:, i] * grid.size + nd[:, j])]
                return P[:, i] + sr[:, None] * (P[:, j] - P[:, i])

            if kk == 1:
                p1, p2, p3 = root(0, 1), root(0, 2), root(0, 3)
                vol = _tet_volume(P[:, 0], p1, p2, p3)
                tv.append(np.stack([p1, p2, p3], axis=1))
                tn.append(np.repeat(nd[:, :1], 3, axis=1))
            elif kk == 3:
                q0, q1, q2 = root(0, 3), root(1, 3), root(2, 3)
                vol = h ** 3 / 6.0 - _tet_volume(P[:, 3], q0, q1, q2)
                tv.append(np.stack([q0, q1, q2], axis=1))
                tn.append(nd[:, :3])
            else:
                p02, p03, p12, p13 = root(0, 2), root(0, 3), root(1, 2), root(1, 3)
                A0, A1, A2 = P[:, 0], p02, p03
                B0, B1, B2 = P[:, 1], p12, p13
                vol = (_tet_volume(A0, A1, A2, B2) + _tet_volume(A0, A1, B1, B2)
                       + _tet_volume(A0, B0, B1, B2))
                tv.append(np.stack([p02, p12, p13], axis=1))
                tn.append(np.stack([nd[:, 0], nd[:, 1], nd[:, 1]], axis=1))
                tv.append(np.stack([p02, p13, p03], axis=1))
                tn.append(np.stack([nd[:, 0], nd[:, 1], nd[:, 0]], axis=1))
            np.add.at(cube_vol, sel, vol)
    _distribute(weights, c, s, cube_vol)
    if tv:
        fv = np.concatenate(tv)
        fn = np.concatenate(tn)
    else:
        fv = np.zeros((0, 3, 3))
        fn = np.zeros((0, 3), dtype=int)
    meas = 0.5 * np.linalg.norm(np.cross(fv[:, 1] - fv[:, 0], fv[:, 2] - fv[:, 0]), axis=1)
    return weights, fv, fn, meas


def node_inclusion(phi, scale):
    return phi < -1e-12 * scale


def build_slice(field, grid, t):
    """Discretize Omega(t) on ``grid``."""
    if field.dim != grid.dim:
        raise ArgumentError("field and grid dimensions differ")
    scale = max(1.0, grid.a ** 2)
    t = float(t)
    phi = field.eval(grid.points, t)
    active = node_inclusion(phi, scale)
    theta, roots = _cut_data(field, grid, t, active)
    if grid.dim == 1:
        weights, fv, fn, meas = _slice_1d(grid, active, roots)
    elif grid.dim == 2:
        weights, fv, fn, meas = _slice_2d(grid, phi, active, roots)
    else:
        weights, fv, fn, meas = _slice_3d(field, grid, t, active)
    weights[~active] = 0.0
    labels, ncomp = _label(active.reshape(grid.shape))
    return DomainSlice(grid, t, phi, active, theta, fv, fn.astype(int), meas, weights,
                       labels.ravel(), ncomp, scale)


def _label(mask):
    structure = ndimage.generate_binary_structure(mask.ndim, 1)
    labels, count = ndimage.label(mask, structure=structure)
    return labels, int(count)


def connected_components(sl):
    """(count, labels); labels follow raster order, i.e. lowest node index first."""
    return sl.n_components, sl.labels


def count_holes(sl):
    """Components of the complement that do not reach the grid border."""
    mask = ~sl.active.reshape(sl.grid.shape)
    labels, count = _label(mask)
    if count == 0:
        return 0
    border = np.zeros_like(mask)
    for k in range(mask.ndim):
        idx = [slice(None)] * mask.ndim
        idx[k] = 0
        border[tuple(idx)] = True
        idx[k] = -1
        border[tuple(idx)] = True
    touching = set(np.unique(labels[border & mask]).tolist())
    return sum(1 for lab in range(1, count + 1) if lab not in touching)


def _values(sl, integrand, where):
    if callable(integrand):
        pts = sl.grid.points[where]
        return np.asarray(integrand(pts), dtype=float) * np.ones(len(pts))
    vals = np.asarray(integrand, dtype=float)
    if vals.ndim == 0:
        return np.full(np.count_nonzero(where) if where.dtype == bool else len(where), float(vals))
    if vals.shape[0] == sl.grid.size:
        return vals[where]
    if vals.shape[0] == sl.n_active and where.dtype == bool and where is sl.active:
        return vals
    raise ArgumentError("nodal integrand must have one value per grid node or per active node")


def volume_integral(sl, integrand):
    """Cut-cell quadrature of an integrand over the slice.

    ``integrand`` is a callable on points (m, dim) or an array of nodal
    values (all nodes or active nodes only).
    """
    if sl.empty:
        return 0.0
    vals = _values(sl, integrand, sl.active)
    return float(np.dot(sl.weights[sl.active], vals))


def boundary_integral(sl, integrand):
    """Sum over facets of integrand(centroid) * facet measure.

    A nodal array is interpolated to facets through the active node owning
    each facet vertex.
    """
    if len(sl.facet_measures) == 0:
        return 0.0
    if callable(integrand):
        vals = np.asarray(integrand(sl.facet_centroids()), dtype=float) * np.ones(len(sl.facet_measures))
    else:
        nodal = np.asarray(integrand, dtype=float)
        if nodal.ndim == 0:
            vals = np.full(len(sl.facet_measures), float(nodal))
        else:
            if nodal.shape[0] == sl.n_active:
                full = np.zeros(sl.grid.size)
                full[sl.active] = nodal
                nodal = full
            vals = nodal[sl.facet_nodes].mean(axis=1)
    return float(np.dot(vals, sl.facet_measures))


def write_vtk(path, sl, extra=None):
    """Legacy-VTK ASCII structured points with phi, the active mask and extra nodal fields."""
    g = sl.grid
    dims = list(g.shape) + [1] * (3 - g.dim)
    spacing = [g.h] * g.dim + [1.0] * (3 - g.dim)
    origin = [-g.a] * g.dim + [0.0] * (3 - g.dim)

    def reorder(v):
        # VTK wants x fastest; our flat order has the last axis fastest
        return np.asarray(v, dtype=float).reshape(g.shape).transpose().ravel()

    fields = {"phi": sl.phi, "active": sl.active.astype(float)}
    fields.update(extra or {})
    with open(path, "w") as fh:
        fh.write("# vtk DataFile Version 3.0\n")
        fh.write(f"slice t={sl.t!r}\nASCII\nDATASET STRUCTURED_POINTS\n")
        fh.write("DIMENSIONS {} {} {}\n".format(*dims))
        fh.write("ORIGIN {!r} {!r} {!r}\n".format(*origin))
        fh.write("SPACING {!r} {!r} {!r}\n".format(*spacing))
        fh.write(f"POINT_DATA {g.size}\n")
        for name, vals in fields.items():
            fh.write(f"SCALARS {name} double 1\nLOOKUP_TABLE default\n")
            fh.write("\n".join(f"{v:.17g}" for v in reorder(vals)))
            fh.write("\n")


def euler_characteristic(sl):
    """Euler characteristic of the cubical complex spanned by active nodes.

    Vertices, axis edges, squares and cubes whose corners are all active;
    a disk or ball gives 1, an annulus or solid torus 0.
    """
    A = sl.active.reshape(sl.grid.shape)
    d = A.ndim
    chi = 0
    for r in range(d + 1):
        for axes in _combinations(range(d), r):
            cell = A
            for k in axes:
                lo = [slice(None)] * d
                hi = [slice(None)] * d
                lo[k] = slice(0, -1)
                hi[k] = slice(1, None)
                cell = cell[tuple(lo)] & cell[tuple(hi)]
            chi += (-1) ** r * int(cell.sum())
    return chi


def _combinations(items, r):
    from itertools import combinations
    return combinations(list(items), r)
