"""Finite-difference operators on the active nodes of a DomainSlice."""
import numpy as np
import scipy.sparse as sp


def _neighbors(sl, k, side):
    """Flat index of the neighbor along axis k (side 0: -, 1: +), -1 off the grid."""
    g = sl.grid
    ik = g.index_along(k)
    step = g.strides[k] * (1 if side else -1)
    nb = np.arange(g.size) + step
    edge = (ik == g.n - 1) if side else (ik == 0)
    nb[edge] = -1
    return nb


def _arm_lengths(sl):
    """Per active node, axis and side: (distance to neighbor or interface, neighbor dof or -1)."""
    g = sl.grid
    act = sl.active_nodes
    dof = sl.dof_index()
    out = []
    for k in range(g.dim):
        arms = []
        for side in (0, 1):
            nb = _neighbors(sl, k, side)[act]
            nb_dof = np.where(nb >= 0, dof[np.maximum(nb, 0)], -1)
            th = sl.theta[k, side, act]
            inner = nb_dof >= 0
            length = np.where(inner, g.h, np.nan_to_num(th, nan=1.0) * g.h)
            arms.append((length, nb_dof))
        out.append(arms)
    return out


def dirichlet_laplacian(sl, scheme="shortley-weller"):
    """-Laplacian with homogeneous Dirichlet data on the interface.

    ``shortley-weller``: the classical nonsymmetric three-point stencil on
    the nonuniform arms.  ``symmetric``: the cut-distance variant in which
    only the diagonal sees the interface distance, so the matrix is SPD.
    """
    m = sl.n_active
    h = sl.grid.h
    rows, cols, vals = [], [], []
    diag = np.zeros(m)
    ar = np.arange(m)
    for (lm, nm), (lp, np_) in _arm_lengths(sl):
        if scheme == "shortley-weller":
            diag += 2.0 / (lm * lp)
            cm = -2.0 / (lm * (lm + lp))
            cp = -2.0 / (lp * (lm + lp))
        elif scheme == "symmetric":
            diag += (1.0 / lm + 1.0 / lp) / h
            cm = np.full(m, -1.0 / h ** 2)
            cp = cm
        else:
            raise ValueError(f"unknown scheme {scheme!r}")
        for c, nb in ((cm, nm), (cp, np_)):
            ok = nb >= 0
            rows.append(ar[ok])
            cols.append(nb[ok])
            vals.append(c[ok])
    rows.append(ar)
    cols.append(ar)
    vals.append(diag)
    return sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                         shape=(m, m))


def neumann_stiffness(sl):
    """Energy matrix of sum over active-active edges of h^(d-2) (u_i - u_j)^2."""
    m = sl.n_active
    g = sl.grid
    rows, cols = [], []
    ar = np.arange(m)
    for arms in _arm_lengths(sl):
        _, nb = arms[1]
        ok = nb >= 0
        rows.append(ar[ok])
        cols.append(nb[ok])
    r = np.concatenate(rows)
    c = np.concatenate(cols)
    w = g.h ** (g.dim - 2)
    A = sp.csr_matrix((np.full(r.size, -w), (r, c)), shape=(m, m))
    A = A + A.T
    return (A - sp.diags(np.asarray(A.sum(axis=1)).ravel())).tocsr()


def face_velocities(sl, velocity):
    """Normal velocity component at every face of every active node.

    Returns a list over axes of (w_minus, w_plus) arrays on active nodes,
    evaluated at face midpoints.
    """
    g = sl.grid
    X = g.points[sl.active_nodes]
    out = []
    for k in range(g.dim):
        e = np.zeros(g.dim)
        e[k] = 0.5 * g.h
        wm = velocity(X - e, sl.t)[:, k]
        wp = velocity(X + e, sl.t)[:, k]
        out.append((wm, wp))
    return out


def upwind_advection(sl, velocity):
    """Conservative first-order upwind discretization of div(u w).

    Fluxes leaving toward inactive neighbors carry u_i; inflow from them is
    zero (zero extension).  Also returns the discrete divergence of w per
    active node, which bounds u^T C u from below by (1/2) sum div_h(w) u^2.
    """
    m = sl.n_active
    h = sl.grid.h
    ar = np.arange(m)
    rows, cols, vals = [], [], []
    div = np.zeros(m)
    diag = np.zeros(m)
    faces = face_velocities(sl, velocity)
    for k, arms in enumerate(_arm_lengths(sl)):
        wm, wp = faces[k]
        _, nm = arms[0]
        _, np_ = arms[1]
        div += (wp - wm) / h
        # + face: flux = wp^+ u_i + wp^- u_nb
        diag += np.maximum(wp, 0.0) / h
        ok = np_ >= 0
        rows.append(ar[ok])
        cols.append(np_[ok])
        vals.append(np.minimum(wp, 0.0)[ok] / h)
        # - face: flux = wm^+ u_nb + wm^- u_i, entering with a minus sign
        diag -= np.minimum(wm, 0.0) / h
        ok = nm >= 0
        rows.append(ar[ok])
        cols.append(nm[ok])
        vals.append(-np.maximum(wm, 0.0)[ok] / h)
    rows.append(ar)
    cols.append(ar)
    vals.append(diag)
    C = sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(m, m))
    return C, div


def transfer(prev, new):
    """Zero-extension matrix mapping active values on ``prev`` to ``new``."""
    dof_prev = prev.dof_index()
    act_new = new.active_nodes
    src = dof_prev[act_new]
    keep = src >= 0
    return sp.csr_matrix((np.ones(int(keep.sum())), (np.flatnonzero(keep), src[keep])),
                         shape=(new.n_active, prev.n_active))
