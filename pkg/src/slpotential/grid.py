"""Boundary-fitted polar grid on a star-shaped domain.

Nodes sit at ``x(i, j) = c + (i / n_r) gamma(phi_j) (cos phi_j, sin phi_j)``
with a single pole node at ``i = 0``.  Cartesian first and second
derivatives are linear in the nodal values and are stored as five sparse
matrices (``dx, dy, dxx, dxy, dyy``).

Weights come from (s, phi) differences chained through the analytic chart,
one-sided second-order differences on the boundary ring, and a least-squares
cubic fit at the pole.  Each node's weights are then minimally corrected so
that every quadratic polynomial is differentiated exactly; the correction is
O(h^2) and keeps the scheme second order.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .domains import DomainSpec, inward_normal
from .errors import ConfigError, InvalidInputError

OPERATORS = ("dx", "dy", "dxx", "dxy", "dyy")


@dataclass(frozen=True, eq=False)
class Grid:
    domain: DomainSpec
    n_r: int
    n_phi: int
    ds: float
    dphi: float
    i_r: np.ndarray
    i_phi: np.ndarray
    points: np.ndarray
    is_boundary: np.ndarray
    boundary_idx: np.ndarray
    interior_idx: np.ndarray
    normals: np.ndarray
    gamma: np.ndarray
    ops: dict
    weights: np.ndarray
    h: float

    @property
    def size(self):
        return self.points.shape[0]

    @property
    def pole(self):
        return 0

    def index(self, i, j):
        if i == 0:
            return 0
        if not (1 <= i <= self.n_r):
            raise InvalidInputError("radial index out of range")
        return 1 + (i - 1) * self.n_phi + (j % self.n_phi)

    def ring(self, i):
        if i == 0:
            return np.array([0])
        return 1 + (i - 1) * self.n_phi + np.arange(self.n_phi)


def _node_index(i, j, n_phi):
    return np.where(i == 0, 0, 1 + (i - 1) * n_phi + np.mod(j, n_phi))


def _monomials(xi, degree=2):
    x, y = xi[..., 0], xi[..., 1]
    cols = [np.ones_like(x), x, y, x * x, x * y, y * y]
    if degree == 3:
        cols += [x**3, x * x * y, x * y * y, y**3]
    return np.stack(cols, axis=-1)


def _targets(ell, degree=2):
    """Rows: derivative operators applied to the scaled monomials at the centre."""
    t = np.zeros(ell.shape + (5, 6 if degree == 2 else 10))
    t[..., 0, 1] = 1.0 / ell
    t[..., 1, 2] = 1.0 / ell
    t[..., 2, 3] = 2.0 / ell**2
    t[..., 3, 4] = 1.0 / ell**2
    t[..., 4, 5] = 2.0 / ell**2
    return t


def _polish(w0, disp, degree=2):
    """Smallest change to ``w0`` (shape (n, 5, K)) making all polynomials of ``degree`` exact."""
    ell = np.max(np.linalg.norm(disp, axis=-1), axis=-1)
    V = _monomials(disp / ell[:, None, None], degree)  # (n, K, m)
    T = _targets(ell, degree)  # (n, 5, m)
    defect = T - np.einsum("nok,nkm->nom", w0, V)
    gram = np.einsum("nkm,nkl->nml", V, V)
    lam = np.linalg.solve(gram[:, None, :, :], defect[..., None])[..., 0]  # (n, 5, 6)
    return w0 + np.einsum("nkm,nom->nok", V, lam)


def _chart_weights(s, g, g1, g2, phi, ws, wp, wss, wsp, wpp):
    """Chain (s, phi) difference weights into Cartesian derivative weights.

    ``ws`` etc. have shape (K,) or (n, K); chart quantities have shape (n,).
    Returns (n, 5, K).
    """
    w = np.stack([np.cos(phi), np.sin(phi)], axis=-1)
    wq = np.stack([-np.sin(phi), np.cos(phi)], axis=-1)
    X_s = g[:, None] * w
    X_p = s[:, None] * (g1[:, None] * w + g[:, None] * wq)
    X_sp = g1[:, None] * w + g[:, None] * wq
    X_pp = s[:, None] * (g2[:, None] * w + 2.0 * g1[:, None] * wq - g[:, None] * w)
    J = np.stack([X_s, X_p], axis=-1)  # J[n, k, a] = dx_k / d a
    P = np.linalg.inv(np.swapaxes(J, -1, -2))  # J^{-T}
    n = s.shape[0]
    ws, wp, wss, wsp, wpp = (np.broadcast_to(x, (n, x.shape[-1])) for x in (ws, wp, wss, wsp, wpp))
    Wu = np.stack([ws, wp], axis=1)  # (n, 2, K)
    Wd = np.einsum("nka,nav->nkv", P, Wu)  # Du weights (n, 2, K)
    Xab = np.zeros((n, 2, 2, 2))  # [n, a, b, k]
    Xab[:, 0, 1] = X_sp
    Xab[:, 1, 0] = X_sp
    Xab[:, 1, 1] = X_pp
    Wab = np.stack([np.stack([wss, wsp], axis=1), np.stack([wsp, wpp], axis=1)], axis=1)
    M = Wab - np.einsum("nabk,nkv->nabv", Xab, Wd)
    H = np.einsum("nka,nabv,nlb->nklv", P, M, P)
    return np.stack([Wd[:, 0], Wd[:, 1], H[:, 0, 0], H[:, 0, 1], H[:, 1, 1]], axis=1)


def build_grid(domain: DomainSpec, n_r: int, n_phi: int) -> Grid:
    """Boundary-fitted polar grid with precomputed derivative operators."""
    if n_r < 8 or n_phi < 16 or n_phi % 2:
        raise ConfigError("need n_r >= 8, n_phi >= 16 and n_phi even")
    N, M = int(n_r), int(n_phi)
    ds = 1.0 / N
    dphi = 2.0 * np.pi / M
    phis = dphi * np.arange(M)
    gam, gam1, gam2 = domain.ray_root_derivatives(phis)
    omega = np.stack([np.cos(phis), np.sin(phis)], axis=-1)

    size = 1 + N * M
    i_r = np.concatenate([[0], np.repeat(np.arange(1, N + 1), M)])
    i_phi = np.concatenate([[0], np.tile(np.arange(M), N)])
    s_node = i_r * ds
    points = domain.center + (s_node * gam[i_phi])[:, None] * omega[i_phi]
    points[0] = domain.center

    triplets = {name: ([], [], []) for name in OPERATORS}

    def emit(node_ids, support_ids, W):
        # W: (n, 5, K), support_ids: (n, K)
        for o, name in enumerate(OPERATORS):
            r, c, v = triplets[name]
            r.append(np.repeat(node_ids, support_ids.shape[1]))
            c.append(support_ids.reshape(-1))
            v.append(W[:, o, :].reshape(-1))

    def category(i_vals, di, cs1, cs2):
        # tensor stencil di x dj; negative radial indices wrap through the pole
        dj = np.array([-1, 0, 1])
        cp1 = np.array([-0.5, 0.0, 0.5]) / dphi
        cp2 = np.array([1.0, -2.0, 1.0]) / dphi**2
        nodes_i = np.repeat(i_vals, M)
        nodes_j = np.tile(np.arange(M), len(i_vals))
        DI, DJ = np.meshgrid(di, dj, indexing="ij")
        DI, DJ = DI.ravel(), DJ.ravel()
        e0 = (DJ == 0).astype(float)
        c0 = (DI == 0).astype(float)
        pos = {d: k for k, d in enumerate(di)}
        s1 = np.array([cs1[pos[d]] for d in DI])
        s2 = np.array([cs2[pos[d]] for d in DI])
        p1 = cp1[DJ + 1]
        p2 = cp2[DJ + 1]
        w_s, w_ss = s1 * e0, s2 * e0
        w_p, w_pp = c0 * p1, c0 * p2
        w_sp = s1 * p1
        si = nodes_i[:, None] + DI[None, :]
        sj = nodes_j[:, None] + DJ[None, :] + np.where(si < 0, M // 2, 0)
        sup = _node_index(np.abs(si), sj, M)
        W = _chart_weights(nodes_i * ds, gam[nodes_j], gam1[nodes_j], gam2[nodes_j], phis[nodes_j],
                           w_s, w_p, w_ss, w_sp, w_pp)
        return _node_index(nodes_i, nodes_j, M), sup, W

    def add(i_vals, di, cs1, cs2):
        ids, sup, W = category(i_vals, di, cs1, cs2)
        emit(ids, sup, _polish(W, points[sup] - points[ids][:, None, :]))

    centered1 = np.array([-0.5, 0.0, 0.5]) / ds
    centered2 = np.array([1.0, -2.0, 1.0]) / ds**2
    wide = np.arange(-2, 3)
    wide1 = np.array([1.0, -8.0, 0.0, 8.0, -1.0]) / (12.0 * ds)
    wide2 = np.array([0.0, 1.0, -2.0, 1.0, 0.0]) / ds**2

    # The chart formulas divide the radial first difference by s, so its
    # O(ds^2) error becomes O(ds) on the rings next to the pole.  A fourth
    # order radial first difference removes that; on ring 1 it reaches
    # through the pole, which needs gamma(phi + pi) = gamma(phi).
    symmetric = np.allclose(gam, np.roll(gam, M // 2), rtol=0.0, atol=1e-12 * gam.max())
    first_wide = 1 if symmetric else 2
    if first_wide == 2:
        add(np.array([1]), np.array([-1, 0, 1]), centered1, centered2)
    if N - 2 >= first_wide:
        add(np.arange(first_wide, N - 1), wide, wide1, wide2)
    add(np.array([N - 1]), np.array([-1, 0, 1]), centered1, centered2)

    # boundary ring: one-sided second-order in s
    di_b = np.array([-3, -2, -1, 0])
    one1 = np.array([0.0, 0.5, -2.0, 1.5]) / ds
    one2 = np.array([-1.0, 4.0, -5.0, 2.0]) / ds**2
    add(np.array([N]), di_b, one1, one2)

    # pole: least-squares cubic through the pole and the first two rings
    sup = np.concatenate([[0], 1 + np.arange(2 * M)])
    disp = points[sup] - points[0]
    ell = np.max(np.linalg.norm(disp, axis=-1))
    P = np.linalg.pinv(_monomials(disp / ell, degree=3))  # (10, K)
    Wp = np.stack([P[1] / ell, P[2] / ell, 2.0 * P[3] / ell**2, P[4] / ell**2, 2.0 * P[5] / ell**2])
    emit(np.array([0]), sup[None, :], Wp[None])

    ops = {}
    for name, (r, c, v) in triplets.items():
        ops[name] = sp.csr_matrix((np.concatenate(v), (np.concatenate(r), np.concatenate(c))),
                                  shape=(size, size))

    is_boundary = i_r == N
    boundary_idx = np.nonzero(is_boundary)[0]
    interior_idx = np.nonzero(~is_boundary)[0]
    normals = inward_normal(domain, points[boundary_idx])

    weights = np.zeros(size)
    ring_nodes = (i_r >= 1) & (i_r < N)
    weights[ring_nodes] = s_node[ring_nodes] * ds * dphi * gam[i_phi[ring_nodes]] ** 2
    weights[0] = np.pi * (0.5 * ds) ** 2 * np.mean(gam**2)
    weights /= weights.sum()

    # mesh width: largest physical distance between neighbouring nodes
    radial = np.linalg.norm(points[1:] - points[_node_index(np.maximum(i_r[1:] - 1, 0), i_phi[1:], M)], axis=-1)
    angular = np.linalg.norm(points[1:] - points[_node_index(i_r[1:], i_phi[1:] + 1, M)], axis=-1)
    h = float(max(radial.max(), angular.max()))

    return Grid(domain=domain, n_r=N, n_phi=M, ds=ds, dphi=dphi, i_r=i_r, i_phi=i_phi,
                points=points, is_boundary=is_boundary, boundary_idx=boundary_idx,
                interior_idx=interior_idx, normals=normals, gamma=gam, ops=ops,
                weights=weights, h=h)


def derivatives(grid: Grid, u):
    """Cartesian gradient ``(N, 2)`` and Hessian ``(N, 2, 2)`` at every node."""
    u = np.asarray(u, dtype=float)
    if u.shape != (grid.size,):
        raise InvalidInputError(f"field has {u.shape} values, grid has {grid.size} nodes")
    # constants are annihilated exactly; removing one first keeps roundoff
    # from the large near-pole weights proportional to the local variation
    u = u - u[0]
    o = grid.ops
    du = np.stack([o["dx"] @ u, o["dy"] @ u], axis=-1)
    uxy = o["dxy"] @ u
    d2u = np.empty((grid.size, 2, 2))
    d2u[:, 0, 0] = o["dxx"] @ u
    d2u[:, 0, 1] = uxy
    d2u[:, 1, 0] = uxy
    d2u[:, 1, 1] = o["dyy"] @ u
    return du, d2u


def eval_derivatives(grid: Grid, u, node: int):
    """``(u, Du, D^2u)`` at a single node."""
    if not (0 <= node < grid.size):
        raise IndexError(f"node {node} out of range")
    u = np.asarray(u, dtype=float)
    if u.shape != (grid.size,):
        raise InvalidInputError("field length does not match grid")
    value = float(u[node])
    u = u - u[0]
    o = grid.ops
    du = np.array([o["dx"][node] @ u, o["dy"][node] @ u]).ravel()
    uxy = float((o["dxy"][node] @ u)[0])
    d2u = np.array([[float((o["dxx"][node] @ u)[0]), uxy], [uxy, float((o["dyy"][node] @ u)[0])]])
    return value, du, d2u


def sample(grid: Grid, f):
    """Evaluate ``f(points)`` at the grid nodes."""
    return np.asarray(f(grid.points), dtype=float)
