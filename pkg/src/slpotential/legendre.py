"""Discrete Legendre transform and checks of the dual problem on the target domain.

``u*(y) = sup_x (x . y - u(x))``.  The discrete transform takes the best
source node and then maximizes the node's local quadratic model, which
moves the O(h) grid-max error down to O(h^2).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.interpolate import RectBivariateSpline

from .errors import InvalidInputError, SingularityError
from .grid import Grid, derivatives
from .operator import dual_homotopy_value

CHUNK = 512
PERIODIC_PAD = 4


@dataclass(frozen=True)
class DualField:
    grid_dual: Grid
    u_star: np.ndarray
    c_dual: float
    t: float = 1.0

    @property
    def c(self):
        """Constant of the primal problem, ``n pi / 2 - c_dual``."""
        return np.pi - self.c_dual


@dataclass(frozen=True)
class RoundtripReport:
    error: float
    coverage_gaps: int
    samples: int


def _convex_derivatives(grid, u, guard, what):
    du, d2u = derivatives(grid, u)
    lam = np.linalg.eigvalsh(d2u)[:, 0]
    if not np.min(lam) >= guard:
        raise InvalidInputError(f"{what} is not convex (min Hessian eigenvalue {np.min(lam):.3e})")
    return du, d2u


def conjugate_values(grid: Grid, u, y, convexity_guard=1e-8):
    """``u*`` at arbitrary points ``y`` of shape (m, 2)."""
    u = np.asarray(u, dtype=float)
    if u.shape != (grid.size,):
        raise InvalidInputError("field length does not match grid")
    du, d2u = _convex_derivatives(grid, u, convexity_guard, "field")
    x = grid.points
    y = np.atleast_2d(np.asarray(y, dtype=float))
    best = np.empty(y.shape[0], dtype=int)
    for lo in range(0, y.shape[0], CHUNK):
        vals = y[lo:lo + CHUNK] @ x.T - u[None, :]
        best[lo:lo + CHUNK] = np.argmax(vals, axis=1)  # first maximum wins ties
    xk, uk, pk, hk = x[best], u[best], du[best], d2u[best]
    d = np.linalg.solve(hk, (y - pk)[..., None])[..., 0]
    model = uk + np.sum(pk * d, axis=-1) + 0.5 * np.einsum("ki,kij,kj->k", d, hk, d)
    return np.sum((xk + d) * y, axis=-1) - model


def legendre_transform(grid: Grid, u, grid_dual: Grid, c: float | None = None, t: float = 1.0,
                       convexity_guard=1e-8) -> DualField:
    """Conjugate of ``u`` sampled on the nodes of ``grid_dual``."""
    u_star = conjugate_values(grid, u, grid_dual.points, convexity_guard)
    c_dual = np.nan if c is None else float(np.pi - c)
    return DualField(grid_dual=grid_dual, u_star=u_star, c_dual=c_dual, t=t)


def dual_residual(dual: DualField, convexity_guard=0.0):
    """``G*^t(y, D^2 u*) - c_dual`` at every non-boundary dual node (zero on the boundary ring)."""
    g = dual.grid_dual
    _, d2 = derivatives(g, dual.u_star)
    lam = np.linalg.eigvalsh(d2)[:, 0]
    inner = ~g.is_boundary
    if not np.min(lam[inner]) > convexity_guard:
        raise SingularityError("dual Hessian is singular or indefinite")
    res = np.zeros(g.size)
    res[inner] = dual_homotopy_value(dual.t, g.points[inner], d2[inner]) - dual.c_dual
    return res


def dual_residual_norm(dual: DualField) -> float:
    return float(np.max(np.abs(dual_residual(dual))))


def chart_coordinates(grid: Grid, p):
    """``(s, phi)`` of points in the star chart of ``grid.domain`` (``s > 1`` outside)."""
    p = np.atleast_2d(np.asarray(p, dtype=float))
    d = p - grid.domain.center
    phi = np.mod(np.arctan2(d[:, 1], d[:, 0]), 2.0 * np.pi)
    s = np.linalg.norm(d, axis=-1) / grid.domain.ray_root(phi)
    return s, phi


def chart_interpolator(grid: Grid, field):
    """Bicubic spline of a nodal field in the (s, phi) chart, periodic in phi."""
    N, M, P = grid.n_r, grid.n_phi, PERIODIC_PAD
    table = np.empty((N + 1, M))
    table[0] = field[0]
    table[1:] = field[1:].reshape(N, M)
    table = np.concatenate([table[:, -P:], table, table[:, :P]], axis=1)
    s = np.arange(N + 1) * grid.ds
    phi = (np.arange(-P, M + P)) * grid.dphi
    spline = RectBivariateSpline(s, phi, table, kx=3, ky=3)

    def evaluate(ss, pp):
        return spline.ev(ss, np.mod(pp, 2.0 * np.pi))

    return evaluate


def gradient_roundtrip(grid: Grid, u, grid_dual: Grid, u_star, interior_only=True) -> RoundtripReport:
    """``max |Du*(Du(x)) - x|`` over source nodes whose image lies in the dual chart."""
    du, _ = derivatives(grid, np.asarray(u, dtype=float))
    dus, _ = derivatives(grid_dual, np.asarray(u_star, dtype=float))
    mask = ~grid.is_boundary if interior_only else np.ones(grid.size, dtype=bool)
    x = grid.points[mask]
    s, phi = chart_coordinates(grid_dual, du[mask])
    inside = s <= 1.0
    gx = chart_interpolator(grid_dual, dus[:, 0])(s[inside], phi[inside])
    gy = chart_interpolator(grid_dual, dus[:, 1])(s[inside], phi[inside])
    err = np.hypot(gx - x[inside, 0], gy - x[inside, 1])
    return RoundtripReport(error=float(err.max(initial=0.0)), coverage_gaps=int(np.sum(~inside)),
                           samples=int(mask.sum()))


def constant_offset_deviation(a, b, weights=None) -> float:
    """``max |a - b - mean(a - b)|``, the distance between two fields modulo constants."""
    d = np.asarray(a, dtype=float) - np.asarray(b, dtype=float)
    mean = np.mean(d) if weights is None else float(weights @ d / np.sum(weights))
    return float(np.max(np.abs(d - mean)))
