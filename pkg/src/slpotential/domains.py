"""Uniformly convex planar domains given by concave defining functions.

A domain is ``{p : h(p) > 0}`` for a smooth ``h`` with ``D^2 h <= -theta I``.
Every catalog domain is star-shaped about ``center``; the boundary is the
ray-root ``gamma(phi)`` with ``h(center + gamma(phi) (cos phi, sin phi)) = 0``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import ConfigError, DegenerateBoundaryError, GeometryError, InvalidInputError

GAUSS_POINTS = 64
ANGLE_POINTS = 512


@dataclass(frozen=True)
class DomainSpec:
    """Defining function ``h`` with first and second derivatives, plus metadata.

    ``h``, ``dh`` and ``d2h`` accept points of shape ``(..., 2)``.
    ``descriptor`` is the JSON-serializable form used by the CLI.
    """

    h: Callable
    dh: Callable
    d2h: Callable
    theta: float
    area: float
    bounding_radius: float
    center: np.ndarray
    descriptor: dict = field(default_factory=dict)

    # -- boundary parametrization ------------------------------------------

    def ray_root(self, phi):
        """Boundary distance ``gamma(phi)`` from ``center`` along each angle.

        Vectorized bisection followed by Newton polishing; the result satisfies
        ``|h| <= 1e-12`` at the boundary point.
        """
        phi = np.atleast_1d(np.asarray(phi, dtype=float))
        omega = np.stack([np.cos(phi), np.sin(phi)], axis=-1)
        c = self.center
        if not self.h(c) > 0:
            raise GeometryError("defining function is not positive at the center")

        def hr(r):
            return self.h(c + r[:, None] * omega)

        lo = np.zeros_like(phi)
        hi = np.full_like(phi, max(self.scale_hint(), 1e-3))
        for _ in range(80):
            outside = hr(hi) < 0
            if np.all(outside):
                break
            hi = np.where(outside, hi, 2.0 * hi)
        else:
            raise GeometryError("ray-root bracketing failed")
        for _ in range(60):
            mid = 0.5 * (lo + hi)
            pos = hr(mid) > 0
            lo = np.where(pos, mid, lo)
            hi = np.where(pos, hi, mid)
        r = 0.5 * (lo + hi)
        for _ in range(3):
            p = c + r[:, None] * omega
            slope = np.sum(self.dh(p) * omega, axis=-1)
            r = r - self.h(p) / slope
        return r

    def ray_root_derivatives(self, phi):
        """``gamma``, ``gamma'`` and ``gamma''`` by implicit differentiation of h(c + gamma w) = 0."""
        phi = np.atleast_1d(np.asarray(phi, dtype=float))
        g = self.ray_root(phi)
        w = np.stack([np.cos(phi), np.sin(phi)], axis=-1)
        wp = np.stack([-np.sin(phi), np.cos(phi)], axis=-1)
        p = self.center + g[:, None] * w
        dh = self.dh(p)
        d2h = self.d2h(p)

        def quad(x, y):
            return np.einsum("...i,...ij,...j->...", x, d2h, y)

        H_g = np.sum(dh * w, axis=-1)
        H_p = g * np.sum(dh * wp, axis=-1)
        if np.any(np.abs(H_g) < 1e-14):
            raise DegenerateBoundaryError("ray is tangent to the boundary")
        H_gg = quad(w, w)
        H_gp = np.sum(dh * wp, axis=-1) + g * quad(w, wp)
        H_pp = g * g * quad(wp, wp) - g * np.sum(dh * w, axis=-1)
        g1 = -H_p / H_g
        g2 = -(H_pp + 2.0 * H_gp * g1 + H_gg * g1 * g1) / H_g
        return g, g1, g2

    def boundary_points(self, phi):
        phi = np.atleast_1d(np.asarray(phi, dtype=float))
        g = self.ray_root(phi)
        return self.center + g[:, None] * np.stack([np.cos(phi), np.sin(phi)], axis=-1)

    def scale_hint(self):
        return float(self.descriptor.get("_scale", 1.0))

    def contains(self, p, tol=0.0):
        return self.h(np.asarray(p, dtype=float)) > -tol

    def moments(self):
        """Area, centroid and covariance by tensor Gauss quadrature over the star chart."""
        return _star_moments(self)

    @property
    def kind(self):
        return self.descriptor.get("type", "custom")


def _gauss_star_nodes(domain, n=GAUSS_POINTS, m=ANGLE_POINTS):
    # Gauss in the radial fraction, trapezoid in the (periodic) angle
    xs, ws = np.polynomial.legendre.leggauss(n)
    s = 0.5 * (xs + 1.0)
    s_w = 0.5 * ws
    phi = 2.0 * np.pi * np.arange(m) / m
    phi_w = np.full(m, 2.0 * np.pi / m)
    g = domain.ray_root(phi)
    omega = np.stack([np.cos(phi), np.sin(phi)], axis=-1)
    # point = c + s g(phi) omega, area element = s g^2 ds dphi
    pts = domain.center + (s[:, None, None] * g[None, :, None]) * omega[None, :, :]
    wts = s_w[:, None] * phi_w[None, :] * s[:, None] * (g * g)[None, :]
    return pts.reshape(-1, 2), wts.reshape(-1)


def _star_moments(domain):
    pts, wts = _gauss_star_nodes(domain)
    area = float(wts.sum())
    centroid = (wts[:, None] * pts).sum(axis=0) / area
    d = pts - centroid
    cov = np.einsum("k,ki,kj->ij", wts, d, d) / area
    return area, centroid, cov


def _bounding_radius(domain, samples=8192):
    phi = np.linspace(0.0, 2.0 * np.pi, samples, endpoint=False)
    return float(np.max(np.linalg.norm(domain.boundary_points(phi), axis=-1)))


def _center(center):
    c = np.zeros(2) if center is None else np.asarray(center, dtype=float)
    if c.shape != (2,):
        raise ConfigError("center must be a 2-vector")
    return c


def disc_domain(center=None, radius=1.0) -> DomainSpec:
    """Disc with ``h = (R^2 - |p - c|^2) / (2R)``, so ``|Dh| = 1`` on the circle."""
    if not radius > 0:
        raise ConfigError("radius must be positive")
    c = _center(center)
    R = float(radius)

    def h(p):
        d = np.asarray(p, dtype=float) - c
        return (R * R - np.sum(d * d, axis=-1)) / (2.0 * R)

    def dh(p):
        return -(np.asarray(p, dtype=float) - c) / R

    def d2h(p):
        p = np.asarray(p, dtype=float)
        return np.broadcast_to(-np.eye(2) / R, p.shape[:-1] + (2, 2)).copy()

    desc = {"type": "disc", "radius": R, "center": c.tolist(), "_scale": R}
    return DomainSpec(h, dh, d2h, theta=1.0 / R, area=np.pi * R * R,
                      bounding_radius=float(np.linalg.norm(c) + R), center=c, descriptor=desc)


def ellipse_domain(semi_axes, center=None, scale=0.5) -> DomainSpec:
    """Ellipse with ``h = s (1 - sum (p_i - c_i)^2 / a_i^2)``.

    With the default ``s = 1/2`` the unit-circle case coincides with
    :func:`disc_domain`.  ``|Dh| = 1`` on the boundary only for circles.
    """
    axes = np.asarray(semi_axes, dtype=float)
    if axes.shape != (2,) or np.any(axes <= 0):
        raise ConfigError("semi_axes must be two positive numbers")
    if not scale > 0:
        raise ConfigError("scale must be positive")
    c = _center(center)
    s = float(scale)
    inv2 = 1.0 / axes**2

    def h(p):
        d = np.asarray(p, dtype=float) - c
        return s * (1.0 - np.sum(d * d * inv2, axis=-1))

    def dh(p):
        return -2.0 * s * (np.asarray(p, dtype=float) - c) * inv2

    def d2h(p):
        p = np.asarray(p, dtype=float)
        return np.broadcast_to(np.diag(-2.0 * s * inv2), p.shape[:-1] + (2, 2)).copy()

    desc = {"type": "ellipse", "semi_axes": axes.tolist(), "center": c.tolist(),
            "_scale": float(axes.max())}
    dom = DomainSpec(h, dh, d2h, theta=2.0 * s / float(np.max(axes**2)),
                     area=float(np.pi * axes[0] * axes[1]), bounding_radius=0.0,
                     center=c, descriptor=desc)
    return _with_bounding_radius(dom)


def superellipse_domain(a=1.0, b=1.0, m=4, eps=0.25, center=None) -> DomainSpec:
    """``h = [1 - (x/a)^m - (y/b)^m - eps((x/a)^2 + (y/b)^2)] / (1 + eps)``, m even."""
    if int(m) != m or m < 4 or int(m) % 2:
        raise ConfigError("m must be an even integer >= 4")
    if not (0 < eps <= 1):
        raise ConfigError("eps must lie in (0, 1]")
    if not (a > 0 and b > 0):
        raise ConfigError("a and b must be positive")
    m = int(m)
    c = _center(center)
    sc = np.array([a, b], dtype=float)
    k = 1.0 / (1.0 + eps)

    def h(p):
        z = (np.asarray(p, dtype=float) - c) / sc
        return k * (1.0 - np.sum(z**m, axis=-1) - eps * np.sum(z * z, axis=-1))

    def dh(p):
        z = (np.asarray(p, dtype=float) - c) / sc
        return -k * (m * z ** (m - 1) + 2.0 * eps * z) / sc

    def d2h(p):
        z = (np.asarray(p, dtype=float) - c) / sc
        diag = -k * (m * (m - 1) * z ** (m - 2) + 2.0 * eps) / sc**2
        out = np.zeros(z.shape[:-1] + (2, 2))
        out[..., 0, 0] = diag[..., 0]
        out[..., 1, 1] = diag[..., 1]
        return out

    desc = {"type": "superellipse", "a": float(a), "b": float(b), "m": m, "eps": float(eps),
            "center": c.tolist(), "_scale": float(max(a, b))}
    dom = DomainSpec(h, dh, d2h, theta=2.0 * eps / ((1.0 + eps) * max(a, b) ** 2),
                     area=0.0, bounding_radius=0.0, center=c, descriptor=desc)
    area, _, _ = _star_moments(dom)
    dom = _replace(dom, area=area)
    return _with_bounding_radius(dom)


def _replace(dom, **kw):
    from dataclasses import replace
    return replace(dom, **kw)


def _with_bounding_radius(dom):
    return _replace(dom, bounding_radius=_bounding_radius(dom))


def domain_from_descriptor(desc: dict) -> DomainSpec:
    kind = desc.get("type")
    center = desc.get("center")
    if kind == "disc":
        return disc_domain(center, desc.get("radius", 1.0))
    if kind == "ellipse":
        return ellipse_domain(desc["semi_axes"], center)
    if kind == "superellipse":
        return superellipse_domain(desc.get("a", 1.0), desc.get("b", 1.0), desc.get("m", 4),
                                   desc.get("eps", 0.25), center)
    raise ConfigError(f"unknown domain type {kind!r}")


def public_descriptor(domain: DomainSpec) -> dict:
    return {k: v for k, v in domain.descriptor.items() if not k.startswith("_")}


def theta0(source: DomainSpec, target: DomainSpec) -> float:
    """Volume ratio |target| / |source|."""
    return float(target.area / source.area)


def inward_normal(domain: DomainSpec, p, tol=1e-8):
    """Unit inward normal ``Dh / |Dh|`` at boundary point(s) ``p``."""
    p = np.asarray(p, dtype=float)
    if np.any(np.abs(domain.h(p)) > tol):
        raise InvalidInputError("point is not on the boundary")
    g = domain.dh(p)
    norm = np.linalg.norm(g, axis=-1)
    if np.any(norm < 1e-10):
        raise DegenerateBoundaryError("vanishing gradient of the defining function")
    return g / norm[..., None]
