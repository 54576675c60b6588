"""Radial reference solutions for concentric discs.

For ``u(x) = U(|x|)`` with ``phi = U'`` the principal curvatures of the
graph are ``kappa_rad = phi' / (1 + phi^2)^{3/2}`` (once) and
``kappa_tan = phi / (r sqrt(1 + phi^2))`` (``n - 1`` times).  The homotopy
equation becomes a first-order ODE for ``phi`` which is integrated by RK4
from a series start near the pole; ``c`` is found by shooting on the
condition ``phi(rho_src) = rho_tgt``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from .errors import ConfigError, OracleError

SCAN_SAMPLES = 32


@dataclass(frozen=True)
class RadialProfile:
    rho_src: float
    rho_tgt: float
    n: int
    t: float
    c: float
    r: np.ndarray
    phi: np.ndarray
    dphi: np.ndarray
    tolerance: float  # achieved |phi(rho_src) - rho_tgt|

    @property
    def kappa_rad(self):
        return self.dphi / (1.0 + self.phi**2) ** 1.5

    @property
    def kappa_tan(self):
        return self.phi / (self.r * np.sqrt(1.0 + self.phi**2))


def _slope(r, phi, c, n, t):
    """Solve the radial homotopy equation for ``phi'``; ``inf`` when no finite root exists."""
    if not abs(phi) < 1e12:
        return math.inf
    w = 1.0 + phi * phi
    tan_part = (n - 1) * (t * math.atan(phi / (r * math.sqrt(w))) + (1.0 - t) * math.atan(phi / r))
    rhs = c - tan_part
    a = w**1.5
    if t == 1.0:
        if rhs >= 0.5 * math.pi:
            return math.inf
        return math.tan(rhs) * a
    if t == 0.0:
        if rhs >= 0.5 * math.pi:
            return math.inf
        return math.tan(rhs)
    # t atan(q / a) + (1 - t) atan(q) is increasing in q with supremum pi/2
    if rhs >= 0.5 * math.pi:
        return math.inf
    if rhs <= -0.5 * math.pi:
        return -math.inf

    def f(th):
        q = math.tan(th)
        return t * math.atan(q / a) + (1.0 - t) * th - rhs

    lo, hi = -0.5 * math.pi, 0.5 * math.pi
    th = max(min(rhs, hi - 1e-12), lo + 1e-12)
    for _ in range(200):
        val = f(th)
        if val > 0:
            hi = th
        else:
            lo = th
        q = math.tan(th)
        deriv = t * (1.0 + q * q) * a / (a * a + q * q) + (1.0 - t)
        new = th - val / deriv
        if not (lo < new < hi):
            new = 0.5 * (lo + hi)
        if abs(new - th) < 1e-15:
            th = new
            break
        th = new
    return math.tan(th)


def _integrate(c, rho_src, n, t, steps, record=False):
    """RK4 for ``phi`` on ``[r0, rho_src]``; returns the end value (``inf`` on blow-up)."""
    r0 = 1e-6 * rho_src
    k0 = math.tan(c / n)
    phi = k0 * r0
    h = (rho_src - r0) / steps
    rs, ps, ds = [], [], []
    r = r0
    for i in range(steps):
        k1 = _slope(r, phi, c, n, t)
        if record:
            rs.append(r)
            ps.append(phi)
            ds.append(k1)
        k2 = _slope(r + 0.5 * h, phi + 0.5 * h * k1, c, n, t)
        k3 = _slope(r + 0.5 * h, phi + 0.5 * h * k2, c, n, t)
        k4 = _slope(r + h, phi + h * k3, c, n, t)
        phi = phi + h * (k1 + 2.0 * k2 + 2.0 * k3 + k4) / 6.0
        if not math.isfinite(phi) or phi > 1e12:
            return math.inf, None
        r = r0 + (i + 1) * h
    if record:
        rs.append(r)
        ps.append(phi)
        ds.append(_slope(r, phi, c, n, t))
        return phi, (np.array(rs), np.array(ps), np.array(ds))
    return phi, None


def endpoint(c, rho_src=1.0, n=2, t=1.0, steps=4000):
    """``phi(rho_src)`` for a given ``c`` (``inf`` when the profile blows up)."""
    return _integrate(float(c), float(rho_src), int(n), float(t), int(steps))[0]


def radial_solve(rho_src=1.0, rho_tgt=1.0, n=2, t=1.0, tol=1e-12, steps=4000) -> RadialProfile:
    """Shoot on ``c`` in ``(0, n pi / 2)`` until ``phi(rho_src) = rho_tgt``.

    A scan over ``SCAN_SAMPLES`` values of ``c`` certifies that the endpoint
    is monotone before the root is refined with Brent's method.
    """
    if not (rho_src > 0 and rho_tgt > 0):
        raise ConfigError("radii must be positive")
    if int(n) != n or n < 2:
        raise ConfigError("n must be an integer >= 2")
    if not (0.0 <= t <= 1.0):
        raise ConfigError("t must lie in [0, 1]")
    if not tol > 0 or steps < 10:
        raise ConfigError("need tol > 0 and steps >= 10")
    n, t, rho_src, rho_tgt = int(n), float(t), float(rho_src), float(rho_tgt)
    upper = 0.5 * n * math.pi
    cs = upper * (np.arange(1, SCAN_SAMPLES + 1) / (SCAN_SAMPLES + 1))
    ends = np.array([endpoint(c, rho_src, n, t, steps) for c in cs])
    # monotone: strictly increasing while finite, and blown up for every larger c
    n_finite = int(np.argmin(np.isfinite(ends))) if not np.all(np.isfinite(ends)) else len(ends)
    if np.any(np.isfinite(ends[n_finite:])) or np.any(np.diff(ends[:n_finite]) <= 0):
        raise OracleError("endpoint is not monotone in c over the scan")
    above = np.nonzero(ends >= rho_tgt)[0]
    if len(above) == 0:
        raise OracleError("target radius not reached for any c in the scan")
    k = above[0]
    c_lo = cs[k - 1] if k > 0 else 0.0
    c_hi = cs[k]
    if ends[k] == rho_tgt:
        c = float(cs[k])
    else:
        def g(c):
            e = endpoint(c, rho_src, n, t, steps)
            return min(e, 1e6) - rho_tgt

        lo_val = g(c_lo) if c_lo > 0 else -rho_tgt
        if lo_val > 0:
            raise OracleError("bracket failure")
        c = brentq(g, c_lo if c_lo > 0 else 1e-300, c_hi, xtol=1e-15, rtol=4 * np.finfo(float).eps,
                   maxiter=200)
    end, (r, phi, dphi) = _integrate(c, rho_src, n, t, steps, record=True)
    achieved = abs(end - rho_tgt)
    if not achieved <= max(tol, 1e3 * np.finfo(float).eps * rho_tgt):
        raise OracleError(f"shooting tolerance not met ({achieved:.3e})")
    return RadialProfile(rho_src=rho_src, rho_tgt=rho_tgt, n=n, t=t, c=float(c), r=r, phi=phi,
                         dphi=dphi, tolerance=float(achieved))
