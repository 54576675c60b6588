"""Point-wise algebra of the special Lagrangian curvature operator.

Everything here works on a single point or on a stack of points: gradients
have shape ``(..., n)`` and Hessians ``(..., n, n)``.

For a graph ``x -> (x, u(x))`` with ``p = Du`` and ``r = D^2 u``::

    v      = sqrt(1 + |p|^2)
    g^{-1} = I - p p^T / v^2
    b      = I - p p^T / (v (1 + v))          (positive square root of g^{-1})
    a      = b r b / v                        (principal curvatures = eig(a))

and the operator is ``F[a] = sum(arctan(kappa))``.  The homotopy operator
blends it with the Hessian operator ``sum(arctan(lambda(r)))``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError, InvalidInputError

SYMMETRY_TOL = 1e-9


def _sym_eig(m):
    w, q = np.linalg.eigh(m)
    return w, q


def _from_eig(w, q):
    return np.einsum("...ik,...k,...jk->...ij", q, w, q)


def _outer(p):
    return p[..., :, None] * p[..., None, :]


def _eye_like(m):
    n = m.shape[-1]
    return np.broadcast_to(np.eye(n), m.shape)


@dataclass(frozen=True)
class GraphGeometry:
    du: np.ndarray
    d2u: np.ndarray
    v: np.ndarray
    g_inv: np.ndarray
    b_upper: np.ndarray
    b_lower: np.ndarray
    a: np.ndarray
    kappa: np.ndarray


def _check_symmetric(d2u):
    defect = np.max(np.abs(d2u - np.swapaxes(d2u, -1, -2)), initial=0.0)
    if defect > SYMMETRY_TOL:
        raise InvalidInputError(f"Hessian is not symmetric (defect {defect:.3e})")


def graph_geometry(du, d2u) -> GraphGeometry:
    """Induced metric quantities and principal curvatures of the graph.

    ``b_upper`` is taken from an eigen-decomposition of ``g_inv``; the
    closed rank-one form is only used as a cross-check in the tests.
    """
    du = np.asarray(du, dtype=float)
    d2u = np.asarray(d2u, dtype=float)
    if du.shape[-1] < 1 or d2u.shape[-2:] != (du.shape[-1], du.shape[-1]):
        raise InvalidInputError("gradient / Hessian shapes do not match")
    _check_symmetric(d2u)
    d2u = 0.5 * (d2u + np.swapaxes(d2u, -1, -2))

    v = np.sqrt(1.0 + np.sum(du * du, axis=-1))
    eye = _eye_like(d2u)
    g_inv = eye - _outer(du) / (v * v)[..., None, None]
    w, q = _sym_eig(g_inv)
    b_upper = _from_eig(np.sqrt(w), q)
    b_lower = _from_eig(1.0 / np.sqrt(w), q)
    a = b_upper @ d2u @ b_upper / v[..., None, None]
    a = 0.5 * (a + np.swapaxes(a, -1, -2))
    kappa = np.linalg.eigvalsh(a)
    return GraphGeometry(du, d2u, v, g_inv, b_upper, b_lower, a, kappa)


def b_upper_closed_form(du):
    du = np.asarray(du, dtype=float)
    v = np.sqrt(1.0 + np.sum(du * du, axis=-1))
    n = du.shape[-1]
    return np.eye(n) - _outer(du) / (v * (1.0 + v))[..., None, None]


def b_lower_closed_form(du):
    du = np.asarray(du, dtype=float)
    v = np.sqrt(1.0 + np.sum(du * du, axis=-1))
    n = du.shape[-1]
    return np.eye(n) + _outer(du) / (1.0 + v)[..., None, None]


def curvature_matrix(du, d2u):
    """``a = b r b / v`` using the closed form of ``b`` (fast path for the solver)."""
    du = np.asarray(du, dtype=float)
    v = np.sqrt(1.0 + np.sum(du * du, axis=-1))
    b = b_upper_closed_form(du)
    a = b @ d2u @ b / v[..., None, None]
    return 0.5 * (a + np.swapaxes(a, -1, -2))


def principal_curvature_f(kappa):
    """``sum(arctan(kappa))`` over the last axis."""
    return np.sum(np.arctan(np.asarray(kappa, dtype=float)), axis=-1)


def f_derivatives(kappa):
    """First derivatives and the (diagonal) second derivatives of F in kappa."""
    kappa = np.asarray(kappa, dtype=float)
    q = 1.0 + kappa * kappa
    return 1.0 / q, -2.0 * kappa / (q * q)


def matrix_f(m):
    """F evaluated on a symmetric matrix: trace of the matrix arctan."""
    return principal_curvature_f(np.linalg.eigvalsh(m))


def homotopy_value(t, du, d2u):
    """``t F[a(du, d2u)] + (1 - t) sum(arctan(eig(d2u)))``."""
    d2u = np.asarray(d2u, dtype=float)
    hess_part = matrix_f(d2u)
    if t == 0:
        return hess_part
    curv_part = matrix_f(curvature_matrix(du, d2u))
    return t * curv_part + (1.0 - t) * hess_part


def dual_curvature_matrix(y, d2u_star):
    """``a* = sqrt(1 + |y|^2) b*_lower r* b*_lower`` evaluated at the dual point ``y``."""
    y = np.asarray(y, dtype=float)
    w = np.sqrt(1.0 + np.sum(y * y, axis=-1))
    b = b_lower_closed_form(y)
    a = w[..., None, None] * (b @ d2u_star @ b)
    return 0.5 * (a + np.swapaxes(a, -1, -2))


def dual_homotopy_value(t, y, d2u_star):
    """Operator of the Legendre-dual problem: same blend with ``a`` replaced by ``a*``."""
    d2u_star = np.asarray(d2u_star, dtype=float)
    hess_part = matrix_f(d2u_star)
    if t == 0:
        return hess_part
    return t * matrix_f(dual_curvature_matrix(y, d2u_star)) + (1.0 - t) * hess_part


@dataclass(frozen=True)
class Linearization:
    """Derivatives of the homotopy operator at one (or many) points.

    ``g_matrix`` is the symmetric gradient with respect to the Hessian
    (``dG = tr(g_matrix dR) + g_gradient . dp``).  ``trace_g`` and
    ``trace_f`` are the traces of the curvature-operator parts, i.e. of
    ``b F' b / v`` and of ``F' = (I + a^2)^{-1}``; they do not depend on t.
    """

    g_matrix: np.ndarray
    g_gradient: np.ndarray
    trace_g: np.ndarray
    trace_f: np.ndarray


def _arctan_gradient(m):
    # d tr(arctan M) / dM = (I + M^2)^{-1}; valid for repeated eigenvalues too
    eye = _eye_like(m)
    return np.linalg.inv(eye + m @ m)


def _linearize(t, du, d2u):
    du = np.asarray(du, dtype=float)
    d2u = np.asarray(d2u, dtype=float)
    v = np.sqrt(1.0 + np.sum(du * du, axis=-1))
    b = b_upper_closed_form(du)
    a = b @ d2u @ b / v[..., None, None]
    a = 0.5 * (a + np.swapaxes(a, -1, -2))
    fp = _arctan_gradient(a)
    g_curv = b @ fp @ b / v[..., None, None]
    fa = fp @ a
    tr_fa = np.trace(fa, axis1=-2, axis2=-1)
    bfap = np.einsum("...ij,...j->...i", b @ fa, du)
    g_grad = -du * (tr_fa / (v * v))[..., None] - (2.0 / v)[..., None] * bfap
    if t == 1:
        g_mat = g_curv
    else:
        g_mat = t * g_curv + (1.0 - t) * _arctan_gradient(d2u)
    return Linearization(
        g_matrix=g_mat,
        g_gradient=t * g_grad,
        trace_g=np.trace(g_curv, axis1=-2, axis2=-1),
        trace_f=np.trace(fp, axis1=-2, axis2=-1),
    )


def linearization(t, du, d2u) -> Linearization:
    """Analytic derivatives of ``homotopy_value`` in (Hessian, gradient).

    Raises :class:`DomainError` unless ``d2u`` is positive definite.
    """
    d2u = np.asarray(d2u, dtype=float)
    _check_symmetric(d2u)
    if np.any(np.linalg.eigvalsh(d2u)[..., 0] <= 0.0):
        raise DomainError("linearization requires a positive definite Hessian")
    return _linearize(t, du, d2u)


def dual_linearization_matrix(t, y, d2u_star):
    """Gradient of ``dual_homotopy_value`` with respect to the dual Hessian."""
    y = np.asarray(y, dtype=float)
    w = np.sqrt(1.0 + np.sum(y * y, axis=-1))
    b = b_lower_closed_form(y)
    a = w[..., None, None] * (b @ d2u_star @ b)
    a = 0.5 * (a + np.swapaxes(a, -1, -2))
    g = w[..., None, None] * (b @ _arctan_gradient(a) @ b)
    if t == 1:
        return g
    return t * g + (1.0 - t) * _arctan_gradient(d2u_star)


def trace_bounds(du):
    """(sigma1, sigma2) of the trace sandwich: extreme eigenvalues of g^{-1} over v."""
    du = np.asarray(du, dtype=float)
    v = np.sqrt(1.0 + np.sum(du * du, axis=-1))
    # eigenvalues of g^{-1} are 1/v^2 (along du) and 1 (orthogonal)
    if du.shape[-1] == 1:
        return 1.0 / v**3, 1.0 / v**3
    return 1.0 / v**3, 1.0 / v


def check_structure_conditions(sample_count=10_000, slab=(1.0, 2.0), n=2, cap=1e3,
                               upper=10.0, seed=0) -> dict:
    """Random-sample check of the structure conditions of F on the closed positive cone.

    (i)   F' > 0 and the Hessian of F is negative semi-definite on [0, upper]^n;
    (ii)  mu -> -F(1/mu) has negative semi-definite Hessian on (0, upper]^n;
    (iii) on the slab {min kappa <= s1, max kappa >= s2, kappa <= cap} the sums
          sum F'_i and sum F'_i kappa_i^2 stay in a finite positive bracket,
          which is measured and reported.
    """
    s1, s2 = slab
    if s1 <= 0 or s2 <= 0:
        raise InvalidInputError("slab bounds must be positive")
    rng = np.random.default_rng(seed)

    kappa = rng.uniform(0.0, upper, size=(sample_count, n))
    grad, hdiag = f_derivatives(kappa)
    hess = np.zeros((sample_count, n, n))
    idx = np.arange(n)
    hess[:, idx, idx] = hdiag
    monotone_violations = int(np.sum(np.any(grad <= 0.0, axis=1)))
    concave_violations = int(np.sum(np.linalg.eigvalsh(hess)[:, -1] > 1e-14))

    mu = rng.uniform(0.0, upper, size=(sample_count, n))
    mu = np.where(mu == 0.0, upper, mu)
    # d^2/dmu^2 [-arctan(1/mu)] = -2 mu / (1 + mu^2)^2
    dual_hess = np.zeros((sample_count, n, n))
    dual_hess[:, idx, idx] = -2.0 * mu / (1.0 + mu * mu) ** 2
    dual_violations = int(np.sum(np.linalg.eigvalsh(dual_hess)[:, -1] > 1e-14))

    slab_k = rng.uniform(0.0, cap, size=(sample_count, n))
    lo = rng.integers(0, n, size=sample_count)
    hi = (lo + 1 + rng.integers(0, n - 1, size=sample_count)) % n if n > 1 else lo
    rows = np.arange(sample_count)
    slab_k[rows, lo] = rng.uniform(0.0, s1, size=sample_count)
    if n > 1:
        slab_k[rows, hi] = rng.uniform(s2, cap, size=sample_count)
    g_slab, _ = f_derivatives(slab_k)
    sum_grad = g_slab.sum(axis=1)
    sum_grad_k2 = (g_slab * slab_k**2).sum(axis=1)
    lam1 = float(min(sum_grad.min(), sum_grad_k2.min()))
    lam2 = float(max(sum_grad.max(), sum_grad_k2.max()))

    return {
        "samples": sample_count,
        "n": n,
        "monotonicity_violations": monotone_violations,
        "concavity_violations": concave_violations,
        "dual_concavity_violations": dual_violations,
        "slab": [s1, s2],
        "cap": cap,
        "sum_grad_range": [float(sum_grad.min()), float(sum_grad.max())],
        "sum_grad_kappa2_range": [float(sum_grad_k2.min()), float(sum_grad_k2.max())],
        "lambda1": lam1,
        "lambda2": lam2,
        "bracket_ok": bool(0.0 < lam1 <= lam2 < np.inf),
    }


def trace_inequality_holds(A, B, C, tol=1e-10):
    """``2 tr(ABC) <= tr(ABB) + tr(ACC)`` for psd A and symmetric B, C.

    Returns ``(holds, slack)`` with ``slack = rhs - lhs``.
    """
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    C = np.asarray(C, dtype=float)
    if np.linalg.eigvalsh(0.5 * (A + A.T))[0] < -tol:
        raise InvalidInputError("A must be positive semi-definite")
    lhs = 2.0 * np.trace(A @ B @ C)
    rhs = np.trace(A @ B @ B) + np.trace(A @ C @ C)
    slack = float(rhs - lhs)
    return slack >= -tol, slack


def p_nonnegativity(kappa):
    """The quantity ``(sum F'k)(sum k^2) - (sum k)(sum F'k^2)`` in its symmetric-sum form.

    ``1/2 sum_{i,j} F'_i F'_j (k_i + k_j)(k_i - k_j)^2 k_i k_j``, which avoids
    cancellation when the curvatures are nearly equal.
    """
    kappa = np.asarray(kappa, dtype=float)
    if np.any(kappa < 0):
        raise InvalidInputError("curvatures must be non-negative")
    fp, _ = f_derivatives(kappa)
    ki = kappa[..., :, None]
    kj = kappa[..., None, :]
    terms = fp[..., :, None] * fp[..., None, :] * (ki + kj) * (ki - kj) ** 2 * ki * kj
    return 0.5 * terms.sum(axis=(-2, -1))
