"""Bordered Newton solver and homotopy continuation for the discrete problem.

Unknowns are the nodal values of ``u`` plus the constant ``c``.  Each node
carries one equation: ``G^t(Du, D^2u) - c`` at non-boundary nodes and
``h~(Du)`` on the boundary ring.  A last row fixes the additive constant,
either by a weighted mean or by pinning the pole.

With ``operator="dual"`` the same machinery solves the Legendre-dual
problem on the target domain: the interior operator is evaluated at the
node position ``y`` and the boundary condition uses the source's defining
function.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field, replace

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .domains import DomainSpec
from .errors import ConfigError, ConvergenceError, ConvexityLostError, InvalidInputError
from .grid import Grid, derivatives
from .operator import _linearize, dual_homotopy_value, dual_linearization_matrix, homotopy_value

FAILURE_KINDS = ("line_search_stall", "max_iters", "convexity_lost")


@dataclass(frozen=True)
class SolveConfig:
    newton_tol: float = 1e-10
    max_newton_iters: int = 30
    armijo: float = 1e-4
    min_damping: float = 2.0**-20
    homotopy_steps: int = 10
    adaptive: bool = False
    min_t_step: float = 1.0 / 256
    convexity_guard: float = 1e-8
    normalization: str = "mean"  # or "pole"
    operator: str = "primal"  # or "dual"

    def __post_init__(self):
        if not (self.newton_tol > 0 and self.armijo > 0 and self.min_damping > 0):
            raise ConfigError("tolerances must be positive")
        if self.max_newton_iters < 1 or self.homotopy_steps < 1:
            raise ConfigError("iteration and step counts must be >= 1")
        if not (0 < self.min_t_step <= 1):
            raise ConfigError("min_t_step must lie in (0, 1]")
        if self.normalization not in ("mean", "pole"):
            raise ConfigError(f"unknown normalization {self.normalization!r}")
        if self.operator not in ("primal", "dual"):
            raise ConfigError(f"unknown operator {self.operator!r}")


@dataclass
class SolveState:
    u: np.ndarray
    c: float
    t: float
    residual_norm: float = np.inf
    newton_history: list = field(default_factory=list)  # (iteration, residual, step)
    converged: bool = False
    failure_kind: str | None = None
    t_trace: list = field(default_factory=list)  # dicts {t, c, newton_iters, residual}
    condition_estimate: float | None = None

    def copy(self):
        return replace(self, u=self.u.copy(), newton_history=list(self.newton_history),
                       t_trace=list(self.t_trace))


# -- assembly -----------------------------------------------------------------

def _check_convexity(d2u, guard):
    lam = np.linalg.eigvalsh(d2u)[:, 0]
    k = int(np.argmin(lam))
    if not lam[k] >= guard:
        raise ConvexityLostError(f"discrete Hessian lost convexity at node {k} (min eigenvalue {lam[k]:.3e})",
                                 min_eigenvalue=float(lam[k]), node=k)


def interior_values(grid: Grid, u, t, operator="primal"):
    """Operator value at every node (boundary nodes included) plus the derivatives used."""
    du, d2u = derivatives(grid, u)
    if operator == "dual":
        g = dual_homotopy_value(t, grid.points, d2u)
    else:
        g = homotopy_value(t, du, d2u)
    return g, du, d2u


def _normalization_row(grid: Grid, normalization):
    if normalization == "pole":
        row = np.zeros(grid.size)
        row[grid.pole] = 1.0
        return row
    return grid.weights


def assemble_residual(grid: Grid, target: DomainSpec, u, c, t, operator="primal",
                      normalization="mean", convexity_guard=1e-8):
    """Residual vector of length ``grid.size + 1`` ordered like the unknowns.

    Raises :class:`ConvexityLostError` when the discrete Hessian has an
    eigenvalue below ``convexity_guard`` at any node.
    """
    u = np.asarray(u, dtype=float)
    if u.shape != (grid.size,):
        raise InvalidInputError("field length does not match grid")
    g, du, d2u = interior_values(grid, u, t, operator)
    _check_convexity(d2u, convexity_guard)
    res = np.empty(grid.size + 1)
    res[:-1] = g - c
    bnd = grid.boundary_idx
    res[bnd] = target.h(du[bnd])
    res[-1] = _normalization_row(grid, normalization) @ u
    return res


def assemble_jacobian(grid: Grid, target: DomainSpec, u, c, t, operator="primal",
                      normalization="mean", convexity_guard=1e-8):
    """Sparse (CSC) Jacobian of :func:`assemble_residual` in (u, c)."""
    u = np.asarray(u, dtype=float)
    du, d2u = derivatives(grid, u)
    _check_convexity(d2u, convexity_guard)
    if operator == "dual":
        gm = dual_linearization_matrix(t, grid.points, d2u)
        gg = np.zeros_like(du)
    else:
        lin = _linearize(t, du, d2u)
        gm, gg = lin.g_matrix, lin.g_gradient
    inner = (~grid.is_boundary).astype(float)
    bnd = grid.is_boundary.astype(float)
    hp = target.dh(du)
    o = grid.ops
    coef = {
        "dxx": inner * gm[:, 0, 0],
        "dxy": inner * 2.0 * gm[:, 0, 1],
        "dyy": inner * gm[:, 1, 1],
        "dx": inner * gg[:, 0] + bnd * hp[:, 0],
        "dy": inner * gg[:, 1] + bnd * hp[:, 1],
    }
    J = sum(sp.diags(coef[name]) @ o[name] for name in ("dxx", "dxy", "dyy", "dx", "dy"))
    c_col = sp.csr_matrix(-inner[:, None])
    norm_row = sp.csr_matrix(np.append(_normalization_row(grid, normalization), 0.0)[None, :])
    return sp.vstack([sp.hstack([J, c_col]), norm_row]).tocsc()


# -- initial guess --------------------------------------------------------------

def moment_matched_map(source: DomainSpec, target: DomainSpec):
    """Affine map ``x -> S x + m`` carrying the source's centroid and covariance to the target's."""
    _, mu, C = source.moments()
    _, mu_t, C_t = target.moments()

    def sqrtm(a):
        w, q = np.linalg.eigh(a)
        return (q * np.sqrt(w)) @ q.T

    r = sqrtm(C)
    r_inv = np.linalg.inv(r)
    S = r_inv @ sqrtm(r @ C_t @ r) @ r_inv
    S = 0.5 * (S + S.T)
    return S, mu_t - S @ mu


def initial_guess(grid: Grid, source: DomainSpec, target: DomainSpec, scale=1.0):
    """Quadratic ``u0 = (scale / 2) x^T S x + m . x`` shifted to satisfy the mean normalization.

    ``grid`` covers ``source``; for the dual problem pass the target domain's
    grid as ``grid`` and ``source`` and the original source as ``target``.
    """
    S, m = moment_matched_map(source, target)
    x = grid.points
    u = 0.5 * scale * np.einsum("ki,ij,kj->k", x, S, x) + x @ m
    return u - grid.weights @ u


def initial_state(grid, source, target, t=0.0, scale=1.0, operator="primal", normalization="mean"):
    u = initial_guess(grid, source, target, scale=scale)
    if normalization == "pole":
        u = u - u[grid.pole]
    g, _, _ = interior_values(grid, u, t, operator)
    inner = ~grid.is_boundary
    w = grid.weights[inner]
    c = float(np.sum(w * g[inner]) / np.sum(w))
    return SolveState(u=u, c=c, t=t)


# -- Newton ---------------------------------------------------------------------

def _residual_or_none(grid, target, z, t, cfg):
    try:
        return assemble_residual(grid, target, z[:-1], z[-1], t, cfg.operator, cfg.normalization,
                                 cfg.convexity_guard)
    except ConvexityLostError:
        return None


def solve_at_t(grid: Grid, source: DomainSpec, target: DomainSpec, t: float,
               initial: SolveState, config: SolveConfig | None = None) -> SolveState:
    """Damped Newton at fixed ``t``.

    Returns a state with ``converged`` set; on failure ``failure_kind`` is one
    of ``FAILURE_KINDS`` and the state holds the last accepted iterate.
    """
    cfg = config or SolveConfig()
    z = np.append(np.asarray(initial.u, dtype=float), initial.c)
    res = _residual_or_none(grid, target, z, t, cfg)
    history = []
    if res is None:
        return SolveState(u=z[:-1], c=float(z[-1]), t=t, converged=False,
                          failure_kind="convexity_lost", newton_history=history)
    f0 = float(np.max(np.abs(res)))
    history.append((0, f0, 0.0))
    kind = None
    for it in range(1, cfg.max_newton_iters + 1):
        if f0 <= cfg.newton_tol:
            break
        J = assemble_jacobian(grid, target, z[:-1], z[-1], t, cfg.operator, cfg.normalization,
                              cfg.convexity_guard)
        step = spla.splu(J, permc_spec="COLAMD").solve(-res)
        lam = 1.0
        saw_convexity_loss = False
        while lam >= cfg.min_damping:
            trial = z + lam * step
            r_new = _residual_or_none(grid, target, trial, t, cfg)
            if r_new is None:
                saw_convexity_loss = True
            else:
                f_new = float(np.max(np.abs(r_new)))
                if f_new <= (1.0 - cfg.armijo * lam) * f0:
                    break
            lam *= 0.5
        else:
            kind = "convexity_lost" if saw_convexity_loss else "line_search_stall"
            break
        z, res, f0 = trial, r_new, f_new
        history.append((it, f0, lam))
    converged = f0 <= cfg.newton_tol
    if not converged and kind is None:
        kind = "max_iters"
    return SolveState(u=z[:-1], c=float(z[-1]), t=t, residual_norm=f0, newton_history=history,
                      converged=converged, failure_kind=None if converged else kind)


def condition_estimate(grid, target, state: SolveState, config: SolveConfig | None = None) -> float:
    """1-norm condition estimate of the bordered Jacobian (deterministic, single probe column)."""
    cfg = config or SolveConfig()
    J = assemble_jacobian(grid, target, state.u, state.c, state.t, cfg.operator, cfg.normalization,
                          cfg.convexity_guard)
    lu = spla.splu(J, permc_spec="COLAMD")
    n = J.shape[0]
    inv = spla.LinearOperator((n, n), matvec=lu.solve, rmatvec=lambda x: lu.solve(x, trans="T"),
                              dtype=float)
    return float(spla.onenormest(J, t=1) * spla.onenormest(inv, t=1))


def _trace_entry(state):
    return {"t": float(state.t), "c": float(state.c),
            "newton_iters": len(state.newton_history) - 1, "residual": float(state.residual_norm)}


def _fail(state, trace, message):
    err_cls = ConvexityLostError if state.failure_kind == "convexity_lost" else ConvergenceError
    if err_cls is ConvexityLostError:
        err = ConvexityLostError(message)
        err.trace, err.state, err.kind = trace, state, state.failure_kind
        raise err
    raise ConvergenceError(message, trace=trace, state=state, kind=state.failure_kind)


def continuation_solve(source: DomainSpec, target: DomainSpec, grid: Grid,
                       config: SolveConfig | None = None, initial: SolveState | None = None,
                       t_final: float = 1.0) -> SolveState:
    """March ``t`` from 0 to ``t_final``, warm-starting each stage.

    Uniform mode aims at the points ``k / homotopy_steps`` and bisects a
    failed step until it succeeds or drops below ``min_t_step``.  Adaptive
    mode additionally doubles the step after two consecutive easy stages.
    Raises :class:`ConvergenceError` (or :class:`ConvexityLostError` when
    convexity loss was the last failure) with the partial trace attached.
    """
    cfg = config or SolveConfig()
    start = initial if initial is not None else initial_state(
        grid, source, target, operator=cfg.operator, normalization=cfg.normalization)
    state = solve_at_t(grid, source, target, 0.0, replace(start, t=0.0), cfg)
    trace = [_trace_entry(state)]
    if not state.converged:
        state.t_trace = trace
        _fail(state, trace, f"t=0 stage failed ({state.failure_kind})")
    base = 1.0 / cfg.homotopy_steps
    dt = min(base, t_final)
    easy = 0
    while state.t < t_final - 1e-14:
        if cfg.adaptive:
            t_next = min(state.t + dt, t_final)
        else:
            # next uniform breakpoint, but no further than the current step allows
            k = np.floor(state.t * cfg.homotopy_steps + 1e-9) + 1
            t_next = min(k / cfg.homotopy_steps, state.t + dt, t_final)
        if t_final - t_next < 1e-12:
            t_next = t_final
        t_next = float(t_next)
        trial = solve_at_t(grid, source, target, t_next, state, cfg)
        if trial.converged:
            state = trial
            trace.append(_trace_entry(state))
            iters = len(state.newton_history) - 1
            easy = easy + 1 if iters <= 4 else 0
            if cfg.adaptive and easy >= 2:
                dt = min(2.0 * dt, 0.5)
                easy = 0
            elif not cfg.adaptive and np.isclose(state.t * cfg.homotopy_steps,
                                                 round(state.t * cfg.homotopy_steps)):
                dt = base
            continue
        easy = 0
        dt = 0.5 * (t_next - state.t)
        if dt < cfg.min_t_step - 1e-15:
            trial.t_trace = trace
            _fail(trial, trace, f"continuation stalled at t={state.t:.6g} ({trial.failure_kind})")
    state.t_trace = trace
    return state


def solve(source: DomainSpec, target: DomainSpec, grid: Grid, config: SolveConfig | None = None,
          initial: SolveState | None = None, t_final: float = 1.0,
          with_condition: bool = True) -> tuple[SolveState, float]:
    """Continuation solve plus wall time; attaches the condition estimate."""
    t0 = time.perf_counter()
    state = continuation_solve(source, target, grid, config, initial, t_final)
    if with_condition:
        state.condition_estimate = condition_estimate(grid, target, state, config)
    return state, time.perf_counter() - t0
