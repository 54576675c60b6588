import numpy as np
import pytest
from conftest import solved

from slpotential.domains import disc_domain, ellipse_domain
from slpotential.errors import InvalidInputError, SingularityError
from slpotential.grid import build_grid, derivatives
from slpotential.legendre import (DualField, constant_offset_deviation, dual_residual, dual_residual_norm,
                                  gradient_roundtrip, legendre_transform)
from slpotential.operator import (curvature_matrix, dual_curvature_matrix, principal_curvature_f)
from slpotential.solver import SolveConfig, continuation_solve

DISC = disc_domain()


@pytest.fixture(scope="module")
def grids():
    return build_grid(DISC, 32, 64), build_grid(DISC, 32, 64)


@pytest.fixture(scope="module")
def conjugated():
    grid, state, _, _ = solved("disc", "disc", 32, 64)
    grid_dual = build_grid(DISC, 32, 64)
    return grid, state, grid_dual, legendre_transform(grid, state.u, grid_dual, c=state.c, t=1.0)


def test_self_conjugate_quadratic(grids):
    g, gd = grids
    u = 0.5 * np.sum(g.points**2, -1)
    dual = legendre_transform(g, u, gd, c=np.pi / 2, t=0.0)
    assert np.max(np.abs(dual.u_star - 0.5 * np.sum(gd.points**2, -1))) <= 1e-6
    assert dual.c_dual + dual.c == np.pi and dual.c_dual == pytest.approx(np.pi / 2)
    assert dual_residual_norm(dual) <= 1e-6
    assert gradient_roundtrip(g, u, gd, dual.u_star).error <= 1e-6


def test_anisotropic_quadratic():
    # Du = diag(2, 1/2) x maps ellipse(0.5, 2) onto the unit disc
    g = build_grid(ellipse_domain([0.5, 2.0]), 32, 64)
    gd = build_grid(DISC, 32, 64)
    x, y = g.points.T
    u = 0.5 * (2 * x**2 + 0.5 * y**2)
    dual = legendre_transform(g, u, gd, t=0.0)
    p, q = gd.points.T
    assert np.max(np.abs(dual.u_star - 0.5 * (0.5 * p**2 + 2 * q**2))) <= 1e-6
    rt = gradient_roundtrip(g, u, gd, dual.u_star)
    assert rt.error <= 1e-6 and rt.coverage_gaps == 0


def test_rejects_nonconvex(grids):
    g, gd = grids
    with pytest.raises(InvalidInputError):
        legendre_transform(g, -0.5 * np.sum(g.points**2, -1), gd)


def test_singular_dual_hessian(grids):
    g, gd = grids
    flat = DualField(grid_dual=gd, u_star=gd.points[:, 0].copy(), c_dual=np.pi / 2, t=0.0)
    with pytest.raises(SingularityError):
        dual_residual(flat)


def test_dual_fixed_point():
    k = np.array([1.0, 1.0])
    assert 2 * np.pi / 2 - principal_curvature_f(1 / k) == pytest.approx(np.pi / 2)


def test_t1_dual_residual(conjugated):
    grid, state, grid_dual, dual = conjugated
    res = dual_residual(dual)
    assert np.all(res[grid_dual.boundary_idx] == 0)
    assert dual_residual_norm(dual) <= 10 * (state.residual_norm + 5 * grid.h**2)


def test_t1_double_conjugate(conjugated):
    grid, state, grid_dual, dual = conjugated
    back = legendre_transform(grid_dual, dual.u_star, grid, t=1.0)
    assert constant_offset_deviation(back.u_star, state.u) <= 5 * grid.h**2


def test_t1_matches_exact_conjugate(conjugated):
    # conjugate of the spherical cap sqrt(2) - sqrt(2 - |x|^2)
    _, _, grid_dual, dual = conjugated
    exact = np.sqrt(2) * np.sqrt(1 + np.sum(grid_dual.points**2, -1))
    assert constant_offset_deviation(dual.u_star, exact) <= 5 * grid_dual.h**2


def test_roundtrip_second_order():
    errs = []
    for n in (32, 64):
        g, state, _, _ = solved("disc", "disc", n, 2 * n)
        gd = build_grid(DISC, n, 2 * n)
        dual = legendre_transform(g, state.u, gd, c=state.c)
        errs.append(gradient_roundtrip(g, state.u, gd, dual.u_star).error)
    assert errs[0] / errs[1] >= 3


def test_inverse_hessians_and_curvature_symmetry(conjugated):
    grid, state, grid_dual, dual = conjugated
    du, d2u = derivatives(grid, state.u)
    dus, d2us = derivatives(grid_dual, dual.u_star)
    # pair every dual node with the primal node closest to its preimage
    inner = grid.interior_idx[np.linalg.norm(grid.points[grid.interior_idx], axis=-1) < 0.8]
    k_star = np.argmin(np.linalg.norm(grid_dual.points[None, :, :] - du[inner, None, :], axis=-1), axis=1)
    close = np.linalg.norm(grid_dual.points[k_star] - du[inner], axis=-1) <= 1e-3
    a, b = inner[close], k_star[close]
    assert a.size > 0
    prod = np.einsum("nij,njk->nik", d2us[b], d2u[a])
    assert np.max(np.abs(prod - np.eye(2))) <= 10 * grid.h
    kap = np.linalg.eigvalsh(curvature_matrix(du[a], d2u[a]))
    kap_star = np.linalg.eigvalsh(dual_curvature_matrix(grid_dual.points[b], d2us[b]))
    total = principal_curvature_f(kap) + principal_curvature_f(kap_star)
    assert np.max(np.abs(total - np.pi)) <= 10 * grid.h


def test_direct_dual_solve_agrees(conjugated):
    grid, state, grid_dual, dual = conjugated
    direct = continuation_solve(DISC, DISC, grid_dual, SolveConfig(operator="dual"))
    assert direct.converged
    assert direct.c == pytest.approx(np.pi - state.c, abs=5 * grid.h**2)
    assert constant_offset_deviation(direct.u, dual.u_star) <= 5 * grid.h**2
