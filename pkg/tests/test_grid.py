import numpy as np
import pytest
from scipy.optimize import brentq

from slpotential.domains import disc_domain, ellipse_domain, inward_normal, superellipse_domain
from slpotential.errors import ConfigError, GeometryError, InvalidInputError
from slpotential.grid import build_grid, derivatives, eval_derivatives

DOMAINS = {
    "disc": disc_domain(),
    "ellipse": ellipse_domain([1.3, 0.8]),
    "superellipse": superellipse_domain(1, 1, 4, 0.25),
    "shifted": ellipse_domain([1.3, 0.8], center=[0.2, -0.1]),
}


def smooth(x, y):
    """sin(x) cosh(y) with exact first and second derivatives."""
    u = np.sin(x) * np.cosh(y)
    du = np.stack([np.cos(x) * np.cosh(y), np.sin(x) * np.sinh(y)], -1)
    d2u = np.empty(x.shape + (2, 2))
    d2u[:, 0, 0] = -u
    d2u[:, 1, 1] = u
    d2u[:, 0, 1] = d2u[:, 1, 0] = np.cos(x) * np.sinh(y)
    return u, du, d2u


def test_layout():
    g = build_grid(disc_domain(), 8, 16)
    assert g.size == 1 + 8 * 16
    assert g.index(0, 5) == 0 and g.index(1, 0) == 1 and g.index(8, 15) == g.size - 1
    assert np.array_equal(g.boundary_idx, g.ring(8))
    assert g.interior_idx.size + g.boundary_idx.size == g.size
    assert np.all(g.weights[g.boundary_idx] == 0) and g.weights.sum() == pytest.approx(1.0)
    with pytest.raises(InvalidInputError):
        g.index(9, 0)


@pytest.mark.parametrize("n_r,n_phi", [(7, 16), (8, 15), (8, 14)])
def test_resolution_rules(n_r, n_phi):
    with pytest.raises(ConfigError):
        build_grid(disc_domain(), n_r, n_phi)


def test_bad_center():
    d = disc_domain()
    with pytest.raises(GeometryError):
        build_grid(type(d)(**{**d.__dict__, "center": np.array([5.0, 0.0])}), 8, 16)


def test_gamma_examples():
    assert np.allclose(build_grid(disc_domain(), 8, 16).gamma, 1.0, atol=1e-15)
    g = build_grid(ellipse_domain([1.3, 0.8]), 8, 16)
    assert g.gamma[0] == pytest.approx(1.3, abs=1e-14)
    assert g.gamma[4] == pytest.approx(0.8, abs=1e-14)
    s = superellipse_domain(1, 1, 4, 0.25)
    g = build_grid(s, 8, 16)
    w = np.array([1.0, 1.0]) / np.sqrt(2)
    r = brentq(lambda r: s.h(r * w), 0.1, 2.0, xtol=1e-15)
    assert g.gamma[2] == pytest.approx(r, abs=1e-12)


@pytest.mark.parametrize("name", DOMAINS)
def test_boundary_ring_on_level_set(name):
    g = build_grid(DOMAINS[name], 32, 64)
    b = g.boundary_idx
    assert np.max(np.abs(g.domain.h(g.points[b]))) <= 1e-10
    assert np.max(np.abs(g.normals - inward_normal(g.domain, g.points[b]))) <= 1e-10


@pytest.mark.parametrize("n", [16, 32, 64])
@pytest.mark.parametrize("name", DOMAINS)
def test_affine_gradient_exact(name, n):
    g = build_grid(DOMAINS[name], n, 2 * n)
    x, y = g.points.T
    du, _ = derivatives(g, 3 + 2 * x - y)
    assert np.max(np.abs(du - [2, -1])) <= 1e-12


@pytest.mark.parametrize("name", DOMAINS)
def test_affine_hessian_exact(name):
    g = build_grid(DOMAINS[name], 16, 32)
    x, y = g.points.T
    _, d2u = derivatives(g, 2 * x - y)
    assert np.max(np.abs(d2u)) <= 1e-12


@pytest.mark.parametrize("n", [16, 32, 64])
@pytest.mark.parametrize("name", DOMAINS)
def test_affine_hessian_at_roundoff_floor(name, n):
    # the rounding of the input values (~eps |u|) is amplified by the row
    # sums of the second-difference weights, which grow like 1/(r dphi)^2
    # next to the pole; beyond that floor the stencils annihilate affine u
    g = build_grid(DOMAINS[name], n, 2 * n)
    x, y = g.points.T
    u = 3 + 2 * x - y
    _, d2u = derivatives(g, u)
    eps = np.finfo(float).eps
    for k, name_ in ((0, "dxx"), (1, "dxy"), (2, "dyy")):
        floor = 4 * eps * np.abs(u).max() * np.asarray(abs(g.ops[name_]).sum(axis=1)).ravel()
        err = np.abs(d2u.reshape(-1, 4)[:, [0, 1, 3][k]])
        assert np.all(err <= 1e-12 + floor)


@pytest.mark.parametrize("name", DOMAINS)
def test_quadratic_exactness(name):
    g = build_grid(DOMAINS[name], 32, 64)
    x, y = g.points.T
    du, d2u = derivatives(g, 0.5 * x**2 + x * y - 0.25 * y**2)
    assert np.max(np.abs(d2u - [[1, 1], [1, -0.5]])) <= 1e-10
    assert np.max(np.abs(du - np.stack([x + y, x - 0.5 * y], -1))) <= 1e-10


def test_half_norm_squared_on_disc():
    g = build_grid(disc_domain(), 32, 64)
    du, d2u = derivatives(g, 0.5 * np.sum(g.points**2, -1))
    assert np.max(np.abs(d2u[1:] - np.eye(2))) <= 1e-10
    assert np.max(np.abs(du - g.points)) <= 1e-10


@pytest.mark.parametrize("name", DOMAINS)
def test_second_order_convergence(name):
    errs = []
    for n in (16, 32, 64):
        g = build_grid(DOMAINS[name], n, 2 * n)
        x, y = g.points.T
        u, du_ex, d2u_ex = smooth(x, y)
        du, d2u = derivatives(g, u)
        errs.append(max(np.abs(du - du_ex).max(), np.abs(d2u - d2u_ex).max()))
    errs = np.array(errs)
    assert np.all(errs[:-1] / errs[1:] >= 3.5), errs


def test_eval_derivatives_matches_batch():
    g = build_grid(ellipse_domain([1.3, 0.8]), 16, 32)
    x, y = g.points.T
    u = np.sin(x) * np.cosh(y)
    du, d2u = derivatives(g, u)
    for k in (0, 1, 100, g.size - 1):
        val, dk, d2k = eval_derivatives(g, u, k)
        assert val == u[k]
        assert np.allclose(dk, du[k], atol=1e-13) and np.allclose(d2k, d2u[k], atol=1e-12)
    with pytest.raises(IndexError):
        eval_derivatives(g, u, g.size)
    with pytest.raises(InvalidInputError):
        derivatives(g, u[:-1])


def test_constants_annihilated():
    g = build_grid(superellipse_domain(1, 1, 4, 0.25), 32, 64)
    du, d2u = derivatives(g, np.full(g.size, 123.456))
    assert np.max(np.abs(du)) == 0 and np.max(np.abs(d2u)) == 0


def test_weights_integrate():
    g = build_grid(ellipse_domain([1.3, 0.8]), 32, 64)
    x, y = g.points.T
    # weights are normalized averages; for the centred ellipse odd moments vanish
    assert abs(g.weights @ x) <= 1e-12 and abs(g.weights @ y) <= 1e-12
    assert np.all(g.weights >= 0)


def test_mesh_size_halves():
    hs = [build_grid(disc_domain(), n, 2 * n).h for n in (16, 32, 64)]
    assert hs[0] / hs[1] == pytest.approx(2, rel=0.05) and hs[1] / hs[2] == pytest.approx(2, rel=0.05)
