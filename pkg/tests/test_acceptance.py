"""End-to-end acceptance checks; each prints one PASS/FAIL line."""

import json
from pathlib import Path

import numpy as np
import pytest
import scipy.linalg
from conftest import CATALOG_RUNS, record_acceptance, solved

from slpotential.cli import main
from slpotential.diagnostics import run_diagnostics, slack, uniqueness_check
from slpotential.domains import disc_domain, ellipse_domain
from slpotential.grid import build_grid, derivatives
from slpotential.legendre import (constant_offset_deviation, dual_residual_norm, gradient_roundtrip,
                                  legendre_transform)
from slpotential.operator import (check_structure_conditions, graph_geometry, homotopy_value, linearization,
                                  p_nonnegativity, trace_bounds, trace_inequality_holds)
from slpotential.radial import radial_solve
from slpotential.solver import SolveConfig, continuation_solve, initial_state

CONFIGS = Path(__file__).resolve().parents[1] / "configs"
DISC = disc_domain()


def random_convex(rng, n):
    q, _ = np.linalg.qr(rng.normal(size=(n, n)))
    return rng.uniform(-3, 3, n), (q * rng.uniform(0.05, 10.0, n)) @ q.T


def test_criterion_1_operator_equivalence():
    rng = np.random.default_rng(1)
    eig_err, det_err = 0.0, 0.0
    for n in (2, 3):
        for _ in range(1000):
            du, d2u = random_convex(rng, n)
            g = graph_geometry(du, d2u)
            gen = scipy.linalg.eigh(d2u / g.v, np.eye(n) + np.outer(du, du), eigvals_only=True)
            eig_err = max(eig_err, np.max(np.abs(g.kappa - gen)))
            det_err = max(det_err, abs(np.linalg.det(g.a) * g.v ** (n + 2) / np.linalg.det(d2u) - 1))
    ok = eig_err <= 1e-10 and det_err <= 1e-10
    record_acceptance(1, ok, f"eigenvalue error {eig_err:.2e}, det identity rel. error {det_err:.2e}")
    assert ok


def test_criterion_2_structure_conditions():
    structure = [check_structure_conditions(sample_count=10_000, n=n, upper=10.0, seed=n) for n in (2, 3)]
    s_viol = sum(r["monotonicity_violations"] + r["concavity_violations"] + r["dual_concavity_violations"]
                 for r in structure)
    rng = np.random.default_rng(2)
    t_viol = 0
    for k in range(10_000):
        n = 1 + k % 5
        m = rng.normal(size=(n, n))
        B, C = rng.normal(size=(2, n, n))
        ok, _ = trace_inequality_holds(m @ m.T, B + B.T, C + C.T)
        t_viol += not ok
    p_viol = sum(int(np.sum(p_nonnegativity(rng.uniform(0, 10, size=(10_000, n))) < 0)) for n in range(1, 6))
    ok = s_viol == 0 and t_viol == 0 and p_viol == 0
    record_acceptance(2, ok, f"violations: structure {s_viol}, trace inequality {t_viol}, P >= 0 {p_viol}")
    assert ok


def _fd(t, du, d2u, eps=1e-4):
    n = du.size

    def d(f):
        c = lambda e: (f(e) - f(-e)) / (2 * e)  # noqa: E731
        return (4 * c(eps / 2) - c(eps)) / 3

    gm, gg = np.zeros((n, n)), np.zeros(n)
    for i in range(n):
        for j in range(i, n):
            E = np.zeros((n, n))
            E[i, j] = E[j, i] = 1.0
            val = d(lambda e: homotopy_value(t, du, d2u + e * E))
            gm[i, j] = gm[j, i] = val if i == j else 0.5 * val
        gg[i] = d(lambda e: homotopy_value(t, du + e * np.eye(n)[i], d2u))
    return gm, gg


def test_criterion_3_linearization():
    rng = np.random.default_rng(3)
    worst, sandwich_bad = 0.0, 0
    for k in range(1000):
        n = 2 + k % 2
        du, d2u = random_convex(rng, n)
        t = rng.uniform()
        lin = linearization(t, du, d2u)
        gm, gg = _fd(t, du, d2u)
        worst = max(worst, np.max(np.abs(lin.g_matrix - gm) / np.maximum(1, np.abs(gm))),
                    np.max(np.abs(lin.g_gradient - gg) / np.maximum(1, np.abs(gg))))
        s1, s2 = trace_bounds(du)
        tol = 1e-12 * lin.trace_f
        sandwich_bad += not (s1 * lin.trace_f - tol <= lin.trace_g <= s2 * lin.trace_f + tol)
    ok = worst <= 1e-6 and sandwich_bad == 0
    record_acceptance(3, ok, f"max relative deviation {worst:.2e}, trace sandwich violations {sandwich_bad}")
    assert ok


def test_criterion_4_exact_t0():
    grid, st, _, _ = solved("disc", "disc", 32, 64, t_final=0.0)
    dev = constant_offset_deviation(st.u, 0.5 * np.sum(grid.points**2, -1))
    err_disc = abs(st.c - np.pi / 2)
    errs = [err_disc]
    for a in ((1.3, 0.8), (1.6, 0.7)):
        e = ellipse_domain(list(a))
        g = build_grid(e, 32, 64)
        s = continuation_solve(e, DISC, g, t_final=0.0)
        errs.append(abs(s.c - (np.arctan(1 / a[0]) + np.arctan(1 / a[1]))))
    ok = max(errs) <= 1e-6 and dev <= 1e-6
    record_acceptance(4, ok, f"|c - exact| max {max(errs):.2e}, u - |x|^2/2 deviation {dev:.2e}")
    assert ok


def test_criterion_5_oracle():
    c_ref = radial_solve(1.0, 1.0, 2, 1.0).c
    errs = {n: abs(solved("disc", "disc", n, 2 * n)[1].c - c_ref) for n in (16, 32, 64)}
    r1, r2 = errs[16] / errs[32], errs[32] / errs[64]
    ok = errs[32] <= 1e-3 and errs[64] <= 3e-4 and r1 >= 3 and r2 >= 3
    record_acceptance(5, ok, f"|c - c_oracle|: 32x64 {errs[32]:.2e}, 64x128 {errs[64]:.2e}; "
                             f"ratios {r1:.2f}, {r2:.2f}")
    assert ok


def test_criterion_6_catalog_diagnostics():
    lines, ok = [], True
    for src, tgt in CATALOG_RUNS:
        grid, st, source, target = solved(src, tgt)
        rep = run_diagnostics(grid, st, source, target).sections
        tol = slack(grid.h)
        lam_min = np.linalg.eigvalsh(derivatives(grid, st.u)[1])[:, 0].min()
        checks = [
            st.converged and st.t == 1.0,
            rep["lemma_3_1"]["passed"],
            rep["lemma_3_5"]["obliqueness_min"] > 0,
            rep["lemma_3_5"]["identity_error"] <= 10 * grid.h**2,
            rep["lemma_4_4"]["gap"] <= tol,
            lam_min > 0,
            abs(st.c) <= 2 * np.pi,
        ]
        ok &= all(checks)
        lines.append(f"{src}->{tgt} {'ok' if all(checks) else 'FAIL'}")
    record_acceptance(6, ok, ", ".join(lines))
    assert ok


def test_criterion_7_uniqueness():
    grid, st, src, tgt = solved("disc", "disc")
    other = continuation_solve(src, tgt, grid, SolveConfig(normalization="pole"),
                               initial=initial_state(grid, src, tgt, scale=1.2, normalization="pole"))
    dev, dc = uniqueness_check(st, other), abs(st.c - other.c)
    ok = dev <= 1e-8 and dc <= 1e-8
    record_acceptance(7, ok, f"deviation modulo constants {dev:.2e}, |delta c| {dc:.2e}")
    assert ok


def test_criterion_8_duality():
    rt = {}
    for n in (32, 64):
        grid, st, _, _ = solved("disc", "disc", n, 2 * n)
        gd = build_grid(DISC, n, 2 * n)
        dual = legendre_transform(grid, st.u, gd, c=st.c, t=1.0)
        rt[n] = gradient_roundtrip(grid, st.u, gd, dual.u_star).error
        if n == 32:
            res = dual_residual_norm(dual)
            res_bound = 10 * (st.residual_norm + 5 * grid.h**2)
            direct = continuation_solve(DISC, DISC, gd, SolveConfig(operator="dual"))
            agree = constant_offset_deviation(direct.u, dual.u_star)
            agree_bound = 5 * grid.h**2
    ratio = rt[32] / rt[64]
    ok = res <= res_bound and ratio >= 3 and agree <= agree_bound
    record_acceptance(8, ok, f"dual residual {res:.2e} (bound {res_bound:.2e}), roundtrip ratio {ratio:.2f}, "
                             f"direct dual vs conjugate {agree:.2e} (bound {agree_bound:.2e})")
    assert ok


def test_criterion_9_continuation():
    grid = build_grid(DISC, 32, 64)
    st = continuation_solve(DISC, ellipse_domain([1.3, 0.8]), grid, SolveConfig(homotopy_steps=10))
    ts = [e["t"] for e in st.t_trace]
    cs = np.array([e["c"] for e in st.t_trace])
    jump = float(np.max(np.abs(np.diff(cs))))
    every_stage = ts == pytest.approx(np.linspace(0, 1, 11), abs=1e-15)
    ok = st.converged and every_stage and jump <= 0.5
    record_acceptance(9, ok, f"{len(ts) - 1} stages converged, max adjacent jump in c {jump:.3f}")
    assert ok


def _without_timestamp(data: bytes) -> bytes:
    return b"".join(line for line in data.splitlines(keepends=True) if b'"wall_time_s"' not in line)


def test_criterion_10_reproducibility(tmp_path):
    cfg = json.loads((CONFIGS / "disc_disc.json").read_text())
    outs = []
    for k in range(2):
        cfg["output"]["dir"] = str(tmp_path / f"run{k}")
        path = tmp_path / f"cfg{k}.json"
        path.write_text(json.dumps(cfg))
        assert main(["solve", str(path)]) == 0
        outs.append(tmp_path / f"run{k}")
    same_fields = (outs[0] / "fields.csv").read_bytes() == (outs[1] / "fields.csv").read_bytes()
    same_summary = (_without_timestamp((outs[0] / "summary.json").read_bytes())
                    == _without_timestamp((outs[1] / "summary.json").read_bytes()))
    ok = same_fields and same_summary
    record_acceptance(10, ok, f"fields.csv identical: {same_fields}, summary.json identical: {same_summary}")
    assert ok
