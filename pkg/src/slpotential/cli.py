"""Command line front-end: ``solve``, ``diagnose``, ``oracle`` and ``sweep``.

Exit codes: 0 ok, 2 convergence failure, 3 convexity lost, 4 config or
input error, 5 a diagnostic check failed.
"""

from __future__ import annotations

import argparse
import csv
import io
import logging
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .diagnostics import run_diagnostics
from .errors import (ConfigError, ConvergenceError, ConvexityLostError, GeometryError,
                     InvalidInputError, OracleError)
from .grid import build_grid, derivatives
from .io import (atomic_write, describe_domains, dumps, field_table, load_config, load_state,
                 problem_from_config, solve_config, state_to_dict)
from .legendre import dual_residual, legendre_transform
from .operator import curvature_matrix
from .plots import heatmap_svg
from .radial import radial_solve
from .solver import assemble_residual, condition_estimate, continuation_solve

EXIT_OK = 0
EXIT_CONVERGENCE = 2
EXIT_CONVEXITY = 3
EXIT_CONFIG = 4
EXIT_DIAGNOSTIC = 5

log = logging.getLogger("slpotential")


def _summary(cfg, source, target, grid, state, trace, wall, converged, failure=None):
    out = {
        "c": None if state is None else float(state.c),
        "t_trace": trace,
        "converged": bool(converged),
        "grid": {"n_r": grid.n_r, "n_phi": grid.n_phi, "h": grid.h, "nodes": grid.size},
        "domains": describe_domains(source, target),
        "wall_time_s": round(wall, 3),
        "version": __version__,
        "seed": cfg["seed"],
    }
    if state is not None:
        out["t"] = float(state.t)
        out["residual"] = float(state.residual_norm)
        out["newton_history"] = [{"iteration": int(i), "residual": float(r), "step": float(s)}
                                 for i, r, s in state.newton_history]
        out["condition_estimate"] = state.condition_estimate
    if failure is not None:
        out["failure"] = failure
    return out


def run_solve(cfg: dict, out_dir: Path) -> tuple[int, dict | None]:
    """Solve one configuration and write its outputs; returns (exit code, summary)."""
    source, target, grid = problem_from_config(cfg)
    scfg = solve_config(cfg)
    t0 = time.perf_counter()
    try:
        state = continuation_solve(source, target, grid, scfg)
        state.condition_estimate = condition_estimate(grid, target, state, scfg)
    except (ConvergenceError, ConvexityLostError) as exc:
        code = EXIT_CONVEXITY if isinstance(exc, ConvexityLostError) else EXIT_CONVERGENCE
        trace = list(getattr(exc, "trace", None) or [])
        failure = {"kind": getattr(exc, "kind", None), "message": str(exc)}
        summary = _summary(cfg, source, target, grid, None, trace, time.perf_counter() - t0, False, failure)
        if trace:
            summary["c"] = trace[-1]["c"]
        atomic_write(out_dir / "summary.json", dumps(summary))
        log.error("solve failed: %s", exc)
        return code, summary
    wall = time.perf_counter() - t0
    summary = _summary(cfg, source, target, grid, state, state.t_trace, wall, True)
    out = cfg["output"]
    residual = assemble_residual(grid, target, state.u, state.c, state.t, convexity_guard=-np.inf)[:-1]
    atomic_write(out_dir / "state.json", dumps(state_to_dict(state, cfg)))
    if out["emit_csv"]:
        atomic_write(out_dir / "fields.csv", field_table(grid, state.u, residual))
    if out["emit_svg"]:
        du, d2u = derivatives(grid, state.u)
        kappa = np.linalg.eigvalsh(curvature_matrix(du, d2u))
        for name, vals in (("u", state.u), ("kappa_min", kappa[:, 0]), ("kappa_max", kappa[:, 1]),
                           ("residual", np.abs(residual))):
            atomic_write(out_dir / f"{name}.svg", heatmap_svg(grid, vals, name))
    if out["emit_dual"]:
        grid_dual = build_grid(target, grid.n_r, grid.n_phi)
        dual = legendre_transform(grid, state.u, grid_dual, c=state.c, t=state.t)
        dres = dual_residual(dual)
        atomic_write(out_dir / "dual_fields.csv", field_table(grid_dual, dual.u_star, dres, dual=True))
        summary["dual"] = {"c_dual": dual.c_dual, "residual": float(np.max(np.abs(dres)))}
    atomic_write(out_dir / "summary.json", dumps(summary))
    log.info("converged: c = %r", state.c)
    return EXIT_OK, summary


def cmd_solve(args) -> int:
    cfg = load_config(args.config)
    out_dir = Path(args.out or cfg["output"]["dir"])
    code, summary = run_solve(cfg, out_dir)
    if summary is not None and summary.get("c") is not None:
        print(f"c = {summary['c']!r}")
    return code


def cmd_diagnose(args) -> int:
    state, source, target, grid, meta = load_state(args.state)
    other = None
    if args.other:
        other, *_ = load_state(args.other)
        if other.u.shape != state.u.shape:
            raise InvalidInputError("states live on different grids")
    report = run_diagnostics(grid, state, source, target, other=other)
    out = Path(args.out) if args.out else Path(args.state).with_name("diagnostics.json")
    atomic_write(out, dumps(report.to_dict()))
    failed = [k for k, v in report.sections.items()
              if v.get("passed") is False and not v.get("informational")]
    print("all checks passed" if not failed else "failed: " + ", ".join(failed))
    return EXIT_OK if report.passed else EXIT_DIAGNOSTIC


def _profile_csv(p) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["r", "phi", "kappa_rad", "kappa_tan"])
    for row in zip(p.r, p.phi, p.kappa_rad, p.kappa_tan):
        w.writerow([repr(float(x)) for x in row])
    return buf.getvalue()


def cmd_oracle(args) -> int:
    p = radial_solve(args.rho_src, args.rho_tgt, n=args.n, t=args.t, tol=args.tol, steps=args.steps)
    print(f"c = {p.c!r}")
    if args.out:
        out = Path(args.out)
        atomic_write(out / "profile.csv", _profile_csv(p))
        atomic_write(out / "oracle.json", dumps({
            "c": p.c, "rho_src": p.rho_src, "rho_tgt": p.rho_tgt, "n": p.n, "t": p.t,
            "tolerance": p.tolerance, "steps": args.steps, "version": __version__}))
    return EXIT_OK


def oracle_c(cfg: dict):
    """Radial reference value of c when both domains are concentric discs, else None."""
    s, t = cfg["source_domain"], cfg["target_domain"]
    if s["type"] != "disc" or t["type"] != "disc":
        return None
    if list(s.get("center", [0, 0])) != list(t.get("center", [0, 0])):
        return None
    return radial_solve(s.get("radius", 1.0), t.get("radius", 1.0), n=2, t=1.0).c


def cmd_sweep(args) -> int:
    cfg = load_config(args.config)
    resolutions = cfg.get("sweep", [cfg["grid"]])
    if not resolutions:
        raise ConfigError("sweep needs at least one resolution")
    base = Path(args.out or cfg["output"]["dir"])
    c_ref = oracle_c(cfg)
    rows, first_bad = [], EXIT_OK
    for res in resolutions:
        run = dict(cfg, grid=dict(res))
        run_dir = base / f"{res['n_r']}x{res['n_phi']}"
        t0 = time.perf_counter()
        try:
            code, summary = run_solve(run, run_dir)
        except (ConfigError, GeometryError, InvalidInputError) as exc:
            log.error("run %s: %s", res, exc)
            code, summary = EXIT_CONFIG, None
        elapsed = time.perf_counter() - t0
        c = summary.get("c") if summary else None
        ok = code == EXIT_OK and c is not None
        rows.append([res["n_r"], res["n_phi"],
                     repr(summary["grid"]["h"]) if summary else "",
                     repr(c) if ok else "",
                     repr(abs(c - c_ref)) if ok and c_ref is not None else "",
                     f"{elapsed:.3f}", code])
        if code != EXIT_OK and first_bad == EXIT_OK:
            first_bad = code
        print(f"{res['n_r']}x{res['n_phi']}: exit {code}" + (f", c = {c!r}" if ok else ""))
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["n_r", "n_phi", "h", "c", "error_vs_oracle", "runtime_s", "exit_code"])
    w.writerows(rows)
    atomic_write(base / "sweep.csv", buf.getvalue())
    return first_bad


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="slpotential", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=__version__)
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="continuation solve from a JSON config")
    p.add_argument("config")
    p.add_argument("--out", help="output directory (overrides output.dir)")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("diagnose", help="estimate checks on a saved state")
    p.add_argument("state")
    p.add_argument("--other", help="second state for the uniqueness check")
    p.add_argument("--out", help="report path (default: diagnostics.json next to the state)")
    p.set_defaults(func=cmd_diagnose)

    p = sub.add_parser("oracle", help="radial shooting reference for concentric discs")
    p.add_argument("--rho-src", type=float, default=1.0)
    p.add_argument("--rho-tgt", type=float, default=1.0)
    p.add_argument("--n", type=int, default=2)
    p.add_argument("--t", type=float, default=1.0)
    p.add_argument("--tol", type=float, default=1e-12)
    p.add_argument("--steps", type=int, default=4000)
    p.add_argument("--out", help="directory for profile.csv and oracle.json")
    p.set_defaults(func=cmd_oracle)

    p = sub.add_parser("sweep", help="solve at each resolution listed under 'sweep'")
    p.add_argument("config")
    p.add_argument("--out", help="output directory (overrides output.dir)")
    p.set_defaults(func=cmd_sweep)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s", stream=sys.stderr)
    try:
        return args.func(args)
    except (ConfigError, InvalidInputError, GeometryError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OracleError as exc:
        print(f"oracle failed: {exc}", file=sys.stderr)
        return EXIT_CONVERGENCE


if __name__ == "__main__":
    sys.exit(main())
