"""Solve every catalog pair at t = 1 and print the estimate diagnostics."""

import argparse
import sys

from slpotential.diagnostics import run_diagnostics
from slpotential.domains import disc_domain, ellipse_domain, superellipse_domain
from slpotential.grid import build_grid
from slpotential.io import dumps
from slpotential.solver import continuation_solve

DOMAINS = {
    "disc": disc_domain,
    "ellipse": lambda: ellipse_domain([1.3, 0.8]),
    "superellipse": lambda: superellipse_domain(1.0, 1.0, 4, 0.25),
}
PAIRS = [("disc", "disc"), ("disc", "ellipse"), ("ellipse", "disc"), ("superellipse", "disc")]


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n-r", type=int, default=32)
    ap.add_argument("--n-phi", type=int, default=64)
    ap.add_argument("--out", help="optional JSON report path")
    args = ap.parse_args(argv)

    reports, all_ok = {}, True
    for src, tgt in PAIRS:
        source, target = DOMAINS[src](), DOMAINS[tgt]()
        grid = build_grid(source, args.n_r, args.n_phi)
        st = continuation_solve(source, target, grid)
        rep = run_diagnostics(grid, st, source, target)
        s = rep.sections
        all_ok &= rep.passed
        print(f"{src:>12} -> {tgt:<8} c={st.c:.8f}  {'pass' if rep.passed else 'FAIL'}  "
              f"kappa in [{s['lemma_3_1']['kappa_min_range'][0]:.4f}, {s['lemma_3_1']['kappa_max_range'][1]:.4f}] "
              f"(M1={rep.m1:.4f}, M2={rep.m2:.4f})  "
              f"min<beta,nu>={s['lemma_3_5']['obliqueness_min']:.4f}  "
              f"H gap={s['lemma_4_4']['gap']:+.2e}  "
              f"D2u eig=[{s['lemma_4_12']['min_eigenvalue']:.3f}, {s['lemma_4_12']['max_eigenvalue']:.3f}]")
        reports[f"{src}->{tgt}"] = {"c": st.c, **rep.to_dict()}
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(dumps(reports))
    return 0 if all_ok else 5


if __name__ == "__main__":
    sys.exit(main())
