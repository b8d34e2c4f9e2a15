"""Command-line front end: pair construction, eigenvalue tables, operator
analysis, and Weyl diagnostics.

Exit codes: 0 congruent / success, 10 not congruent, 20 analysis refused
(operator not disjointness-preserving), 30 inconsistency or missing data.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import pathlib
import sys

import numpy as np

from . import errors
from .congruence import EXIT_INCONSISTENT, EXIT_REFUSED, decide_congruence
from .eigen import Spectrum, solve_eigs, weyl_fit
from .fem import build_laplacian
from .geometry import CopyLayout, Triangle, build_propeller_pair
from .mesh import Mesh, mesh_layout, refine
from .opanalysis import (
    decompose_components,
    factor_operator,
    test_disjointness,
    verify_local_isometry,
)
from .transplant import OperatorMatrix, find_transplantation_matrix


def _cap_threads():
    cap = os.environ.get("DRUMKIT_THREADS")
    if not cap:
        return
    os.environ.setdefault("OMP_NUM_THREADS", cap)
    os.environ.setdefault("OPENBLAS_NUM_THREADS", cap)
    try:
        import numba

        numba.set_num_threads(max(1, int(cap)))
    except Exception:
        pass


def _write_json(path, doc):
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=1, sort_keys=True)
        fh.write("\n")


def cmd_pair(args) -> int:
    out = pathlib.Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    if args.template:
        with open(args.template) as fh:
            doc = json.load(fh)
        tri = Triangle(np.asarray(doc["triangle"], dtype=float))
    else:
        from .geometry import REFERENCE_TRIANGLE as tri
    log = []
    try:
        l1, l2 = build_propeller_pair(tri)
        log.append("propeller trees instantiated")
        md = find_transplantation_matrix(l1, l2, "dirichlet")
        log.append("dirichlet search: found")
        mn = find_transplantation_matrix(l1, l2, "neumann")
        log.append("neumann search: found")
    except errors.TransplantationNotFound as exc:
        (out / "search.log").write_text("\n".join(log + [f"FAILED: {exc}"]) + "\n")
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INCONSISTENT
    except errors.DrumkitError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INCONSISTENT
    l1.save(out / "layout1.json")
    l2.save(out / "layout2.json")
    _write_json(out / "transplant.json", {
        "dirichlet": md.to_json(),
        "neumann": mn.to_json(),
        "normalization": md.normalization,
    })
    (out / "search.log").write_text("\n".join(log) + "\n")
    print(f"wrote layout1.json layout2.json transplant.json search.log to {out}")
    return 0


def _load_domain(args):
    """Yield (name, mesh at level) callables from --layout or --mesh."""
    if args.layout:
        layout = CopyLayout.load(args.layout)
        return lambda lv: mesh_layout(layout, lv)[0]
    base = Mesh.load(args.mesh)

    def at_level(lv):
        m = base
        for _ in range(lv):
            m = refine(m)
        return m

    return at_level


def cmd_eig(args) -> int:
    out = pathlib.Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    mesher = _load_domain(args)
    beta = args.beta if args.kind == "robin" else None
    rows = []
    prev = {}
    prev2 = {}
    for lv in range(1, args.levels + 1):
        m = mesher(lv)
        L = build_laplacian(m, args.kind, beta)
        k = min(args.k, L.n_dof)
        try:
            s = solve_eigs(L, k, tol=args.tol, seed=args.seed)
        except errors.SolverNoConvergence as exc:
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_INCONSISTENT
        for j in range(k):
            lam = float(s.eigenvalues[j])
            order = ""
            if j in prev and j in prev2:
                d1 = prev2[j] - prev[j]
                d2 = prev[j] - lam
                if d2 != 0 and d1 / d2 > 0:
                    order = f"{np.log2(abs(d1 / d2)):.3f}"
            rows.append([lv, j + 1, repr(lam), repr(float(s.residuals[j])), order])
        prev2 = dict(prev)
        prev = {j: float(s.eigenvalues[j]) for j in range(k)}
    path = out / "spectrum.csv"
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["level", "k", "lambda", "residual", "order"])
        w.writerows(rows)
    print(f"wrote {path}")
    return 0


def cmd_analyze(args) -> int:
    from scipy.io import mmread

    out = pathlib.Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    m1 = Mesh.load(args.mesh1)
    m2 = Mesh.load(args.mesh2)
    mat = mmread(args.operator).tocsr()
    if mat.shape != (m2.n_vertices, m1.n_vertices):
        print("error: operator shape does not match meshes", file=sys.stderr)
        return EXIT_INCONSISTENT
    U = OperatorMatrix(mat, np.arange(m2.n_vertices), np.arange(m1.n_vertices), "cli")
    report = {"disjointness": None}
    rep = test_disjointness(U, m1, m2, trials=args.trials, seed=args.seed)
    report["disjointness"] = rep.to_json()
    if rep.verdict != "preserving":
        report["decision"] = {"congruent": False, "criterion_fired": "none",
                              "refused": True}
        _write_json(out / "report.json", report)
        print("analysis refused: operator is not disjointness-preserving")
        return EXIT_REFUSED
    fo = factor_operator(U, m1, m2, rep)
    report["factorization"] = fo.to_json()
    report["local_isometry"] = {
        k: v for k, v in verify_local_isometry(fo, m2).items()
        if not isinstance(v, np.ndarray)
    }
    dec = decompose_components(fo, m2)
    report["decomposition"] = dec.to_json()
    try:
        res = decide_congruence(dec, m1.total_measure(), m2.total_measure(), U=U)
    except errors.InternalInconsistency as exc:
        report["decision"] = {"error": str(exc), "diagnostics": exc.diagnostics}
        _write_json(out / "report.json", report)
        print(f"inconsistency: {exc}", file=sys.stderr)
        return EXIT_INCONSISTENT
    report["decision"] = res.to_json()
    _write_json(out / "report.json", report)
    print(f"congruent: {res.congruent} (criterion {res.criterion_fired})")
    return res.exit_code


def cmd_weyl(args) -> int:
    out = pathlib.Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    try:
        s = Spectrum.load_csv(args.spectrum)
        fit = weyl_fit(s)
    except (errors.InsufficientData, KeyError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INCONSISTENT
    d = fit["d_est"]
    path = out / "weyl.csv"
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["lambda", "N", "N_over_lambda_d2"])
        for n, lam in enumerate(s.eigenvalues, 1):
            ratio = n / lam ** (d / 2.0) if lam > 0 else ""
            w.writerow([repr(float(lam)), n, ratio])
    _write_json(out / "weyl_fit.json", fit)
    print(f"d_est={fit['d_est']} vol_est={fit['vol_est']:.6g}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="drumkit", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("pair", help="build the propeller layout pair")
    sp.add_argument("--template", help="template triangle JSON", default=None)
    sp.add_argument("--out", default=".")
    sp.set_defaults(func=cmd_pair)

    se = sub.add_parser("eig", help="eigenvalue table over refinement levels")
    g = se.add_mutually_exclusive_group(required=True)
    g.add_argument("--layout", help="copy layout JSON")
    g.add_argument("--mesh", help="mesh JSON")
    se.add_argument("--kind", choices=["dirichlet", "neumann", "robin"],
                    default="dirichlet")
    se.add_argument("--beta", type=float, default=0.0)
    se.add_argument("--k", type=int, default=10)
    se.add_argument("--levels", type=int, default=3)
    se.add_argument("--tol", type=float, default=1e-10)
    se.add_argument("--seed", type=int, default=0)
    se.add_argument("--out", default=".")
    se.set_defaults(func=cmd_eig)

    sa = sub.add_parser("analyze", help="disjointness / factorization pipeline")
    sa.add_argument("--operator", required=True, help="Matrix Market operator")
    sa.add_argument("--mesh1", required=True)
    sa.add_argument("--mesh2", required=True)
    sa.add_argument("--trials", type=int, default=64)
    sa.add_argument("--seed", type=int, default=0)
    sa.add_argument("--out", default=".")
    sa.set_defaults(func=cmd_analyze)

    sw = sub.add_parser("weyl", help="counting function and Weyl fit")
    sw.add_argument("--spectrum", required=True, help="spectrum CSV")
    sw.add_argument("--out", default=".")
    sw.set_defaults(func=cmd_weyl)
    return p


def main(argv=None) -> int:
    _cap_threads()
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except errors.DrumkitError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INCONSISTENT


if __name__ == "__main__":
    sys.exit(main())
