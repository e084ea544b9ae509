"""Command line interface ``mink``.

Exit codes: 0 converged (or all checks passed), 2 precondition refusal,
3 non-convergence or failed verification, 4 I/O or schema error.
"""

import argparse
import json
import math
import sys
from pathlib import Path

import numpy as np

from .errors import MinkowskiError, PreconditionError, SchemaError
from .inequalities import (
    check_subspace_concentration, default_profile, hemisphere_constant, lp_iso_bound,
)
from .io import (
    body_from_solution, canonical_json, emit_geometry, load_problem, read_document,
    report_document, spec_from_document, weight_from_descriptor, write_report,
)
from .monge_ampere import CircleOperator, ma_multistart, solve_ma_circle
from .solvers import enforce, kkt_report, precheck, solve
from .weights import constant_solutions, isotropic_analyze, total_mass

EXIT_OK, EXIT_PRECONDITION, EXIT_NONCONVERGED, EXIT_IO = 0, 2, 3, 4
GEOMETRY_FORMATS = {2: ("svg", "csv"), 3: ("obj", "csv")}


def _reports(result):
    if isinstance(result, list):
        return result
    if hasattr(result, "large"):
        return [result.large, result.small]
    return [result]


def solution_checks(spec, result):
    """Inequality summaries attached to a report."""
    nu = spec.nu
    hem = hemisphere_constant(nu, 1.0)
    sub = check_subspace_concentration(nu, strict=True)
    checks = {
        "hemisphere_constant": hem.value,
        "subspace_concentration": {"holds": sub.holds, "worst_dimension": sub.worst_dimension,
                                   "worst_mass": sub.worst_mass, "bound": sub.bound},
    }
    profile = default_profile(spec.weight) if math.isfinite(total_mass(spec.weight)) else None
    iso = []
    for rep in _reports(result):
        if profile is None or rep.body is None or spec.p < 1 or spec.mode == "ma_circle":
            iso.append(None)
            continue
        r = lp_iso_bound(rep.body, spec.weight, spec.p, profile)
        iso.append({"holds": r.holds, "lhs": r.lhs, "rhs": r.rhs, "jensen_holds": r.jensen_holds})
    checks["lp_isoperimetric"] = iso
    return checks


def _write_artifacts(result, out, dimension, stem="solution"):
    paths = {}
    for k, rep in enumerate(_reports(result)):
        if rep.body is None:
            continue
        for fmt in GEOMETRY_FORMATS[dimension]:
            name = f"{stem}{k}.{fmt}"
            emit_geometry(rep.body, fmt, Path(out) / name)
            paths.setdefault(str(k), []).append(name)
    return paths


def _finish(doc, out, name="report.json"):
    if out:
        Path(out).mkdir(parents=True, exist_ok=True)
        write_report(doc, Path(out) / name)
    else:
        sys.stdout.write(canonical_json(doc))
    return EXIT_OK if doc["status"] == "converged" else EXIT_NONCONVERGED


def cmd_solve(args):
    loaded = load_problem(args.problem, seed=args.seed, force=args.force)
    result = solve(loaded.spec)
    checks = solution_checks(loaded.spec, result)
    artifacts = {}
    if args.out:
        Path(args.out).mkdir(parents=True, exist_ok=True)
        artifacts = _write_artifacts(result, args.out, loaded.spec.dimension)
    doc = report_document(loaded, result, checks, artifacts)
    doc["forced"] = loaded.spec.config.force
    print(f"status: {doc['status']}", file=sys.stderr)
    return _finish(doc, args.out)


def cmd_ma2d(args):
    loaded = load_problem(args.problem, seed=args.seed, force=args.force)
    spec = loaded.spec
    if spec.mode != "ma_circle":
        raise SchemaError("mode.kind", "ma2d needs an ma_circle problem")
    checks = {}
    if args.multistart:
        result = ma_multistart(spec, starts=args.multistart)
        H = np.array([r.h.values for r in result if r.h is not None])
        spread = max((float(np.max(np.abs(a - b))) for a in H for b in H), default=math.nan)
        checks["multistart_sup_spread"] = spread
    else:
        result = solve_ma_circle(spec, branch=args.branch)
    artifacts = {}
    if args.out:
        Path(args.out).mkdir(parents=True, exist_ok=True)
        artifacts = _write_artifacts(result, args.out, 2)
    doc = report_document(loaded, result, checks, artifacts)
    doc["forced"] = spec.config.force
    print(f"status: {doc['status']}", file=sys.stderr)
    return _finish(doc, args.out)


def _parse_params(items):
    params = {}
    for item in items or []:
        key, sep, val = item.partition("=")
        if not sep:
            raise SchemaError(f"--param {item}", "expected key=value")
        try:
            params[key] = float(val)
        except ValueError:
            params[key] = val
    return params


def cmd_isotropic(args):
    desc = {"kind": args.weight, **_parse_params(args.param)}
    if args.weight_csv:
        desc = {"kind": "tabulated", "csv": args.weight_csv}
    w = weight_from_descriptor(desc, args.dimension)
    ana = isotropic_analyze(w, args.p)
    roots = constant_solutions(w, args.p, args.c)
    doc = {
        "weight": desc, "dimension": args.dimension, "p": args.p, "c": args.c,
        "radii": list(roots), "g_at_radii": [float(w.g(T, args.p)) for T in roots],
        "threshold": ana.threshold, "critical_set": list(ana.critical_set),
        "property_D": ana.property_D,
        "property_S": ana.property_S,
    }
    sys.stdout.write(canonical_json(doc))
    return EXIT_OK


def _verify_report(doc, selected, force):
    problem = doc.get("problem")
    if problem is None:
        raise SchemaError("problem", "report does not embed its problem")
    spec = spec_from_document(problem, seed=doc.get("seed"), force=force or doc.get("forced", False))
    out, ok = [], True
    for k, sol in enumerate(doc.get("solutions", [])):
        entry = {"solution": k, "status": sol.get("status")}
        table = sol.get("table") or []
        if table:
            res = [row["residual"] for row in table if row["residual"] is not None]
            entry["table_reconciles"] = bool(res) and math.isclose(
                max(abs(r) for r in res), sol["residual_inf"], rel_tol=1e-12, abs_tol=0.0)
            ok &= entry["table_reconciles"]
        if "kkt" in selected and table and sol.get("status") == "converged":
            h = np.array([row["h"] for row in table])
            if spec.mode == "ma_circle":
                op = CircleOperator(spec.weight, spec.p, len(h))
                resid = float(np.max(np.abs(op.lhs(h) - spec.f)))
                passed = resid <= spec.config.tol_pde
            else:
                rep = kkt_report(spec, h)
                resid = rep.residual_inf
                passed = resid <= spec.config.tol_kkt * spec.nu.total
                if rep.mass_error is not None:
                    entry["mass_error"] = rep.mass_error
                    passed &= rep.mass_error <= spec.config.tol_mass
            entry["residual_inf"] = resid
            entry["kkt_holds"] = bool(passed)
            ok &= bool(passed)
        if "iso" in selected and table and spec.p >= 1 and spec.mode != "ma_circle":
            profile = default_profile(spec.weight) if math.isfinite(total_mass(spec.weight)) else None
            if profile is not None:
                r = lp_iso_bound(body_from_solution(sol), spec.weight, spec.p, profile)
                entry["lp_isoperimetric"] = r.holds and r.jensen_holds
                ok &= entry["lp_isoperimetric"]
        out.append(entry)
    return {"kind": "report", "solutions": out, "passed": bool(ok)}, ok


def cmd_verify(args):
    selected = set(args.checks.split(",")) if args.checks else {"kkt", "iso", "hemisphere", "subspace"}
    doc, _ = read_document(args.file)
    if isinstance(doc, dict) and "problem_sha256" in doc:
        summary, ok = _verify_report(doc, selected, args.force)
        sys.stdout.write(canonical_json(summary))
        return EXIT_OK if ok else EXIT_NONCONVERGED
    spec = spec_from_document(doc, seed=args.seed, force=args.force, base_dir=Path(args.file).parent)
    pc = precheck(spec)
    summary = {"kind": "problem", "precheck": pc.as_dict()}
    if "hemisphere" in selected:
        summary["hemisphere_constant"] = hemisphere_constant(spec.nu, 1.0).value
    if "subspace" in selected:
        sub = check_subspace_concentration(spec.nu, strict=True)
        summary["subspace_concentration"] = {"holds": sub.holds, "worst_dimension": sub.worst_dimension,
                                             "worst_basis": np.asarray(sub.worst_basis).tolist()}
    sys.stdout.write(canonical_json(summary))
    enforce(spec, pc)
    return EXIT_OK


def cmd_emit(args):
    doc, _ = read_document(args.report)
    sols = doc.get("solutions") if isinstance(doc, dict) else None
    if not sols:
        raise SchemaError("solutions", "report has no solutions")
    if not 0 <= args.solution < len(sols):
        raise SchemaError("--solution", f"index out of range (report has {len(sols)})")
    body = body_from_solution(sols[args.solution])
    try:
        text = emit_geometry(body, args.format, args.out)
    except ValueError as exc:
        raise SchemaError("--format", str(exc)) from exc
    if args.out is None:
        sys.stdout.write(text)
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(prog="mink", description="Weighted L^p Minkowski problem solver.")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, problem=True):
        if problem:
            p.add_argument("problem", help="problem JSON file")
            p.add_argument("--out", help="output directory for report.json and geometry")
        p.add_argument("--seed", type=int, help="override the file seed")
        p.add_argument("--force", action="store_true", help="run past failed hypotheses")

    p = sub.add_parser("solve", help="solve a problem file")
    common(p)
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("ma2d", help="planar Monge-Ampere Newton solve")
    common(p)
    p.add_argument("--branch", default="large", choices=("large", "small"))
    p.add_argument("--multistart", type=int, default=0, help="number of random starts")
    p.set_defaults(func=cmd_ma2d)

    p = sub.add_parser("isotropic", help="ball solutions of the isotropic problem")
    p.add_argument("--weight", default="gaussian")
    p.add_argument("--weight-csv", help="two-column radius,density table")
    p.add_argument("--param", action="append", help="weight parameter key=value")
    p.add_argument("--dimension", type=int, default=2, choices=(2, 3))
    p.add_argument("--p", type=float, required=True)
    p.add_argument("--c", type=float, required=True)
    p.set_defaults(func=cmd_isotropic)

    p = sub.add_parser("verify", help="re-check a report or precheck a problem")
    p.add_argument("file")
    p.add_argument("--checks", help="comma list of kkt,iso,hemisphere,subspace")
    common(p, problem=False)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("emit", help="geometry of a reported solution")
    p.add_argument("report")
    p.add_argument("--format", required=True, choices=("svg", "obj", "csv"))
    p.add_argument("--solution", type=int, default=0)
    p.add_argument("--out", help="output file (default stdout)")
    p.set_defaults(func=cmd_emit)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except PreconditionError as exc:
        print(json.dumps({"refused": str(exc), "hypothesis": exc.hypothesis}), file=sys.stderr)
        return EXIT_PRECONDITION
    except (SchemaError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except MinkowskiError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NONCONVERGED


if __name__ == "__main__":
    sys.exit(main())
