"""Problem and report files, canonical JSON, and geometry emitters.

Problem files are JSON documents::

    {"schema_version": 1, "dimension": 2,
     "weight": {"kind": "gaussian"},
     "nu": {"isotropic": true, "c": 0.05, "count": 256},
     "p": 1, "mode": {"kind": "pinned", "a": 0.5},
     "config": {"tol_kkt": 1e-6}, "seed": 0}

``nu`` is either ``{"rows": [[x, y, (z,) mass], ...]}`` or the isotropic
block above.  ``ma_circle`` problems carry ``"f": [...]`` samples on a
uniform angle grid in the mode block and may omit ``nu``.
Canonical serialisation sorts keys, indents by two spaces and writes every
float with 17 significant digits, so equal inputs give equal bytes.
"""

import dataclasses
import hashlib
import json
import math
from pathlib import Path
from typing import NamedTuple

import numpy as np

from .errors import SchemaError
from .geometry import DirectionSet, SphericalMeasure, polytope_from_points, wulff_shape
from .solvers import MODES, ProblemSpec, SolverConfig, enforce, precheck
from .weights import WeightProfile, describe

SCHEMA_VERSION = 1
WEIGHT_KINDS = ("gaussian", "cauchy", "power", "lebesgue", "tabulated")


# -- canonical JSON ----------------------------------------------------------------

def _float(x):
    if math.isnan(x):
        return '"nan"'
    if math.isinf(x):
        return '"inf"' if x > 0 else '"-inf"'
    s = "%.17g" % x
    return s if any(c in s for c in ".en") else s + ".0"


def _emit(obj, indent, out):
    pad = "  " * indent
    if isinstance(obj, np.ndarray):
        obj = obj.tolist()
    if isinstance(obj, (bool, np.bool_)):
        out.append("true" if obj else "false")
    elif obj is None:
        out.append("null")
    elif isinstance(obj, (int, np.integer)):
        out.append(str(int(obj)))
    elif isinstance(obj, (float, np.floating)):
        out.append(_float(float(obj)))
    elif isinstance(obj, str):
        out.append(json.dumps(obj))
    elif isinstance(obj, dict):
        if not obj:
            out.append("{}")
            return
        out.append("{\n")
        items = sorted((str(k), v) for k, v in obj.items())
        for j, (k, v) in enumerate(items):
            out.append(f"{pad}  {json.dumps(k)}: ")
            _emit(v, indent + 1, out)
            out.append(",\n" if j < len(items) - 1 else "\n")
        out.append(pad + "}")
    elif isinstance(obj, (list, tuple)):
        if not obj:
            out.append("[]")
            return
        if all(not isinstance(v, (dict, list, tuple, np.ndarray)) for v in obj):
            parts = []
            for v in obj:
                sub = []
                _emit(v, 0, sub)
                parts.append("".join(sub))
            out.append("[" + ", ".join(parts) + "]")
            return
        out.append("[\n")
        for j, v in enumerate(obj):
            out.append(pad + "  ")
            _emit(v, indent + 1, out)
            out.append(",\n" if j < len(obj) - 1 else "\n")
        out.append(pad + "]")
    else:
        raise TypeError(f"cannot serialise {type(obj).__name__}")


def canonical_json(obj):
    """Deterministic JSON text (sorted keys, %.17g floats, non-finite as strings)."""
    out = []
    _emit(obj, 0, out)
    return "".join(out) + "\n"


def _number(x, field):
    if isinstance(x, bool):
        raise SchemaError(field, "expected a number")
    if isinstance(x, (int, float)):
        return float(x)
    if isinstance(x, str) and x in ("inf", "-inf", "nan"):
        return float(x)
    raise SchemaError(field, "expected a number")


# -- problem files -----------------------------------------------------------------

class LoadedProblem(NamedTuple):
    spec: ProblemSpec
    precheck: dict
    document: dict
    sha256: str


def read_document(path):
    """JSON document from a file; decoding errors become line-addressed."""
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise SchemaError(str(path), f"cannot read file ({exc.strerror})") from exc
    try:
        return json.loads(text), hashlib.sha256(text.encode()).hexdigest()
    except json.JSONDecodeError as exc:
        raise SchemaError(f"line {exc.lineno}", exc.msg) from exc


def _require(doc, key, field):
    if not isinstance(doc, dict):
        raise SchemaError(field, "expected an object")
    if key not in doc:
        raise SchemaError(f"{field}.{key}" if field else key, "missing field")
    return doc[key]


def weight_from_descriptor(desc, n, field="weight", base_dir=None):
    """WeightProfile from a ``{"kind": ..., params}`` descriptor."""
    kind = _require(desc, "kind", field)
    try:
        if kind == "gaussian":
            return WeightProfile.gaussian(n)
        if kind == "lebesgue":
            return WeightProfile.lebesgue(n)
        if kind == "cauchy":
            return WeightProfile.cauchy(n, _number(_require(desc, "q", field), f"{field}.q"),
                                        _number(_require(desc, "b", field), f"{field}.b"))
        if kind == "power":
            base = desc.get("base")
            base_w = None if base is None else weight_from_descriptor(base, n, f"{field}.base", base_dir)
            return WeightProfile.power(n, _number(_require(desc, "q", field), f"{field}.q"), base_w)
        if kind == "tabulated":
            if "csv" in desc:
                path = Path(desc["csv"])
                if base_dir is not None and not path.is_absolute():
                    path = Path(base_dir) / path
                try:
                    return WeightProfile.from_csv(n, path)
                except OSError as exc:
                    raise SchemaError(f"{field}.csv", f"cannot read {path}") from exc
            return WeightProfile.tabulated(n, _require(desc, "grid", field), _require(desc, "values", field))
    except (ValueError, TypeError) as exc:
        raise SchemaError(field, str(exc)) from exc
    raise SchemaError(f"{field}.kind", f"unknown weight kind {kind!r}; expected one of {WEIGHT_KINDS}")


def _nu_from_block(block, n):
    if not isinstance(block, dict):
        raise SchemaError("nu", "expected an object")
    if block.get("isotropic"):
        c = _number(_require(block, "c", "nu"), "nu.c")
        count = _require(block, "count", "nu")
        if not isinstance(count, int) or count < 3:
            raise SchemaError("nu.count", "expected an integer >= 3")
        if c <= 0:
            raise SchemaError("nu.c", "must be positive")
        try:
            return SphericalMeasure.isotropic(n, count, c)
        except ValueError as exc:
            raise SchemaError("nu.count", str(exc)) from exc
    rows = _require(block, "rows", "nu")
    if not isinstance(rows, list) or not rows:
        raise SchemaError("nu.rows", "expected a non-empty list")
    dirs, vals = [], []
    for k, row in enumerate(rows):
        field = f"nu.rows[{k}]"
        if not isinstance(row, list) or len(row) != n + 1:
            raise SchemaError(field, f"expected {n} direction components and a mass")
        vec = np.array([_number(x, field) for x in row[:n]])
        mass = _number(row[n], field)
        if not mass > 0:
            raise SchemaError(field, f"mass must be positive, got {mass!r}")
        if not np.linalg.norm(vec) > 0:
            raise SchemaError(field, "direction must be non-zero")
        dirs.append(vec)
        vals.append(mass)
    try:
        return SphericalMeasure(DirectionSet.from_vectors(dirs), np.array(vals))
    except ValueError as exc:
        raise SchemaError("nu.rows", str(exc)) from exc


def _config(doc, force):
    over = doc.get("config", {}) or {}
    if not isinstance(over, dict):
        raise SchemaError("config", "expected an object")
    names = {f.name: f for f in dataclasses.fields(SolverConfig)}
    kwargs = {}
    for key, val in over.items():
        if key not in names:
            raise SchemaError(f"config.{key}", "unknown solver option")
        default = names[key].default
        if isinstance(default, bool):
            if not isinstance(val, bool):
                raise SchemaError(f"config.{key}", "expected true or false")
        elif isinstance(default, int):
            if isinstance(val, bool) or not isinstance(val, int) or val <= 0:
                raise SchemaError(f"config.{key}", "expected a positive integer")
        else:
            val = _number(val, f"config.{key}")
            if not val > 0:
                raise SchemaError(f"config.{key}", "must be positive")
        kwargs[key] = val
    if force:
        kwargs["force"] = True
    return SolverConfig(**kwargs)


def spec_from_document(doc, seed=None, force=False, base_dir=None):
    """Validated ProblemSpec from a parsed problem document."""
    if not isinstance(doc, dict):
        raise SchemaError("(root)", "expected an object")
    version = _require(doc, "schema_version", "")
    if version != SCHEMA_VERSION:
        raise SchemaError("schema_version", f"unsupported version {version!r}; expected {SCHEMA_VERSION}")
    n = _require(doc, "dimension", "")
    if n not in (2, 3):
        raise SchemaError("dimension", "expected 2 or 3")
    w = weight_from_descriptor(_require(doc, "weight", ""), n, base_dir=base_dir)
    p = _number(_require(doc, "p", ""), "p")
    mode = _require(doc, "mode", "")
    kind = _require(mode, "kind", "mode")
    if kind not in MODES:
        raise SchemaError("mode.kind", f"unknown mode {kind!r}; expected one of {MODES}")
    config = _config(doc, force)
    file_seed = doc.get("seed", 0)
    if isinstance(file_seed, bool) or not isinstance(file_seed, int) or file_seed < 0:
        raise SchemaError("seed", "expected a non-negative integer")
    seed = file_seed if seed is None else seed
    a = c = f = None
    if kind in ("pinned", "entropy"):
        a = _number(_require(mode, "a", "mode"), "mode.a")
    if kind == "small_mass_dual" and "a" in mode:
        a = _number(mode["a"], "mode.a")
    if kind == "isotropic":
        c = _number(_require(mode, "c", "mode"), "mode.c")
    if kind == "ma_circle":
        if n != 2:
            raise SchemaError("dimension", "ma_circle mode is planar")
        samples = _require(mode, "f", "mode")
        if not isinstance(samples, list) or len(samples) < 8 or len(samples) % 2:
            raise SchemaError("mode.f", "expected an even number (>= 8) of samples")
        f = np.array([_number(x, f"mode.f[{k}]") for k, x in enumerate(samples)])
        bad = np.nonzero(~(f > 0))[0]
        if bad.size:
            raise SchemaError(f"mode.f[{int(bad[0])}]", "samples must be positive")
        d = DirectionSet.uniform_circle(len(f))
        nu = SphericalMeasure(d, f * d.quadrature_weights)
    else:
        nu = _nu_from_block(_require(doc, "nu", ""), n)
    if nu.dimension != n:
        raise SchemaError("nu", "direction dimension differs from dimension")
    try:
        return ProblemSpec(w, nu, p, kind, a=a, c=c, f=f, config=config, seed=seed)
    except ValueError as exc:
        raise SchemaError("mode", str(exc)) from exc


def load_problem(path, seed=None, force=False, check=True):
    """Parse, validate and precheck a problem file.

    Raises :class:`SchemaError` on malformed input and, when ``check`` is set,
    :class:`PreconditionError` on a failing hypothesis unless forced.
    """
    doc, digest = read_document(path)
    spec = spec_from_document(doc, seed=seed, force=force, base_dir=Path(path).parent)
    pc = precheck(spec)
    if check:
        enforce(spec, pc)
    return LoadedProblem(spec, pc.as_dict(), doc, digest)


def parse_problem(path, seed=None, force=False):
    """ProblemSpec from a file; see :func:`load_problem`."""
    return load_problem(path, seed, force).spec


def problem_document(spec):
    """Problem document for a spec (weights without a closed descriptor are rejected)."""
    w = spec.weight
    if w.kind not in WEIGHT_KINDS:
        raise SchemaError("weight.kind", f"weight kind {w.kind!r} has no file descriptor")
    doc = {"schema_version": SCHEMA_VERSION, "dimension": spec.dimension, "weight": describe(w),
           "p": spec.p, "seed": spec.seed}
    mode = {"kind": spec.mode}
    if spec.a is not None:
        mode["a"] = spec.a
    if spec.c is not None:
        mode["c"] = spec.c
    if spec.mode == "ma_circle":
        mode["f"] = np.asarray(spec.f).tolist()
    else:
        u, v = spec.nu.directions.units, spec.nu.values
        doc["nu"] = {"rows": [list(map(float, ui)) + [float(vi)] for ui, vi in zip(u, v)]}
    doc["mode"] = mode
    default = SolverConfig()
    over = {k: getattr(spec.config, k) for k in (f.name for f in dataclasses.fields(SolverConfig))
            if getattr(spec.config, k) != getattr(default, k)}
    if over:
        doc["config"] = over
    return doc


def serialize_problem(doc):
    return canonical_json(doc)


# -- reports -----------------------------------------------------------------------

def _solution_document(rep, data):
    doc = {
        "status": rep.status,
        "mode": rep.mode,
        "p": rep.p,
        "lambda": rep.lam,
        "lambda_lstsq": rep.lam_ls,
        "residual_inf": rep.residual_inf,
        "mass": rep.mass,
        "target_mass": rep.target_mass,
        "mass_error": rep.mass_error,
        "iterations": rep.iterations,
        "objective_trace": list(rep.objective_trace),
        "realized_hemisphere_constant": rep.realized_hemisphere,
        "notes": list(rep.notes),
        "extra": _plain(rep.extra),
    }
    if rep.h is not None:
        units = rep.h.directions.units
        masses = data if len(data) == len(units) else [None] * len(units)
        surface = rep.surface if rep.surface is not None else [None] * len(units)
        res = rep.residuals if rep.residuals is not None else [None] * len(units)
        doc["table"] = [
            {"direction": units[i].tolist(), "data": masses[i], "h": float(rep.h.values[i]),
             "surface": surface[i], "residual": res[i]}
            for i in range(len(units))
        ]
    if rep.body is not None:
        K = rep.body
        doc["body"] = {"vertices": K.vertices.tolist(),
                       "facets": [list(map(int, f)) for f in K.facets],
                       "volume": K.volume}
    return doc


def _plain(obj):
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, np.generic):
        return obj.item()
    return obj


def report_document(loaded, result, checks=None, artifacts=None):
    """Report for one solve; ``result`` is a report, a list, or a dual pair."""
    spec = loaded.spec
    data = spec.f if spec.mode == "ma_circle" else spec.nu.values
    reps = list(result) if isinstance(result, (list, tuple)) or hasattr(result, "large") else [result]
    doc = {
        "problem_sha256": loaded.sha256,
        "problem": loaded.document,
        "seed": spec.seed,
        "mode": spec.mode,
        "status": overall_status(result),
        "precheck": loaded.precheck,
        "solutions": [_solution_document(r, data) for r in reps],
        "checks": _plain(checks or {}),
        "artifacts": artifacts or {},
    }
    if hasattr(result, "pivot"):
        doc["pivot_mass"] = result.pivot
        doc["masses_straddle_pivot"] = result.masses_straddle_pivot
    return doc


def overall_status(result):
    if isinstance(result, list):
        if not result:
            return "no_solution"
        return "converged" if all(r.converged for r in result) else "not_converged"
    if hasattr(result, "large"):
        return result.status
    return result.status


def write_report(doc, path):
    Path(path).write_text(canonical_json(doc))


# -- geometry emitters --------------------------------------------------------------

def _active_facets(P):
    return [list(map(int, P.facets[i])) for i in np.nonzero(P.active)[0]]


def emit_geometry(P, fmt, path=None):
    """Text of ``P`` as SVG (planar), OBJ (spatial) or CSV; written if ``path``."""
    n = P.dimension
    if fmt == "svg":
        if n != 2:
            raise ValueError("svg output needs a planar body")
        V = P.vertex_cycle()
        scale = float(np.max(np.abs(V)))
        W = V / scale
        pts = " ".join(f"{'M' if i == 0 else 'L'} {x:.17g} {-y:.17g}" for i, (x, y) in enumerate(W))
        text = ('<svg xmlns="http://www.w3.org/2000/svg" viewBox="-1.05 -1.05 2.1 2.1">\n'
                f'  <!-- coordinates divided by {scale:.17g} -->\n'
                f'  <path d="{pts} Z" fill="none" stroke="black" stroke-width="0.01"/>\n</svg>\n')
    elif fmt == "obj":
        if n != 3:
            raise ValueError("obj output needs a spatial body")
        lines = [f"v {x:.17g} {y:.17g} {z:.17g}" for x, y, z in P.vertices]
        lines += ["f " + " ".join(str(k + 1) for k in f) for f in _active_facets(P)]
        text = "\n".join(lines) + "\n"
    elif fmt == "csv":
        if n == 2:
            V = P.vertex_cycle()
            text = "x,y\n" + "".join(f"{x:.17g},{y:.17g}\n" for x, y in V)
        else:
            rows = ["facet,vertex,x,y,z"]
            for i, f in zip(np.nonzero(P.active)[0], _active_facets(P)):
                rows += [f"{i},{k},{x:.17g},{y:.17g},{z:.17g}" for k, (x, y, z) in zip(f, P.vertices[f])]
            text = "\n".join(rows) + "\n"
    else:
        raise ValueError(f"unknown geometry format {fmt!r}")
    if path is not None:
        Path(path).write_text(text)
    return text


def read_geometry_csv(path):
    """Polytope from a CSV written by :func:`emit_geometry`."""
    with open(path) as fh:
        header = fh.readline().strip().split(",")
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    cols = [header.index(c) for c in ("x", "y", "z") if c in header]
    return polytope_from_points(data[:, cols])


def body_from_solution(sol):
    """Wulff polytope of a report solution's support table."""
    table = sol.get("table")
    if not table:
        raise SchemaError("solutions", "solution has no support table")
    units = np.array([row["direction"] for row in table], dtype=float)
    h = np.array([row["h"] for row in table], dtype=float)
    return wulff_shape(units, h)


__all__ = [
    "SCHEMA_VERSION", "LoadedProblem", "canonical_json", "read_document", "weight_from_descriptor",
    "spec_from_document", "load_problem", "parse_problem", "problem_document", "serialize_problem",
    "report_document", "overall_status", "write_report", "emit_geometry", "read_geometry_csv",
    "body_from_solution",
]
