"""Serialization: run configs, solver states, field tables.

Everything is written through :func:`atomic_write`, so an output file is
either complete or absent.
"""

from __future__ import annotations

import csv
import io
import json
import os
import tempfile
from pathlib import Path

import jsonschema
import numpy as np

from .domains import domain_from_descriptor, public_descriptor
from .errors import ConfigError, InvalidInputError
from .grid import Grid, build_grid, derivatives
from .operator import curvature_matrix
from .solver import SolveConfig, SolveState

FIELD_COLUMNS = ["i_r", "i_phi", "x", "y", "u", "ux", "uy", "uxx", "uxy", "uyy",
                 "kappa1", "kappa2", "residual", "is_boundary"]

_CENTER = {"type": "array", "items": {"type": "number"}, "minItems": 2, "maxItems": 2}
_POS = {"type": "number", "exclusiveMinimum": 0}

DOMAIN_SCHEMA = {
    "oneOf": [
        {"type": "object", "required": ["type"], "additionalProperties": False,
         "properties": {"type": {"const": "disc"}, "radius": _POS, "center": _CENTER}},
        {"type": "object", "required": ["type", "semi_axes"], "additionalProperties": False,
         "properties": {"type": {"const": "ellipse"}, "center": _CENTER,
                        "semi_axes": {"type": "array", "items": _POS, "minItems": 2, "maxItems": 2}}},
        {"type": "object", "required": ["type"], "additionalProperties": False,
         "properties": {"type": {"const": "superellipse"}, "a": _POS, "b": _POS, "center": _CENTER,
                        "m": {"type": "integer", "minimum": 4, "multipleOf": 2},
                        "eps": {"type": "number", "exclusiveMinimum": 0, "maximum": 1}}},
    ]
}

_RESOLUTION = {
    "type": "object", "required": ["n_r", "n_phi"], "additionalProperties": False,
    "properties": {"n_r": {"type": "integer", "minimum": 8},
                   "n_phi": {"type": "integer", "minimum": 16, "multipleOf": 2}},
}

CONFIG_SCHEMA = {
    "type": "object",
    "required": ["source_domain", "target_domain", "grid", "homotopy", "newton", "output"],
    "additionalProperties": False,
    "properties": {
        "source_domain": DOMAIN_SCHEMA,
        "target_domain": DOMAIN_SCHEMA,
        "grid": _RESOLUTION,
        "homotopy": {
            "type": "object", "required": ["mode", "steps", "min_step"], "additionalProperties": False,
            "properties": {"mode": {"enum": ["uniform", "adaptive"]},
                           "steps": {"type": "integer", "minimum": 1},
                           "min_step": {"type": "number", "exclusiveMinimum": 0, "maximum": 1}},
        },
        "newton": {
            "type": "object", "required": ["tol", "max_iter"], "additionalProperties": False,
            "properties": {"tol": _POS, "max_iter": {"type": "integer", "minimum": 1},
                           "armijo": _POS, "min_damping": _POS, "convexity_guard": {"type": "number"},
                           "normalization": {"enum": ["mean", "pole"]}},
        },
        "output": {
            "type": "object", "required": ["dir", "emit_csv", "emit_svg", "emit_dual"],
            "additionalProperties": False,
            "properties": {"dir": {"type": "string", "minLength": 1}, "emit_csv": {"type": "boolean"},
                           "emit_svg": {"type": "boolean"}, "emit_dual": {"type": "boolean"}},
        },
        "seed": {"type": "integer"},
        "sweep": {"type": "array", "items": _RESOLUTION},
    },
}


def validate_config(cfg: dict) -> dict:
    """Schema validation; returns a copy with defaults filled in."""
    try:
        jsonschema.validate(cfg, CONFIG_SCHEMA)
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"invalid config at {where}: {exc.message}") from None
    out = json.loads(json.dumps(cfg))
    out.setdefault("seed", 0)
    return out


def load_config(path) -> dict:
    try:
        with open(path) as fh:
            cfg = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    return validate_config(cfg)


def solve_config(cfg: dict) -> SolveConfig:
    hom, newton = cfg["homotopy"], cfg["newton"]
    kw = dict(newton_tol=newton["tol"], max_newton_iters=newton["max_iter"],
              homotopy_steps=hom["steps"], adaptive=hom["mode"] == "adaptive",
              min_t_step=hom["min_step"])
    for key, name in (("armijo", "armijo"), ("min_damping", "min_damping"),
                      ("convexity_guard", "convexity_guard"), ("normalization", "normalization")):
        if key in newton:
            kw[name] = newton[key]
    return SolveConfig(**kw)


def problem_from_config(cfg: dict):
    source = domain_from_descriptor(cfg["source_domain"])
    target = domain_from_descriptor(cfg["target_domain"])
    grid = build_grid(source, cfg["grid"]["n_r"], cfg["grid"]["n_phi"])
    return source, target, grid


# -- writing ------------------------------------------------------------------

def atomic_write(path, text: str):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def dumps(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, default=_json_default) + "\n"


def _json_default(o):
    if isinstance(o, np.integer):
        return int(o)
    if isinstance(o, np.floating):
        return float(o)
    if isinstance(o, np.bool_):
        return bool(o)
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"not JSON serializable: {type(o).__name__}")


def _fmt(v):
    return repr(float(v))


def field_table(grid: Grid, u, residual, dual=None) -> str:
    """CSV text with one row per node; ``dual`` appends a flag column."""
    du, d2u = derivatives(grid, u)
    kappa = np.linalg.eigvalsh(curvature_matrix(du, d2u))
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(FIELD_COLUMNS + (["dual"] if dual is not None else []))
    for k in range(grid.size):
        row = [int(grid.i_r[k]), int(grid.i_phi[k]), _fmt(grid.points[k, 0]), _fmt(grid.points[k, 1]),
               _fmt(u[k]), _fmt(du[k, 0]), _fmt(du[k, 1]), _fmt(d2u[k, 0, 0]), _fmt(d2u[k, 0, 1]),
               _fmt(d2u[k, 1, 1]), _fmt(kappa[k, 0]), _fmt(kappa[k, 1]), _fmt(residual[k]),
               int(grid.is_boundary[k])]
        if dual is not None:
            row.append(int(dual))
        w.writerow(row)
    return buf.getvalue()


def state_to_dict(state: SolveState, cfg: dict, operator="primal") -> dict:
    return {
        "version": _version(),
        "operator": operator,
        "source_domain": cfg["source_domain"],
        "target_domain": cfg["target_domain"],
        "grid": cfg["grid"],
        "t": float(state.t),
        "c": float(state.c),
        "converged": bool(state.converged),
        "residual_norm": float(state.residual_norm),
        "u": [float(x) for x in state.u],
    }


def load_state(path):
    """Rebuild ``(state, source, target, grid, meta)`` from a state file."""
    try:
        with open(path) as fh:
            d = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise InvalidInputError(f"cannot read state {path}: {exc}") from None
    try:
        jsonschema.validate(d["source_domain"], DOMAIN_SCHEMA)
        jsonschema.validate(d["target_domain"], DOMAIN_SCHEMA)
        jsonschema.validate(d["grid"], _RESOLUTION)
        source = domain_from_descriptor(d["source_domain"])
        target = domain_from_descriptor(d["target_domain"])
        grid = build_grid(source, d["grid"]["n_r"], d["grid"]["n_phi"])
        u = np.asarray(d["u"], dtype=float)
        state = SolveState(u=u, c=float(d["c"]), t=float(d["t"]),
                           residual_norm=float(d.get("residual_norm", np.inf)),
                           converged=bool(d["converged"]))
    except (KeyError, TypeError, ValueError, jsonschema.ValidationError) as exc:
        raise InvalidInputError(f"malformed state file: {exc}") from None
    if u.shape != (grid.size,):
        raise InvalidInputError(f"state has {u.size} values, grid has {grid.size} nodes")
    return state, source, target, grid, d


def describe_domains(source, target):
    return {"source": public_descriptor(source), "target": public_descriptor(target)}


def _version():
    from . import __version__
    return __version__
