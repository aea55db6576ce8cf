"""Deterministic JSON/CSV output: 17-significant-digit numbers and atomic writes."""

from __future__ import annotations

import json
import os
import re
import tempfile
from pathlib import Path

import numpy as np

from .errors import ConfigError
from .fields import ComplexField, FarField, HerglotzDensity
from .geometry import DirectionSet, build_disk_grid
from .linearize import ExperimentPlan, ScatteringDataset, required_indices

_KEY = re.compile(r"^eps:\((\d+(?:,\d+)*),?\)$")


def _num(x):
    x = float(x)
    if not np.isfinite(x):
        raise ValueError("cannot serialise non-finite numbers")
    return format(x, ".17g")


def dumps(obj, indent=0):
    """JSON text with floats written at 17 significant digits; key order is preserved."""
    pad = "  " * indent
    inner = "  " * (indent + 1)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{inner}{json.dumps(str(k))}: {dumps(v, indent + 1)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + pad + "}"
    if isinstance(obj, np.ndarray):
        obj = obj.tolist()
    if isinstance(obj, (list, tuple)):
        if all(isinstance(v, (int, float, np.floating, np.integer)) and not isinstance(v, bool) for v in obj):
            return "[" + ", ".join(str(int(v)) if isinstance(v, (int, np.integer)) else _num(v) for v in obj) + "]"
        if not obj:
            return "[]"
        return "[\n" + ",\n".join(inner + dumps(v, indent + 1) for v in obj) + "\n" + pad + "]"
    if isinstance(obj, bool) or obj is None:
        return json.dumps(obj)
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return _num(obj)
    return json.dumps(str(obj))


def atomic_write(path, text):
    """Write to a temporary file in the target directory, then rename over ``path``."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "w", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_json(path, obj):
    atomic_write(path, dumps(obj) + "\n")


def read_json(path):
    try:
        return json.loads(Path(path).read_text())
    except FileNotFoundError:
        raise ConfigError(f"file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path} is not valid JSON: {exc}") from None


def complex_to_json(values):
    values = np.asarray(values, dtype=complex)
    return {"re": values.real, "im": values.imag}


def complex_from_json(obj):
    return np.asarray(obj["re"], dtype=float) + 1j * np.asarray(obj["im"], dtype=float)


def eps_key(index):
    return "eps:(" + ",".join(str(int(i)) for i in index) + ")"


def parse_eps_key(key):
    m = _KEY.match(key)
    if not m:
        raise ConfigError(f"malformed record key {key!r}")
    return tuple(int(i) for i in m.group(1).split(","))


def _dirs_to_json(dirs: DirectionSet):
    return {"dirs": dirs.dirs.ravel(), "weights": dirs.weights, "d": dirs.d}


def _dirs_from_json(obj):
    d = int(obj["d"])
    return DirectionSet(np.asarray(obj["dirs"], dtype=float).reshape(-1, d), np.asarray(obj["weights"], dtype=float))


def field_to_json(f: ComplexField, extra=None):
    g = f.grid
    out = {"format": "semiscat-field", "grid": {"R": g.R, "n": g.n, "d": g.d},
           "nodes": g.nodes.ravel(), "values": complex_to_json(f.values)}
    if extra:
        out.update(extra)
    return out


def field_from_json(obj) -> ComplexField:
    g = obj["grid"]
    grid = build_disk_grid(float(g["R"]), int(g["n"]), int(g["d"]))
    return ComplexField(grid, complex_from_json(obj["values"]))


def farfield_to_json(ff: FarField):
    return {"format": "semiscat-farfield", "obs": _dirs_to_json(ff.obs), "values": complex_to_json(ff.values)}


def farfield_from_json(obj) -> FarField:
    return FarField(_dirs_from_json(obj["obs"]), complex_from_json(obj["values"]))


def plan_to_json(plan: ExperimentPlan):
    return {
        "delta": plan.delta,
        "max_order": plan.max_order,
        "eps_ladder": list(plan.eps_ladder),
        "fd_scheme": plan.fd_scheme,
        "delta0": plan.delta0,
        "tol": plan.tol,
        "rtol": plan.rtol,
        "max_iter": plan.max_iter,
        "obs": _dirs_to_json(plan.obs),
        "density_dirs": _dirs_to_json(plan.densities[0].dirs),
        "densities": [complex_to_json(g.values) for g in plan.densities],
    }


def plan_from_json(obj) -> ExperimentPlan:
    dirs = _dirs_from_json(obj["density_dirs"])
    dens = [HerglotzDensity(dirs, complex_from_json(v)) for v in obj["densities"]]
    return ExperimentPlan(densities=dens, delta=float(obj["delta"]), max_order=int(obj["max_order"]),
                          obs=_dirs_from_json(obj["obs"]), eps_ladder=tuple(obj["eps_ladder"]),
                          fd_scheme=int(obj["fd_scheme"]), delta0=float(obj["delta0"]), tol=float(obj["tol"]),
                          rtol=float(obj["rtol"]), max_iter=int(obj["max_iter"]))


def dataset_to_json(ds: ScatteringDataset, ctx):
    missing = ds.missing
    header = {
        "provenance": ds.provenance,
        "complete": not missing,
        "required_records": len(required_indices(ds.plan)),
        "record_count": len(ds.records),
        "missing": [eps_key(i) for i in missing],
        "failures": {eps_key(i): msg for i, msg in sorted(ds.failures.items())},
    }
    records = {eps_key(i): complex_to_json(ds.records[i].values) for i in sorted(ds.records)}
    return {"format": "semiscat-dataset", "version": 1, "header": header,
            "wave": {"k": ctx.k, "d": ctx.d}, "plan": plan_to_json(ds.plan), "records": records}


def dataset_from_json(obj):
    """Returns (dataset, wave dict)."""
    if obj.get("format") != "semiscat-dataset":
        raise ConfigError("not a dataset file")
    plan = plan_from_json(obj["plan"])
    records = {parse_eps_key(k): FarField(plan.obs, complex_from_json(v)) for k, v in obj["records"].items()}
    for idx in records:
        if len(idx) != plan.M:
            raise ConfigError(f"record {eps_key(idx)} does not match {plan.M} densities")
    ds = ScatteringDataset(plan, records, provenance=obj["header"].get("provenance", "measured"))
    return ds, obj["wave"]


def reconstruction_to_json(result, grid):
    return {
        "format": "semiscat-reconstruction",
        "grid": {"R": grid.R, "n": grid.n, "d": grid.d},
        "nodes": grid.nodes.ravel(),
        "coefficients": [{"order": l, **complex_to_json(c.values)}
                         for l, c in enumerate(result.coefficients, start=1)],
        "residuals": list(result.residuals),
        "lambdas": list(result.lambdas),
        "iterations": list(result.iterations),
    }


def write_csv(path, header, columns):
    """Comma-separated columns at 17 significant digits under a single header line."""
    cols = [np.asarray(c, dtype=float) for c in columns]
    lines = [header]
    for row in zip(*cols):
        lines.append(",".join(_num(v) for v in row))
    atomic_write(path, "\n".join(lines) + "\n")
