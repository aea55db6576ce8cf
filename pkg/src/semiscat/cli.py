"""Command-line front end: forward, synth, invert, check and plotdata.

Exit codes: 0 ok, 1 configuration/input error, 2 gate violation,
3 divergence or resonance, 4 ill-posed reconstruction or missing records.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path

import numpy as np
from threadpoolctl import threadpool_limits

from . import io
from .checks import FAULTS, format_table, run_checks
from .config import (
    build_context,
    build_grid,
    build_model,
    build_plan,
    forward_density,
    load_config,
    reconstruction_grid,
)
from .errors import ConfigError, IllPosedError, SemiscatError
from .fields import ComplexField, far_field_of_source, herglotz_wave
from .forward import solve_nonlinear
from .inverse import recover_all
from .linearize import synthesize_dataset
from .specfun import WaveContext

log = logging.getLogger("semiscat")

THREADS_ENV = "SEMISCAT_THREADS"


def _out_dir(args, cfg):
    out = Path(args.out or cfg.io.output)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _echo_config(cfg, out):
    io.write_json(out / "config.effective.json", cfg.effective())


def cmd_forward(args):
    cfg = load_config(args.config)
    out = _out_dir(args, cfg)
    _echo_config(cfg, out)
    ctx = build_context(cfg)
    grid = build_grid(cfg)
    model = build_model(cfg, grid)
    g, delta = forward_density(cfg)
    u_sc, report = solve_nonlinear(model, g, ctx, delta, tol=cfg.forward.tol, max_iter=cfg.forward.max_iter,
                                   delta0=cfg.plan.delta0)
    u_in = herglotz_wave(g, ctx, grid.nodes)
    ff = far_field_of_source(ComplexField(grid, model.evaluate_values(u_sc.values + u_in)), ctx,
                             build_plan(cfg).obs)
    io.write_json(out / "field.json", io.field_to_json(u_sc))
    io.write_json(out / "farfield.json", io.farfield_to_json(ff))
    io.atomic_write(out / "report.txt", "\n".join(report.lines()) + "\n")
    print(f"converged in {report.iterations} iterations; outputs in {out}")
    return 0


def cmd_synth(args):
    cfg = load_config(args.config)
    out = _out_dir(args, cfg)
    _echo_config(cfg, out)
    ctx = build_context(cfg)
    grid = build_grid(cfg)
    model = build_model(cfg, grid)
    plan = build_plan(cfg)
    ds = synthesize_dataset(model, plan, ctx)
    doc = io.dataset_to_json(ds, ctx)
    io.write_json(out / "dataset.json", doc)
    head = doc["header"]
    print(f"records: {head['record_count']} of {head['required_records']} required; complete: {head['complete']}")
    if ds.failures:
        first = next(iter(ds.failures.values()))
        log.error("dataset incomplete: %d failed solves (first: %s)", len(ds.failures), first)
        return 3
    return 0


def cmd_invert(args):
    cfg = load_config(args.config)
    out = _out_dir(args, cfg)
    _echo_config(cfg, out)
    ds_path = args.dataset or (out / "dataset.json")
    ds, wave = io.dataset_from_json(io.read_json(ds_path))
    ctx = WaveContext(float(wave["k"]), int(wave["d"]))
    missing = ds.missing
    if missing:
        raise IllPosedError("dataset incomplete; absent epsilon indices: "
                            + ", ".join(io.eps_key(i) for i in missing))
    grid = reconstruction_grid(cfg)
    L = cfg.inverse.L or ds.plan.max_order
    result = recover_all(ds, grid, ctx, L=L, lambda_schedule=cfg.inverse.lambda_schedule,
                         max_outer=cfg.inverse.max_outer, R=cfg.grid.R, discrepancy=cfg.inverse.discrepancy)
    io.write_json(out / "reconstruction.json", io.reconstruction_to_json(result, grid))
    orders = np.arange(1, len(result.coefficients) + 1)
    io.write_csv(out / "residuals.csv", "order,relative_misfit,lambda_abs,iterations",
                 [orders, result.residuals, result.lambdas, result.iterations])
    print(f"recovered orders 1..{len(result.coefficients)}; outputs in {out}")
    return 0


def cmd_check(args):
    k = 3.0
    if args.config:
        k = load_config(args.config).wave.k
    results = run_checks(k=k, name_filter=args.filter, fault=args.inject_fault)
    if not results:
        raise ConfigError(f"no check matches filter {args.filter!r}")
    for line in format_table(results):
        print(line)
    failed = [r.name for r in results if not r.passed]
    print(f"{len(results) - len(failed)} passed, {len(failed)} failed")
    return 1 if failed else 0


def cmd_plotdata(args):
    doc = io.read_json(args.input)
    kind = args.kind
    out = Path(args.out) if args.out else Path(args.input).with_suffix(f".{kind}.csv")
    if kind == "farfield":
        if doc.get("format") != "semiscat-farfield":
            raise ConfigError("farfield plots need a far-field file")
        ff = io.farfield_from_json(doc)
        v = ff.values
        io.write_csv(out, "theta_rad,re,im,abs", [ff.obs.angles, v.real, v.imag, np.abs(v)])
    elif kind == "field":
        if doc.get("format") == "semiscat-field":
            d = int(doc["grid"]["d"])
            nodes = np.asarray(doc["nodes"], dtype=float).reshape(-1, d)
            v = io.complex_from_json(doc["values"])
        elif doc.get("format") == "semiscat-reconstruction":
            d = int(doc["grid"]["d"])
            nodes = np.asarray(doc["nodes"], dtype=float).reshape(-1, d)
            coeffs = doc["coefficients"]
            if not 1 <= args.order <= len(coeffs):
                raise ConfigError(f"--order must lie in 1..{len(coeffs)}")
            v = io.complex_from_json(coeffs[args.order - 1])
        else:
            raise ConfigError("field plots need a field or reconstruction file")
        names = ",".join(f"x{i + 1}_length" for i in range(d))
        io.write_csv(out, f"{names},re,im,abs", [*nodes.T, v.real, v.imag, np.abs(v)])
    elif kind == "residual":
        if "m" not in doc or "residual" not in doc:
            raise ConfigError("residual plots need a file with 'm' and 'residual' arrays")
        io.write_csv(out, "m_directions,relative_residual", [doc["m"], doc["residual"]])
    else:
        raise ConfigError(f"unknown plot kind {kind!r}")
    print(f"wrote {out}")
    return 0


def build_parser():
    p = argparse.ArgumentParser(prog="semiscat", description="Semilinear Helmholtz scattering toolkit")
    p.add_argument("--threads", type=int, default=None, help=f"thread cap (env {THREADS_ENV} overrides)")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    f = sub.add_parser("forward", help="solve the direct problem for one incident density")
    f.add_argument("--config", required=True)
    f.add_argument("--out")
    f.set_defaults(func=cmd_forward)

    s = sub.add_parser("synth", help="synthesise a far-field dataset over the epsilon grid")
    s.add_argument("--config", required=True)
    s.add_argument("--out")
    s.set_defaults(func=cmd_synth)

    i = sub.add_parser("invert", help="recover the Taylor coefficients from a dataset")
    i.add_argument("--config", required=True)
    i.add_argument("--dataset", help="dataset file (default: OUT/dataset.json)")
    i.add_argument("--out")
    i.set_defaults(func=cmd_invert)

    c = sub.add_parser("check", help="run the invariant suite")
    c.add_argument("--config")
    c.add_argument("--filter", help="only checks whose name contains this text")
    c.add_argument("--inject-fault", choices=FAULTS, help=argparse.SUPPRESS)
    c.set_defaults(func=cmd_check)

    pl = sub.add_parser("plotdata", help="convert an output file to CSV")
    pl.add_argument("--input", required=True)
    pl.add_argument("--kind", required=True, help="farfield | field | residual")
    pl.add_argument("--order", type=int, default=1, help="coefficient order for reconstruction files")
    pl.add_argument("--out")
    pl.set_defaults(func=cmd_plotdata)
    return p


def _thread_cap(flag):
    env = os.environ.get(THREADS_ENV)
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise ConfigError(f"{THREADS_ENV} must be an integer, got {env!r}") from None
    return flag


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cap = _thread_cap(args.threads)
        if cap is not None:
            with threadpool_limits(limits=cap):
                return args.func(args)
        return args.func(args)
    except SemiscatError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
