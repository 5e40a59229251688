"""Command-line entry point: ``chemolab <subcommand> ...``.

Exit codes: 0 success, 1 usage/config error, 2 numerical failure or early
stop of a simulation, 3 invariant or feasibility violation.
"""
from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import sys
from pathlib import Path

from . import grid as G
from .convergence import convergence_study
from .diagnostics import (
    EARLY_STOPS,
    Trace,
    check_fubini_inequality,
    check_mass_conservation,
    check_w_l1_bound,
)
from .errors import NumericalFailure, PreconditionError
from .exponents import INFEASIBLE, SUBLINEAR, as_fraction, select_exponents
from .initial import build_initial
from .model import ModelParams
from .stepper import SolverConfig, run
from .sweep import SweepConfig, sweep

log = logging.getLogger("chemolab")

EXIT_OK, EXIT_USAGE, EXIT_NUMERICAL, EXIT_VIOLATION = 0, 1, 2, 3

CHECKS = ("mass_conservation", "w_l1_bound", "fubini")

_GRID_KEYS = {"dim", "mode", "extent", "resolution", "effective_n"}
_SIM_KEYS = {"grid", "model", "solver", "initial_condition", "output"}
_IC_KEYS = {"kind", "mass", "width", "center", "background", "c", "path"}


class ConfigError(ValueError):
    pass


def _strict(d, allowed, where):
    if not isinstance(d, dict):
        raise ConfigError(f"{where}: expected an object")
    unknown = sorted(set(d) - set(allowed))
    if unknown:
        raise ConfigError(f"{where}: unknown keys {unknown}")
    return d


def _dataclass_keys(cls):
    return {f.name for f in dataclasses.fields(cls) if f.init}


def load_config(path):
    if path is None:
        return {}
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"config file not found: {path}")
    try:
        return json.loads(p.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from exc


def _model(d):
    d = dict(_strict(d, _dataclass_keys(ModelParams), "model"))
    if "alpha" in d:
        d["alpha"] = float(as_fraction(d["alpha"]))
    return ModelParams(**d)


def _solver(d):
    d = dict(_strict(d, _dataclass_keys(SolverConfig), "solver"))
    if "lp_list" in d:
        d["lp_list"] = tuple(float(as_fraction(p)) for p in d["lp_list"])
    return SolverConfig(**d)


def _initial(d):
    return dict(_strict(d, _IC_KEYS, "initial_condition"))


def simulation_from_config(cfg, args=None):
    """Grid, model, solver, initial state and output prefix from a config
    mapping, with command-line overrides applied."""
    _strict(cfg, _SIM_KEYS, "config")
    gd = dict(_strict(cfg.get("grid", {}), _GRID_KEYS, "grid"))
    md = dict(cfg.get("model", {}))
    sd = dict(cfg.get("solver", {}))
    ic = dict(cfg.get("initial_condition", {"kind": "gaussian_bump", "mass": 10.0, "width": 0.1}))
    output = cfg.get("output", "trace")
    if args is not None:
        for key, target, name in (
            ("alpha", md, "alpha"),
            ("t_end", sd, "t_end"),
            ("dt", sd, "dt"),
            ("cfl", sd, "cfl"),
            ("blowup_threshold", sd, "blowup_linf_threshold"),
            ("resolution", gd, "resolution"),
            ("dim", gd, "dim"),
        ):
            val = getattr(args, key, None)
            if val is not None:
                target[name] = val
        if getattr(args, "output", None):
            output = args.output
    mode = gd.get("mode", "cartesian")
    g = G.build_grid(
        dim=gd.get("dim", 1 if mode == "radial" else 2),
        mode=mode,
        extents=gd.get("extent", 1.0),
        resolutions=gd.get("resolution", 32),
        effective_n=gd.get("effective_n"),
    )
    params = _model(md)
    solver = _solver(sd)
    initial = build_initial(g, _initial(ic), params)
    return g, params, solver, initial, output


def write_plot_data(trace, path):
    t, linf, mass, l1w = trace["t"], trace["linf_u"], trace["mass_u"], trace["l1_w"]
    lines = ["t\tlinf_u\tmass_u\tl1_w"]
    lines += [f"{a!r}\t{b!r}\t{c!r}\t{d!r}" for a, b, c, d in zip(t, linf, mass, l1w)]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def cmd_simulate(args):
    g, params, solver, initial, output = simulation_from_config(load_config(args.config), args)
    code = EXIT_OK
    try:
        trace = run(initial, params, solver, g)
    except NumericalFailure as exc:
        print(f"numerical failure at t={exc.t}: {exc}", file=sys.stderr)
        trace = exc.trace
        code = EXIT_NUMERICAL
    if trace.stop_reason in EARLY_STOPS:
        code = EXIT_NUMERICAL
    trace.to_csv(f"{output}.csv")
    write_plot_data(trace, f"{output}.tsv")
    print(f"{trace.stop_reason}: t={trace.header['t_reached']:.6g} "
          f"steps={trace.header['steps']} trace={output}.csv")
    return code


def cmd_exponents(args):
    try:
        alpha = as_fraction(args.alpha)
        p = as_fraction(args.p) if args.p is not None else None
    except (ValueError, ZeroDivisionError) as exc:
        raise ConfigError(f"cannot parse rational: {exc}") from exc
    res = select_exponents(args.n, alpha, p)
    if res == INFEASIBLE:
        print(json.dumps({"n": args.n, "alpha": str(alpha), "status": INFEASIBLE}))
        return EXIT_VIOLATION
    if res == SUBLINEAR:
        print(json.dumps({"n": args.n, "alpha": str(alpha), "status": SUBLINEAR,
                          "note": "alpha <= 1: the exponent chain is not needed"}))
        return EXIT_OK
    print(json.dumps(res.to_dict(), indent=2, sort_keys=True))
    return EXIT_OK


def cmd_verify(args):
    path = Path(args.trace)
    if not path.is_file():
        raise ConfigError(f"trace file not found: {path}")
    trace = Trace.read_csv(path)
    checks = args.checks.split(",") if args.checks else list(CHECKS)
    results = []
    for name in checks:
        if name == "mass_conservation":
            results.append(check_mass_conservation(trace, args.rtol))
        elif name == "w_l1_bound":
            results.append(check_w_l1_bound(trace, args.tol))
        elif name == "fubini":
            res = check_fubini_inequality(trace["t"], trace["l1_ualpha"], args.delta,
                                          args.q, tol=args.fubini_tol)
            results.append(res)
        else:
            raise ConfigError(f"unknown check {name!r}; choose from {CHECKS}")
    report = {"trace": str(path), "checks": [r.to_dict() for r in results]}
    for r in report["checks"]:
        r["pass"] = bool(r["pass"])
        r["max_violation"] = float(r["max_violation"])
        r["tolerance"] = float(r["tolerance"])
    text = json.dumps(report, indent=2, sort_keys=True)
    if args.report:
        Path(args.report).write_text(text + "\n", encoding="utf-8")
    print(text)
    failed = [r["name"] for r in report["checks"] if not r["pass"]]
    if failed:
        print("violated: " + ", ".join(failed), file=sys.stderr)
        return EXIT_VIOLATION
    return EXIT_OK


def cmd_convergence(args):
    stencil = "first_order" if args.first_order else "standard"
    errors, orders = convergence_study(args.resolutions, args.dim, stencil, args.t_end)
    for m, e in zip(args.resolutions, errors):
        print(f"m={m:5d}  linf_error={e:.6e}")
    for o in orders:
        print(f"observed order {o:.4f}")
    ok = all(1.8 <= o <= 2.2 for o in orders)
    return EXIT_OK if ok else EXIT_VIOLATION


def sweep_from_config(cfg, args=None):
    keys = _dataclass_keys(SweepConfig)
    d = dict(_strict(cfg, keys, "sweep config"))
    if "solver" in d:
        d["solver"] = _solver(d["solver"])
    if "model" in d:
        d["model"] = _model(d["model"])
    if "initial_condition" in d:
        d["initial_condition"] = _initial(d["initial_condition"])
    if args is not None:
        if args.workers is not None:
            d["parallel_workers"] = args.workers
        if args.output_dir is not None:
            d["output_dir"] = args.output_dir
    if "alpha_list" not in d:
        raise ConfigError("sweep config needs alpha_list")
    return SweepConfig(**d)


def cmd_sweep(args):
    config = sweep_from_config(load_config(args.config), args)
    try:
        table = sweep(config)
    except OSError as exc:
        raise ConfigError(str(exc)) from exc
    print(f"wrote {len(table)} rows to {Path(config.output_dir) / 'regime_table.csv'}")
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(prog="chemolab", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="run one simulation and write its trace")
    p.add_argument("--config", help="JSON config file")
    p.add_argument("--alpha", type=str)
    p.add_argument("--t-end", type=float)
    p.add_argument("--dt", type=float)
    p.add_argument("--cfl", type=float)
    p.add_argument("--blowup-threshold", type=float)
    p.add_argument("--resolution", type=int)
    p.add_argument("--dim", type=int)
    p.add_argument("--output", help="output prefix (writes PREFIX.csv and PREFIX.tsv)")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("exponents", help="certify the exponent chain for (n, alpha)")
    p.add_argument("-n", type=int, required=True, choices=(1, 2, 3))
    p.add_argument("-a", "--alpha", required=True, help="rational, e.g. 3/2 or 1.5")
    p.add_argument("-p", help="requested testing exponent p")
    p.set_defaults(func=cmd_exponents)

    p = sub.add_parser("verify", help="run diagnostics on a trace file")
    p.add_argument("trace")
    p.add_argument("--checks", help=f"comma-separated subset of {','.join(CHECKS)}")
    p.add_argument("--rtol", type=float, default=1e-10, help="mass drift tolerance")
    p.add_argument("--tol", type=float, default=1e-6, help="w-L1 bound tolerance")
    p.add_argument("--delta", type=float, default=0.5)
    p.add_argument("-q", type=float, default=2.0)
    p.add_argument("--fubini-tol", type=float, default=1e-9)
    p.add_argument("--report", help="also write the JSON report here")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("convergence", help="Neumann eigenmode spatial order study")
    p.add_argument("--dim", type=int, default=1, choices=(1, 2))
    p.add_argument("--resolutions", type=int, nargs="+", default=[32, 64, 128])
    p.add_argument("--t-end", type=float, default=0.1)
    p.add_argument("--first-order", action="store_true",
                   help="debug: use a first-order stencil (negative control)")
    p.set_defaults(func=cmd_convergence)

    p = sub.add_parser("sweep", help="run a parameter sweep")
    p.add_argument("--config", required=True)
    p.add_argument("--workers", type=int)
    p.add_argument("--output-dir")
    p.set_defaults(func=cmd_sweep)
    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ConfigError, PreconditionError, ValueError, TypeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        parser.print_usage(sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
