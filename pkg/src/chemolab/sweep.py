"""Parameter sweeps over transmission exponent, geometry and resolution.

Each case is run independently (case-level parallelism) and persists its
own trace file, named deterministically from the case parameters. A sweep
skips cases whose trace file already exists, so an interrupted sweep can
simply be restarted. The regime table is written once, by the parent,
in sorted case order.
"""
from __future__ import annotations

import csv
import io
import json
import logging
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from fractions import Fraction
from pathlib import Path

from . import grid as G
from .diagnostics import Trace, classify_regime
from .errors import NumericalFailure
from .exponents import alpha_threshold, as_fraction
from .initial import build_initial
from .model import ModelParams
from .stepper import SolverConfig, run

log = logging.getLogger(__name__)

TABLE_COLUMNS = (
    "n_effective", "alpha", "resolution", "classification", "sup_linf_u",
    "t_reached", "stop_reason", "threshold", "below_threshold",
)
DIMS = ("1", "2", "radial-3")


def _frac_str(x):
    return f"{x.numerator}/{x.denominator}"


def parse_dim(d):
    d = str(d)
    if d not in DIMS:
        raise ValueError(f"unknown sweep dimension {d!r}; choose from {DIMS}")
    return d


def grid_for(dim, resolution, extent=1.0):
    if dim == "radial-3":
        return G.build_grid(1, "radial", extent, resolution, effective_n=3)
    return G.build_grid(int(dim), "cartesian", extent, resolution)


def n_effective(dim):
    return 3 if dim == "radial-3" else int(dim)


@dataclass
class SweepConfig:
    alpha_list: list
    dims: list = field(default_factory=lambda: ["2"])
    resolutions: list = field(default_factory=lambda: [32])
    solver: SolverConfig = field(default_factory=SolverConfig)
    model: ModelParams = field(default_factory=ModelParams)
    initial_condition: dict = field(
        default_factory=lambda: {"kind": "gaussian_bump", "mass": 10.0, "width": 0.1}
    )
    extent: float = 1.0
    parallel_workers: int = 1
    output_dir: str = "sweep_out"
    window_fraction: float = 0.5

    def __post_init__(self):
        if not self.alpha_list:
            raise ValueError("alpha_list must not be empty")
        self.alpha_list = [as_fraction(a) for a in self.alpha_list]
        self.dims = [parse_dim(d) for d in self.dims]
        self.resolutions = [int(m) for m in self.resolutions]
        if self.parallel_workers < 1:
            raise ValueError("parallel_workers must be >= 1")

    def cases(self):
        out = [
            Case(d, a, m)
            for d in self.dims
            for a in self.alpha_list
            for m in self.resolutions
        ]
        return sorted(set(out), key=Case.sort_key)


@dataclass(frozen=True)
class Case:
    dim: str
    alpha: Fraction
    resolution: int

    def sort_key(self):
        return (n_effective(self.dim), self.dim, self.alpha, self.resolution)

    @property
    def filename(self):
        a = self.alpha
        tag = self.dim.replace("-", "")
        return f"case_d{tag}_a{a.numerator}-{a.denominator}_m{self.resolution}.csv"


def run_case(case, config):
    """Simulate one case and classify it.

    Numerical failures are caught and end up as ``blowup_suspect`` with
    stop reason ``numerical_failure``; the (partial) trace is returned.
    """
    g = grid_for(case.dim, case.resolution, config.extent)
    params = replace(config.model, alpha=float(case.alpha))
    initial = build_initial(g, config.initial_condition, params)
    try:
        trace = run(initial, params, config.solver, g)
    except NumericalFailure as exc:
        log.warning("case %s failed at t=%s: %s", case, exc.t, exc)
        trace = exc.trace
    return trace, classify_regime(trace, config.window_fraction)


def _table_row(case, trace, cls):
    n = n_effective(case.dim)
    thr = alpha_threshold(n)
    return {
        "n_effective": n,
        "alpha": case.alpha,
        "resolution": case.resolution,
        "classification": cls.label,
        "sup_linf_u": cls.sup_linf_u,
        "t_reached": float(trace.header.get("t_reached", trace["t"][-1])),
        "stop_reason": cls.stop_reason,
        "threshold": thr,
        "below_threshold": case.alpha < thr,
    }


def _run_and_persist(case, config):
    path = Path(config.output_dir) / case.filename
    trace, cls = run_case(case, config)
    trace.to_csv(path)
    return _table_row(case, trace, cls)


class RegimeTable:
    def __init__(self, rows):
        self.rows = list(rows)

    def __len__(self):
        return len(self.rows)

    def to_csv(self, path=None):
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(TABLE_COLUMNS)
        for r in self.rows:
            writer.writerow([
                r["n_effective"],
                _frac_str(r["alpha"]),
                r["resolution"],
                r["classification"],
                repr(float(r["sup_linf_u"])),
                repr(float(r["t_reached"])),
                r["stop_reason"],
                _frac_str(r["threshold"]),
                "true" if r["below_threshold"] else "false",
            ])
        text = buf.getvalue()
        if path is not None:
            Path(path).write_text(text, encoding="utf-8")
        return text

    def summary(self):
        counts = {}
        for r in self.rows:
            counts[r["classification"]] = counts.get(r["classification"], 0) + 1
        return {
            "cases": len(self.rows),
            "classifications": dict(sorted(counts.items())),
            "below_threshold": sum(bool(r["below_threshold"]) for r in self.rows),
        }


def sweep(config):
    """Run every case of ``config`` and write ``regime_table.csv`` and
    ``summary.json`` into ``config.output_dir``."""
    out = Path(config.output_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot use output directory {out}: {exc}") from exc
    if not os.access(out, os.W_OK):
        raise OSError(f"output directory {out} is not writable")

    workers = int(os.environ.get("CHEMOLAB_WORKERS", config.parallel_workers))
    cases = config.cases()
    rows = {}
    todo = []
    for case in cases:
        path = out / case.filename
        if path.exists():
            trace = Trace.read_csv(path)
            rows[case] = _table_row(case, trace, classify_regime(trace, config.window_fraction))
        else:
            todo.append(case)
    log.info("sweep: %d cases, %d cached, %d to run", len(cases), len(cases) - len(todo), len(todo))

    if workers > 1 and len(todo) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = pool.map(_run_and_persist, todo, [config] * len(todo))
            for case, row in zip(todo, results):
                rows[case] = row
    else:
        for case in todo:
            rows[case] = _run_and_persist(case, config)

    table = RegimeTable(rows[c] for c in cases)
    table.to_csv(out / "regime_table.csv")
    (out / "summary.json").write_text(
        json.dumps(table.summary(), indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    return table
