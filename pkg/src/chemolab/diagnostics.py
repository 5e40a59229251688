"""Run traces and the checks that are evaluated on them.

Trace files are CSV. The leading ``#`` lines carry JSON metadata (grid,
model, solver settings, initial norms, stop reason); the columns are

    t, dt, mass_u, l1_w, l1_ualpha, linf_u, min_u, lp:<p>..., ge:<p>...

with one ``lp``/``ge`` pair per tracked exponent p.
"""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass

import numpy as np

from . import grid as G
from .errors import PreconditionError

BASE_COLUMNS = ("t", "dt", "mass_u", "l1_w", "l1_ualpha", "linf_u", "min_u")
_MAGIC = "# chemolab-trace v1"
# relative round-off level below which a differenced int u^p is noise
_LP_NOISE = 1e-10


def p_label(p):
    p = float(p)
    return str(int(p)) if p.is_integer() else repr(p)


class Trace:
    """Recorded time series of a run plus its metadata header."""

    def __init__(self, header, lp_list):
        self.header = header
        self.lp_list = tuple(float(p) for p in lp_list)
        self._rows = []

    @property
    def columns(self):
        cols = list(BASE_COLUMNS)
        cols += [f"lp:{p_label(p)}" for p in self.lp_list]
        cols += [f"ge:{p_label(p)}" for p in self.lp_list]
        return cols

    @classmethod
    def start(cls, state, params, cfg, g):
        u, w = state.u, state.w
        header = {
            "grid": g.describe(),
            "model": params.to_dict(),
            "solver": cfg.to_dict(),
            "initial": {
                "mass_u": G.integrate(u, g),
                "l1_w": G.integrate(np.abs(w), g),
                "int_u_p": {p_label(p): G.integrate(u**p, g) for p in cfg.lp_list},
            },
            "stop_reason": None,
            "t_reached": state.t,
            "steps": 0,
        }
        trace = cls(header, cfg.lp_list)
        trace.record(state, 0.0, params, cfg, g)
        return trace

    def record(self, state, dt, params, cfg, g):
        u = state.u
        row = [
            state.t,
            dt,
            G.integrate(u, g),
            G.integrate(np.abs(state.w), g),
            G.integrate(u**params.alpha, g),
            G.linf_norm(u),
            float(np.min(u)),
        ]
        row += [G.lp_norm(u, p, g) for p in self.lp_list]
        row += [G.gradient_energy(u, p, g) if p > 1 else math.nan for p in self.lp_list]
        self._rows.append(row)

    def append_row(self, values):
        """Append a raw row (mapping column name -> value)."""
        self._rows.append([float(values[c]) for c in self.columns])

    def finish(self, reason, t, steps=None):
        self.header["stop_reason"] = reason
        self.header["t_reached"] = t
        if steps is not None:
            self.header["steps"] = steps

    def __len__(self):
        return len(self._rows)

    def column(self, name):
        j = self.columns.index(name)
        return np.array([r[j] for r in self._rows], dtype=float)

    def __getitem__(self, name):
        return self.column(name)

    def lp(self, p):
        return self.column(f"lp:{p_label(p)}")

    def ge(self, p):
        return self.column(f"ge:{p_label(p)}")

    @property
    def stop_reason(self):
        return self.header.get("stop_reason")

    # --- persistence -------------------------------------------------------

    def to_csv(self, path=None):
        buf = io.StringIO()
        buf.write(_MAGIC + "\n")
        buf.write("# " + json.dumps(self.header, sort_keys=True) + "\n")
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(self.columns)
        for r in self._rows:
            writer.writerow([repr(float(x)) for x in r])
        text = buf.getvalue()
        if path is not None:
            with open(path, "w", encoding="utf-8") as fh:
                fh.write(text)
        return text

    @classmethod
    def read_csv(cls, path):
        with open(path, encoding="utf-8") as fh:
            lines = fh.read().splitlines()
        meta = [ln[1:].strip() for ln in lines if ln.startswith("#")]
        body = [ln for ln in lines if ln and not ln.startswith("#")]
        header = {}
        for m in meta:
            if m.startswith("{"):
                header.update(json.loads(m))
        reader = csv.reader(body)
        names = next(reader)
        if tuple(names[: len(BASE_COLUMNS)]) != BASE_COLUMNS:
            raise ValueError(f"{path}: unexpected trace columns {names}")
        lp = [float(n.split(":", 1)[1]) for n in names if n.startswith("lp:")]
        trace = cls(header, lp)
        if trace.columns != names:
            raise ValueError(f"{path}: malformed lp/ge columns {names}")
        for r in reader:
            trace._rows.append([float(x) for x in r])
        return trace


@dataclass
class CheckResult:
    name: str
    passed: bool
    max_violation: float
    tolerance: float

    def to_dict(self):
        d = asdict(self)
        d["pass"] = d.pop("passed")
        return d


# --- quadrature ------------------------------------------------------------


def _segment_weights(H, delta, e_right):
    """Exact weights of ``int e^{-delta (t - s)} g(s) ds`` over one segment for
    linear g, as (weight of left value, weight of right value).

    ``e_right`` is ``e^{-delta (t - s_right)}``.
    """
    x = np.asarray(delta * H, dtype=float)
    small = x < 1e-3
    xs = np.where(small, 1.0, x)
    phi = -np.expm1(-xs) / xs
    wl = np.where(small, 0.5 - x / 3 + x**2 / 8 - x**3 / 30, (phi - np.exp(-xs)) / xs)
    wr = np.where(small, 0.5 - x / 6 + x**2 / 24 - x**3 / 120, (1 - phi) / xs)
    return e_right * H * wl, e_right * H * wr


def exp_weighted_integral(times, values, delta, t=None):
    """``int_0^t e^{-delta (t - s)} g(s) ds`` for g sampled at ``times``.

    g is taken piecewise linear between samples and each segment is
    integrated against the exponential weight exactly. ``t`` defaults to the
    last sample time; if it falls between samples, g is interpolated there.
    """
    times = np.asarray(times, dtype=float)
    values = np.asarray(values, dtype=float)
    if delta < 0:
        raise ValueError("delta must be nonnegative")
    if times.ndim != 1 or times.shape != values.shape or len(times) < 1:
        raise ValueError("times and values must be 1D arrays of equal length")
    if np.any(np.diff(times) <= 0):
        raise ValueError("sample times must be strictly increasing")
    if t is None:
        t = times[-1]
    if t < times[0] or t > times[-1] * (1 + 1e-12) + 1e-300:
        raise ValueError(f"t={t} not covered by samples [{times[0]}, {times[-1]}]")
    k = int(np.searchsorted(times, t, side="right"))
    ts = times[:k]
    gs = values[:k]
    if ts[-1] < t:
        gt = float(np.interp(t, times, values))
        ts = np.append(ts, t)
        gs = np.append(gs, gt)
    if len(ts) < 2:
        return 0.0
    H = np.diff(ts)
    e_right = np.exp(-delta * (t - ts[1:]))
    wl, wr = _segment_weights(H, delta, e_right)
    return float(np.sum(wl * gs[:-1] + wr * gs[1:]))


def exp_convolution(times, values, rate):
    """``I(s_j) = int_0^{s_j} e^{-rate (s_j - σ)} g(σ) dσ`` at every sample."""
    times = np.asarray(times, dtype=float)
    values = np.asarray(values, dtype=float)
    H = np.diff(times)
    wl, wr = _segment_weights(H, rate, np.ones_like(H))
    decay = np.exp(-rate * H)
    out = np.zeros_like(times)
    for j in range(len(H)):
        out[j + 1] = decay[j] * out[j] + wl[j] * values[j] + wr[j] * values[j + 1]
    return out


# --- checks on traces ------------------------------------------------------


def _require_no_linear_terms(trace, what):
    model = trace.header.get("model", {})
    if model.get("k1", 0) or model.get("k2", 0):
        raise PreconditionError(
            f"{what} assumes k1 = k2 = 0; trace has k1={model.get('k1')}, k2={model.get('k2')}"
        )


def check_mass_conservation(trace, rtol=1e-10):
    _require_no_linear_terms(trace, "mass conservation")
    mass = trace["mass_u"]
    m0 = mass[0]
    drift = float(np.max(np.abs(mass - m0)))
    rel = drift / m0 if m0 > 0 else drift
    return CheckResult("mass_conservation", bool(rel <= rtol), float(rel), rtol)


def check_w_l1_bound(trace, tol=1e-6):
    """``||w(s)||_1 <= int_0^s e^{-(s-σ)} ||u^α(σ)||_1 dσ + ||w_0||_1`` at every row."""
    if len(trace) < 8:
        raise PreconditionError(f"w-L1 check needs at least 8 rows, trace has {len(trace)}")
    t = trace["t"]
    l1w = trace["l1_w"]
    w0 = trace.header.get("initial", {}).get("l1_w", l1w[0])
    conv = exp_convolution(t, trace["l1_ualpha"], 1.0)
    excess = l1w - (conv + w0)
    worst = float(np.max(excess))
    allowed = tol * (1.0 + w0)
    return CheckResult("w_l1_bound", bool(worst <= allowed), max(worst, 0.0), float(allowed))


def fubini_sides(times, g, delta, q, t=None):
    """Both sides of the exponential double-integral inequality.

    Returns ``(lhs, rhs)`` with
    lhs = int_0^t e^{-δ(t-s)} (int_0^s e^{-(s-σ)} g(σ) dσ)^q ds and
    rhs = 1/(1-δ) int_0^t e^{-δ(t-s)} g(s)^q ds.
    """
    if not 0 < delta < 1:
        raise PreconditionError(f"delta must lie in (0, 1), got {delta}")
    if q < 1:
        raise PreconditionError(f"q must be >= 1, got {q}")
    times = np.asarray(times, dtype=float)
    g = np.asarray(g, dtype=float)
    if np.any(g < 0):
        raise PreconditionError("g must be nonnegative")
    if t is None:
        t = times[-1]
    keep = times <= t
    times, g = times[keep], g[keep]
    inner = exp_convolution(times, g, 1.0)
    lhs = exp_weighted_integral(times, inner**q, delta, t)
    rhs = exp_weighted_integral(times, g**q, delta, t) / (1.0 - delta)
    return lhs, rhs


def check_fubini_inequality(times, g, delta, q, t=None, tol=1e-9):
    lhs, rhs = fubini_sides(times, g, delta, q, t)
    allowed = tol * (1.0 + rhs)
    excess = lhs - rhs
    return CheckResult("fubini_inequality", bool(excess <= allowed), max(float(excess), 0.0), float(allowed))


def check_lp_testing_identity(snapshots, p, g, tol_rel=0.05, t_skip=None, chemotaxis=True):
    """Compare d/dt ∫u^p with the energy identity assembled from the fields.

    ``snapshots`` is a sequence of States (k1 = k2 = 0 dynamics). The time
    derivative is a central difference of the recorded ∫u^p; the right side
    is ``-(4(p-1)/p) ∫|∇u^{p/2}|^2 - (p-1) ∫u^p Δv`` at the middle snapshot.
    With ``chemotaxis=False`` (diffusion-only runs) the cross term is
    dropped. Residuals are relative to the largest of the three terms at the
    same time (floored at the round-off level of the differenced integral,
    so a steady state does not divide noise by noise). Returns ``(CheckResult, profile)`` with profile rows
    ``(t, lhs, rhs, relative residual)``.
    """
    if not p > 1:
        raise PreconditionError("p must exceed 1")
    if len(snapshots) < 3:
        raise PreconditionError("need at least three snapshots")
    times = np.array([s.t for s in snapshots])
    gaps = np.diff(times)
    if np.any(gaps <= 0):
        raise PreconditionError("snapshot times must increase")
    ratio = gaps[1:] / gaps[:-1]
    if np.any(ratio > 2) or np.any(ratio < 0.5):
        raise PreconditionError("sample spacing varies by more than 2x between neighbours")
    if t_skip is None:
        t_skip = 0.1 * times[-1]
    int_up = np.array([G.integrate(s.u**p, g) for s in snapshots])
    profile = []
    for j in range(1, len(snapshots) - 1):
        if times[j] < t_skip:
            continue
        s = snapshots[j]
        lhs = (int_up[j + 1] - int_up[j - 1]) / (times[j + 1] - times[j - 1])
        diss = 4.0 * (p - 1) / p * G.gradient_energy(s.u, p, g)
        cross = (p - 1) * G.integrate(s.u**p * G.laplacian(s.v, g), g) if chemotaxis else 0.0
        rhs = -diss - cross
        # differencing cannot resolve changes below round-off of int u^p
        floor = _LP_NOISE * int_up[j] / (times[j + 1] - times[j - 1])
        scale = max(abs(lhs), diss, abs(cross), floor)
        rel = abs(lhs - rhs) / scale if scale > 0 else 0.0
        profile.append((float(times[j]), float(lhs), float(rhs), float(rel)))
    if not profile:
        raise PreconditionError("no snapshots after t_skip")
    worst = max(row[3] for row in profile)
    return CheckResult("lp_testing_identity", bool(worst <= tol_rel), worst, tol_rel), profile


# --- regime classification -------------------------------------------------

EARLY_STOPS = ("blowup_threshold", "dt_collapse", "numerical_failure")


@dataclass
class RegimeClassification:
    label: str
    sup_linf_u: float
    slope: float
    stop_reason: str


def classify_regime(trace, window_fraction=0.5, amplification=1e3, noise=1e-3):
    """Heuristic label for a run: bounded, growing, blowup_suspect or inconclusive.

    ``slope`` is the least-squares slope of ``linf_u`` against time over the
    final ``window_fraction`` of the run, normalised by the window length and
    the mean ``linf_u`` there, so it is unchanged by rescaling time. Values
    within ``noise`` of zero count as flat.
    """
    t = trace["t"]
    linf = trace["linf_u"]
    sup = float(np.max(linf))
    reason = trace.stop_reason or "completed"
    if reason in EARLY_STOPS:
        return RegimeClassification("blowup_suspect", sup, math.nan, reason)
    t0 = t[-1] - window_fraction * (t[-1] - t[0])
    sel = t >= t0
    if np.count_nonzero(sel) < 3 or t[-1] <= t[0]:
        return RegimeClassification("inconclusive", sup, math.nan, reason)
    tw, lw = t[sel], linf[sel]
    span = tw[-1] - tw[0]
    if span <= 0:
        return RegimeClassification("inconclusive", sup, math.nan, reason)
    slope = float(np.polyfit((tw - tw[0]) / span, lw, 1)[0])
    mean = float(np.mean(lw))
    rel = slope / mean if mean > 0 else 0.0
    if rel > noise:
        label = "growing"
    elif sup <= amplification * linf[0]:
        label = "bounded"
    else:
        label = "inconclusive"
    return RegimeClassification(label, sup, rel, reason)
