"""IMEX time integration of the chemotaxis system.

One step is an operator split:

1. explicit upwind advection (plus the linear k1/k2 terms) for u,
2. backward-Euler diffusion of u,
3. backward-Euler diffusion/decay of w with source f(u) from step 2,
4. backward-Euler diffusion/decay of v with source w from step 3.

The advective part is conservative, the implicit operators are M-matrices
with constant null-space preserved, so total u-mass is conserved to
round-off when k1 = k2 = 0 and all fields stay nonnegative under the CFL
bound returned by :func:`stable_dt`.
"""
from __future__ import annotations

import logging
from dataclasses import asdict, dataclass

import numpy as np
from scipy import fft
from scipy.linalg import solveh_banded

from . import grid as G
from .errors import NumericalFailure
from .model import transmission, transmission_slope_bound

log = logging.getLogger(__name__)

# relative size of negative values treated as round-off
NEG_TOL = 1e-13

STOP_REASONS = ("completed", "blowup_threshold", "dt_collapse", "max_steps", "numerical_failure")


@dataclass
class State:
    u: np.ndarray
    v: np.ndarray
    w: np.ndarray
    t: float = 0.0

    def copy(self):
        return State(self.u.copy(), self.v.copy(), self.w.copy(), self.t)


@dataclass
class SolverConfig:
    t_end: float = 1.0
    # fixed time step; ``None`` selects the adaptive CFL policy
    dt: float | None = None
    cfl: float = 0.5
    max_steps: int = 1_000_000
    linear_tol: float = 1e-10
    blowup_linf_threshold: float = 1e6
    dt_min: float = 1e-9
    record_every: int = 1
    lp_list: tuple = (2.0,)

    def __post_init__(self):
        if not 0 < self.cfl <= 1:
            raise ValueError(f"cfl must lie in (0, 1], got {self.cfl}")
        if not self.linear_tol > 0:
            raise ValueError("linear_tol must be positive")
        if self.dt is not None and not self.dt > 0:
            raise ValueError("fixed dt must be positive")
        if self.t_end < 0:
            raise ValueError("t_end must be nonnegative")
        if self.record_every < 1:
            raise ValueError("record_every must be >= 1")
        if any(p < 1 for p in self.lp_list):
            raise ValueError("tracked p values must be >= 1")
        self.lp_list = tuple(float(p) for p in self.lp_list)

    @property
    def dt_policy(self):
        return "adaptive" if self.dt is None else "fixed"

    def to_dict(self):
        d = asdict(self)
        d["lp_list"] = list(self.lp_list)
        return d


def stable_dt(state, params, g, c):
    """Largest step allowed by the upwind CFL and the reaction cap."""
    eps = 1e-300
    if params.chemotaxis:
        gmax = G.max_face_gradient(state.v, g)
    else:
        gmax = 0.0
    dt_adv = c * g.h / (g.advective_factor * gmax + eps)
    slope = transmission_slope_bound(float(np.max(state.u)), params)
    dt_react = c / (params.k1 + slope + 1.0)
    return min(dt_adv, dt_react)


def _helmholtz_cartesian(b, a, dt, g):
    # DCT-II diagonalises the reflected (Neumann) second difference exactly
    lam = 0.0
    for k in range(g.dim):
        m, h = g.cells[k], g.spacing[k]
        ev = (4.0 / h**2) * np.sin(np.pi * np.arange(m) / (2 * m)) ** 2
        shape = [1] * g.dim
        shape[k] = m
        lam = lam + ev.reshape(shape)
    bh = fft.dctn(b, type=2, norm="ortho")
    return fft.idctn(bh / (1.0 + a * dt + dt * lam), type=2, norm="ortho")


def _helmholtz_radial(b, a, dt, g):
    # V-scaled system is symmetric positive definite and tridiagonal
    h = g.spacing[0]
    T = g.face_areas[0] / h
    V = g.volumes
    diag = (1.0 + a * dt) * V
    diag = diag.copy()
    diag[:-1] += dt * T
    diag[1:] += dt * T
    ab = np.zeros((2, g.cells[0]))
    ab[0, 1:] = -dt * T
    ab[1] = diag
    return solveh_banded(ab, V * b)


def helmholtz_residual(x, b, a, dt, g):
    return (1.0 + a * dt) * x - dt * G.laplacian(x, g) - b


def implicit_helmholtz_solve(b, a, dt, g, tol=1e-10):
    """Solve ``(1 + a dt) x - dt Δx = b`` with the Neumann Laplacian.

    The residual is guaranteed to satisfy
    ``||r||_inf <= tol * (1 + ||b||_inf)``; up to three rounds of iterative
    refinement are tried before giving up.
    """
    b = np.asarray(b, dtype=float)
    g.check(b)
    if not np.all(np.isfinite(b)):
        raise NumericalFailure("non-finite right-hand side in implicit solve")
    solve = _helmholtz_cartesian if g.mode == "cartesian" else _helmholtz_radial
    bound = tol * (1.0 + float(np.max(np.abs(b))))
    x = solve(b, a, dt, g)
    for _ in range(4):
        r = helmholtz_residual(x, b, a, dt, g)
        if float(np.max(np.abs(r))) <= bound:
            return x
        x = x - solve(r, a, dt, g)
    raise NumericalFailure(
        f"implicit solve residual {np.max(np.abs(r)):.3e} exceeds {bound:.3e}"
    )


def _clip_roundoff(x, scale, what, t):
    if not np.all(np.isfinite(x)):
        raise NumericalFailure(f"non-finite values in {what}", t=t)
    lo = float(np.min(x))
    if lo < -NEG_TOL * scale:
        raise NumericalFailure(
            f"positivity violated in {what}: min {lo:.3e} (CFL breach?)", t=t
        )
    if lo < 0:
        x = np.maximum(x, 0.0)
    return x


def step(state, dt, params, cfg, g):
    """Advance ``state`` by one split step of size ``dt``."""
    u, v, w = state.u, state.v, state.w
    scale = max(float(np.max(u)), 1e-300)

    du = -params.k1 * u + params.k2 * w
    if params.chemotaxis:
        du = du - G.chemotaxis_divergence(u, v, g)
    u_star = _clip_roundoff(u + dt * du, scale, "advection", state.t)

    tol = cfg.linear_tol
    u_new = implicit_helmholtz_solve(u_star, 0.0, dt, g, tol)
    u_new = _clip_roundoff(u_new, scale, "u diffusion", state.t)
    w_new = implicit_helmholtz_solve(w + dt * transmission(u_new, params), 1.0, dt, g, tol)
    w_new = _clip_roundoff(w_new, max(float(np.max(w_new)), 1e-300), "w solve", state.t)
    v_new = implicit_helmholtz_solve(v + dt * w_new, 1.0, dt, g, tol)
    v_new = _clip_roundoff(v_new, max(float(np.max(v_new)), 1e-300), "v solve", state.t)
    return State(u_new, v_new, w_new, state.t + dt)


def run(initial, params, cfg, g, callback=None):
    """Integrate from ``initial`` to ``cfg.t_end`` and return a Trace.

    ``callback(state)`` is called with the initial state and after every
    accepted step. Early stops (blowup threshold, dt collapse, step limit)
    are reported through ``trace.header["stop_reason"]``. A
    :class:`NumericalFailure` propagates with the partial trace attached.
    """
    from .diagnostics import Trace

    g.check(initial.u, initial.v, initial.w)
    for name in ("u", "v", "w"):
        x = getattr(initial, name)
        if not np.all(np.isfinite(x)) or np.any(x < 0):
            raise ValueError(f"initial {name} must be finite and nonnegative")

    state = initial.copy()
    trace = Trace.start(state, params, cfg, g)
    if callback is not None:
        callback(state)
    t_end = cfg.t_end
    nsteps = 0
    reason = "completed"
    last_dt = 0.0
    recorded = True
    while state.t < t_end * (1 - 1e-14):
        if nsteps >= cfg.max_steps:
            reason = "max_steps"
            break
        if cfg.dt is None:
            dt = stable_dt(state, params, g, cfg.cfl)
            if dt < cfg.dt_min:
                reason = "dt_collapse"
                break
        else:
            dt = cfg.dt
        dt = min(dt, t_end - state.t)
        try:
            state = step(state, dt, params, cfg, g)
        except NumericalFailure as exc:
            if not recorded:
                trace.record(state, last_dt, params, cfg, g)
            trace.finish("numerical_failure", state.t, nsteps)
            exc.t = state.t
            exc.trace = trace
            raise
        nsteps += 1
        last_dt = dt
        if callback is not None:
            callback(state)
        recorded = False
        if nsteps % cfg.record_every == 0:
            trace.record(state, dt, params, cfg, g)
            recorded = True
        if float(np.max(state.u)) > cfg.blowup_linf_threshold:
            reason = "blowup_threshold"
            break
    if not recorded:
        trace.record(state, last_dt, params, cfg, g)
    trace.finish(reason, state.t, nsteps)
    log.debug("run stopped at t=%g after %d steps (%s)", state.t, nsteps, reason)
    return trace

