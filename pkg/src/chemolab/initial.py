"""Initial data families for simulations and sweeps."""
from __future__ import annotations

import numpy as np

from . import grid as G
from .model import transmission
from .stepper import State


def gaussian_bump(g, mass=10.0, width=0.1, center=None, background=0.0):
    """u0 a Gaussian of total mass ``mass`` (plus ``background``), v0 = w0 = 0.

    ``center`` defaults to the domain centre on Cartesian grids and is the
    origin on radial grids.
    """
    if g.mode == "radial":
        r2 = g.centers[0] ** 2
    else:
        if center is None:
            center = [L / 2 for L in g.extents]
        xs = g.mesh()
        r2 = sum((x - c) ** 2 for x, c in zip(xs, center))
    bump = np.exp(-r2 / (2.0 * width**2))
    bump *= mass / G.integrate(bump, g)
    u = bump + background
    z = np.zeros(g.shape)
    return State(u, z.copy(), z.copy(), 0.0)


def constant_state(g, c, params):
    """Spatially constant steady state ``(c, f(c), f(c))``."""
    fc = transmission(float(c), params)
    return State(np.full(g.shape, float(c)), np.full(g.shape, fc), np.full(g.shape, fc), 0.0)


def random_state(g, rng, scale=1.0):
    """Independent uniform nonnegative fields (rough on the grid scale)."""
    return State(
        scale * rng.random(g.shape),
        scale * rng.random(g.shape),
        scale * rng.random(g.shape),
        0.0,
    )


def from_file(g, path):
    """Load ``u``, ``v``, ``w`` arrays from an ``.npz`` file."""
    data = np.load(path)
    state = State(*(np.array(data[k], dtype=float) for k in ("u", "v", "w")), 0.0)
    g.check(state.u, state.v, state.w)
    return state


def build_initial(g, spec, params):
    """Initial state from a config mapping ``{"kind": ..., ...}``."""
    spec = dict(spec)
    kind = spec.pop("kind")
    if kind == "gaussian_bump":
        return gaussian_bump(g, **spec)
    if kind == "constant":
        return constant_state(g, spec.pop("c"), params)
    if kind == "file":
        return from_file(g, spec.pop("path"))
    raise ValueError(f"unknown initial condition kind {kind!r}")
