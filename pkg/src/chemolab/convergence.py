"""Spatial convergence study on the Neumann heat-kernel eigenmode.

With chemotaxis and reactions switched off, u0 = 1 + cos(pi x) (1D) or
1 + cos(pi x) cos(pi y) (2D) on the unit interval/square evolves to
1 + exp(-d pi^2 t) (...). The time step is tied to h^2 so backward-Euler
time error and second-order space error shrink together.
"""
from __future__ import annotations

import math

import numpy as np

from . import grid as G
from .stepper import implicit_helmholtz_solve


def eigenmode_error(m, dim=1, t_end=0.1, steps_at_32=100, stencil="standard"):
    """L-infinity error at ``t_end`` of the diffusion-only eigenmode run."""
    g = G.build_grid(dim, "cartesian", 1.0, m)
    if stencil == "standard":
        solve_grid = g
    elif stencil == "first_order":
        # node-count spacing L/(m-1) on a cell-centred stencil: O(h) consistent
        solve_grid = G.build_grid(dim, "cartesian", m / (m - 1), m)
    else:
        raise ValueError(f"unknown stencil {stencil!r}")
    xs = g.mesh()
    mode = np.ones(g.shape)
    for x in xs:
        mode = mode * np.cos(math.pi * x)
    u = 1.0 + mode
    nsteps = int(round(steps_at_32 * (m / 32) ** 2))
    dt = t_end / nsteps
    for _ in range(nsteps):
        u = implicit_helmholtz_solve(u, 0.0, dt, solve_grid, tol=1e-12)
    exact = 1.0 + math.exp(-dim * math.pi**2 * t_end) * mode
    return float(np.max(np.abs(u - exact)))


def convergence_study(resolutions=(32, 64, 128), dim=1, stencil="standard", t_end=0.1):
    """Errors and observed orders ``log2(e_m / e_2m)`` between successive m."""
    errors = [eigenmode_error(m, dim, t_end, stencil=stencil) for m in resolutions]
    orders = []
    for (m0, e0), (m1, e1) in zip(zip(resolutions, errors), zip(resolutions[1:], errors[1:])):
        orders.append(math.log(e0 / e1) / math.log(m1 / m0))
    return errors, orders
