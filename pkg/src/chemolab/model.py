"""Model parameters, the transmission law f and the right-hand side of the
three-component system

    u_t = Δu - ∇·(u∇v) - k1 u + k2 w
    v_t = Δv - v + w
    w_t = Δw - w + f(u)

with no-flux boundaries on every component.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass
from fractions import Fraction

import numpy as np

from . import grid as G

TRANSMISSION_KINDS = ("power", "capped_power")


@dataclass(frozen=True)
class ModelParams:
    alpha: float = 1.5
    k1: float = 0.0
    k2: float = 0.0
    transmission_kind: str = "power"
    cap: float | None = None
    # switch for diffusion-only studies; the model proper always has it on
    chemotaxis: bool = True

    def __post_init__(self):
        if isinstance(self.alpha, (Fraction, int, str)):
            object.__setattr__(self, "alpha", float(Fraction(self.alpha)))
        if not self.alpha > 0:
            raise ValueError(f"alpha must be positive, got {self.alpha}")
        if self.k1 < 0 or self.k2 < 0:
            raise ValueError("k1 and k2 must be nonnegative")
        if self.transmission_kind not in TRANSMISSION_KINDS:
            raise ValueError(f"unknown transmission kind {self.transmission_kind!r}")
        if self.transmission_kind == "capped_power":
            if self.cap is None or not self.cap > 0:
                raise ValueError("capped_power needs a positive cap")

    def to_dict(self):
        return asdict(self)


def transmission(s, params):
    """f(s) for ``s >= 0``; satisfies ``0 <= f(s) <= s**alpha``."""
    s_arr = np.asarray(s, dtype=float)
    if np.any(s_arr < 0):
        raise ValueError("transmission is defined for s >= 0 only")
    out = s_arr ** params.alpha
    if params.transmission_kind == "capped_power":
        out = np.minimum(out, params.cap)
    if np.ndim(s) == 0:
        return float(out)
    return out


def transmission_slope_bound(umax, params):
    """Upper estimate of f' on ``[0, umax]`` used for the reaction step cap.

    For alpha < 1 the derivative is unbounded at 0; the estimate then falls
    back to alpha, which bounds f' on ``[1, inf)``.
    """
    a = params.alpha
    if a >= 1:
        return a * umax ** (a - 1)
    return a


def rhs(state, params, g):
    """Semi-discrete tendencies ``(u_t, v_t, w_t)`` of the system."""
    u, v, w = state.u, state.v, state.w
    g.check(u, v, w)
    du = G.laplacian(u, g) - params.k1 * u + params.k2 * w
    if params.chemotaxis:
        du = du - G.chemotaxis_divergence(u, v, g)
    dv = G.laplacian(v, g) - v + w
    dw = G.laplacian(w, g) - w + transmission(u, params)
    return du, dv, dw
