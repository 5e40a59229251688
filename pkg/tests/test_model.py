import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from chemolab import grid as G
from chemolab.model import ModelParams, rhs, transmission, transmission_slope_bound
from chemolab.stepper import State


def test_transmission_examples():
    for a in (0.3, 1.0, 1.5, 2.7):
        assert transmission(0.0, ModelParams(alpha=a)) == 0.0
    assert transmission(2.0, ModelParams(alpha=1.5)) == pytest.approx(2**1.5, rel=1e-15)
    capped = ModelParams(alpha=1.5, transmission_kind="capped_power", cap=1.0)
    assert transmission(2.0, capped) == 1.0
    assert 1.0 <= 2**1.5


def test_transmission_vectorised():
    s = np.array([0.0, 0.25, 1.0, 4.0])
    np.testing.assert_allclose(transmission(s, ModelParams(alpha=0.5)), [0, 0.5, 1, 2])


def test_transmission_rejects_negative():
    with pytest.raises(ValueError):
        transmission(-1e-12, ModelParams())
    with pytest.raises(ValueError):
        transmission(np.array([1.0, -1.0]), ModelParams())


def test_params_validation():
    with pytest.raises(ValueError):
        ModelParams(alpha=0.0)
    with pytest.raises(ValueError):
        ModelParams(k1=-1.0)
    with pytest.raises(ValueError):
        ModelParams(transmission_kind="capped_power")
    with pytest.raises(ValueError):
        ModelParams(transmission_kind="logistic")
    assert ModelParams(alpha="3/2").alpha == 1.5


kinds = st.sampled_from(["power", "capped"])


def _params(kind, alpha, cap):
    if kind == "power":
        return ModelParams(alpha=alpha)
    return ModelParams(alpha=alpha, transmission_kind="capped_power", cap=cap)


@settings(max_examples=200, deadline=None)
@given(kind=kinds, alpha=st.floats(0.05, 4.0), cap=st.floats(0.01, 100.0),
       s=st.floats(0.0, 1e3), ds=st.floats(0.0, 10.0))
def test_transmission_bound_and_monotone(kind, alpha, cap, s, ds):
    p = _params(kind, alpha, cap)
    f = transmission(s, p)
    assert 0.0 <= f <= s**alpha
    assert transmission(s + ds, p) >= f


def test_slope_bound_dominates_derivative():
    for a in (1.0, 1.5, 2.2):
        p = ModelParams(alpha=a)
        s = np.linspace(0, 3, 301)
        assert np.all(a * s ** (a - 1) <= transmission_slope_bound(3.0, p) + 1e-12)
    assert transmission_slope_bound(5.0, ModelParams(alpha=0.5)) == 0.5


# -- rhs ----------------------------------------------------------------------

@pytest.mark.parametrize("c", [0.5, 2.0])
def test_rhs_constant_steady_state(square32, c):
    p = ModelParams(alpha=1.5)
    fc = c**1.5
    s = State(np.full(square32.shape, c), np.full(square32.shape, fc), np.full(square32.shape, fc))
    for d in rhs(s, p, square32):
        assert np.max(np.abs(d)) <= 1e-14 * fc


def test_rhs_linear_terms_only(line8):
    p = ModelParams(alpha=1.5, k1=0.7, k2=0.3)
    c = 1.25
    z = np.zeros(8)
    du, dv, dw = rhs(State(z, z, np.full(8, c)), p, line8)
    np.testing.assert_allclose(du, 0.3 * c, rtol=1e-15)
    np.testing.assert_allclose(dv, c, rtol=1e-15)
    np.testing.assert_allclose(dw, -c, rtol=1e-15)


def _reference_rhs_1d(u, v, w, h, alpha, k1, k2):
    m = len(u)

    def lap(f, i):
        left = f[i - 1] if i > 0 else f[i]  # mirror ghost
        right = f[i + 1] if i < m - 1 else f[i]
        return (left - 2 * f[i] + right) / h**2

    def div(i):
        s = 0.0
        if i < m - 1:
            gr = (v[i + 1] - v[i]) / h
            s += (u[i] if gr > 0 else u[i + 1]) * gr
        if i > 0:
            gl = (v[i] - v[i - 1]) / h
            s -= (u[i - 1] if gl > 0 else u[i]) * gl
        return s / h

    du = [lap(u, i) - div(i) - k1 * u[i] + k2 * w[i] for i in range(m)]
    dv = [lap(v, i) - v[i] + w[i] for i in range(m)]
    dw = [lap(w, i) - w[i] + u[i] ** alpha for i in range(m)]
    return np.array(du), np.array(dv), np.array(dw)


def test_rhs_matches_cell_by_cell_assembly(rng):
    g = G.build_grid(1, "cartesian", 1.0, 9)
    for alpha, k1, k2 in ((1.5, 0.0, 0.0), (0.7, 0.4, 1.3)):
        u, v, w = (0.1 * rng.random(9) for _ in range(3))
        got = rhs(State(u, v, w), ModelParams(alpha=alpha, k1=k1, k2=k2), g)
        ref = _reference_rhs_1d(u, v, w, g.h, alpha, k1, k2)
        for a, b in zip(got, ref):
            np.testing.assert_allclose(a, b, rtol=1e-12, atol=1e-12)


def test_rhs_integral_identities(rng):
    for g in (G.build_grid(2, "cartesian", 1.0, 16), G.build_grid(1, "radial", 1.0, 32, effective_n=3)):
        p = ModelParams(alpha=1.7)
        s = State(*(rng.random(g.shape) for _ in range(3)))
        du, dv, dw = rhs(s, p, g)
        scale = G.integrate(np.abs(G.laplacian(s.u, g)), g)
        assert abs(G.integrate(du, g)) <= 1e-12 * scale
        expected = -G.integrate(s.w, g) + G.integrate(transmission(s.u, p), g)
        assert G.integrate(dw, g) == pytest.approx(expected, rel=1e-12, abs=1e-12 * scale)


def test_rhs_chemotaxis_switch(rng, line8):
    u, v, w = (rng.random(8) for _ in range(3))
    du, _, _ = rhs(State(u, v, w), ModelParams(chemotaxis=False), line8)
    np.testing.assert_allclose(du, G.laplacian(u, line8))
    assert not math.isclose(
        float(np.sum(np.abs(rhs(State(u, v, w), ModelParams(), line8)[0] - du))), 0.0
    )
