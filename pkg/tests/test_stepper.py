import math

import numpy as np
import pytest

from chemolab import grid as G
from chemolab.errors import NumericalFailure
from chemolab.initial import constant_state, gaussian_bump, random_state
from chemolab.model import ModelParams
from chemolab.stepper import (
    SolverConfig,
    State,
    helmholtz_residual,
    implicit_helmholtz_solve,
    run,
    stable_dt,
    step,
)


# -- stable_dt ----------------------------------------------------------------

def test_stable_dt_zero_velocity_hits_reaction_cap(square32):
    z = np.zeros(square32.shape)
    s = State(z, np.full(square32.shape, 3.0), z)
    assert stable_dt(s, ModelParams(alpha=1.5), square32, 0.5) == pytest.approx(0.5)


def test_stable_dt_formula_1d():
    g = G.build_grid(1, "cartesian", 1.0, 10)
    (x,) = g.mesh()
    z = np.zeros(10)
    dt = stable_dt(State(z, x.copy(), z), ModelParams(alpha=1.5), g, 0.5)
    assert dt == pytest.approx(0.5 * 0.1 / 2, rel=1e-12)


def test_stable_dt_halves_with_resolution():
    p = ModelParams(alpha=1.5)
    dts = []
    for m in (64, 128):
        g = G.build_grid(1, "cartesian", 1.0, m)
        (x,) = g.mesh()
        z = np.zeros(m)
        dts.append(stable_dt(State(z, np.cos(math.pi * x), z), p, g, 0.8))
    assert dts[0] / dts[1] == pytest.approx(2.0, rel=1e-3)


def test_stable_dt_reaction_cap_with_k1():
    g = G.build_grid(1, "cartesian", 1.0, 16)
    u = np.full(16, 4.0)
    s = State(u, np.zeros(16), np.zeros(16))
    # f' estimate 1.5 * 4^0.5 = 3
    assert stable_dt(s, ModelParams(alpha=1.5, k1=2.0), g, 1.0) == pytest.approx(1 / 6)


# -- implicit_helmholtz_solve -------------------------------------------------

GRIDS = [
    G.build_grid(1, "cartesian", 1.0, 40),
    G.build_grid(2, "cartesian", [1.0, 2.0], [12, 20]),
    G.build_grid(1, "radial", 1.0, 40, effective_n=2),
    G.build_grid(1, "radial", 1.0, 40, effective_n=3),
]


@pytest.mark.parametrize("g", GRIDS)
@pytest.mark.parametrize("a", [0.0, 1.0])
def test_helmholtz_constant_mode(g, a):
    x = implicit_helmholtz_solve(np.full(g.shape, 3.0), a, 0.1, g)
    np.testing.assert_allclose(x, 3.0 / (1 + a * 0.1), rtol=1e-12)


@pytest.mark.parametrize("m", [8, 33, 64])
def test_helmholtz_discrete_eigenmode(m):
    g = G.build_grid(1, "cartesian", 1.0, m)
    (x,) = g.mesh()
    dt = 0.01
    lam_h = (4 / g.h**2) * math.sin(math.pi * g.h / 2) ** 2
    got = implicit_helmholtz_solve(np.cos(math.pi * x), 1.0, dt, g, tol=1e-13)
    np.testing.assert_allclose(got, np.cos(math.pi * x) / (1 + dt + dt * lam_h), atol=1e-12)


def _dense_operator(a, dt, g):
    n = int(np.prod(g.shape))
    A = np.empty((n, n))
    for j in range(n):
        e = np.zeros(n)
        e[j] = 1.0
        A[:, j] = (1 + a * dt) * e - dt * G.laplacian(e.reshape(g.shape), g).ravel()
    return A


@pytest.mark.parametrize("g", GRIDS)
def test_helmholtz_matches_dense_solve(rng, g):
    b = rng.standard_normal(g.shape)
    x = implicit_helmholtz_solve(b, 1.0, 0.03, g)
    ref = np.linalg.solve(_dense_operator(1.0, 0.03, g), b.ravel()).reshape(g.shape)
    np.testing.assert_allclose(x, ref, rtol=1e-9, atol=1e-10)


@pytest.mark.parametrize("g", GRIDS)
@pytest.mark.parametrize("dt", [1e-4, 0.1, 10.0])
def test_helmholtz_residual_contract(rng, g, dt):
    for tol in (1e-10, 1e-12):
        b = 100 * rng.standard_normal(g.shape)
        x = implicit_helmholtz_solve(b, 0.0, dt, g, tol=tol)
        r = helmholtz_residual(x, b, 0.0, dt, g)
        assert np.max(np.abs(r)) <= tol * (1 + np.max(np.abs(b)))


@pytest.mark.parametrize("g", GRIDS)
def test_helmholtz_preserves_nonnegativity(rng, g):
    for _ in range(10):
        b = rng.random(g.shape) * (rng.random(g.shape) < 0.2)
        x = implicit_helmholtz_solve(b, 1.0, 0.5, g, tol=1e-13)
        assert np.min(x) >= -1e-13 * np.max(b)


def test_helmholtz_rejects_nonfinite(line8):
    b = np.ones(8)
    b[2] = np.nan
    with pytest.raises(NumericalFailure):
        implicit_helmholtz_solve(b, 1.0, 0.1, line8)


def test_helmholtz_unreachable_tolerance_fails(line8, rng):
    with pytest.raises(NumericalFailure):
        implicit_helmholtz_solve(1e8 * rng.random(8), 0.0, 1e3, line8, tol=1e-30)


# -- step ---------------------------------------------------------------------

@pytest.mark.parametrize("g", GRIDS)
def test_step_constant_steady_state(g):
    p = ModelParams(alpha=1.5)
    s0 = constant_state(g, 2.0, p)
    s1 = step(s0, 0.05, p, SolverConfig(), g)
    assert s1.t == pytest.approx(0.05)
    for a, b in ((s1.u, s0.u), (s1.v, s0.v), (s1.w, s0.w)):
        np.testing.assert_allclose(a, b, rtol=1e-10)


def test_step_constant_w_split(square32):
    z = np.zeros(square32.shape)
    dt = 0.2
    s = step(State(z, z, np.ones(square32.shape)), dt, ModelParams(), SolverConfig(), square32)
    w_plus = 1 / (1 + dt)
    np.testing.assert_allclose(s.w, w_plus, rtol=1e-12)
    np.testing.assert_allclose(s.v, dt * w_plus / (1 + dt), rtol=1e-12)
    assert np.all(s.u == 0)


def test_step_mass_random_2d(rng, square32):
    p = ModelParams(alpha=1.5)
    cfg = SolverConfig()
    s = random_state(square32, rng)
    m0 = G.integrate(s.u, square32)
    for _ in range(100):
        s = step(s, stable_dt(s, p, square32, 0.5), p, cfg, square32)
        assert min(s.u.min(), s.v.min(), s.w.min()) >= 0
    assert abs(G.integrate(s.u, square32) - m0) / m0 <= 1e-12


def test_step_linear_terms_change_mass(line8):
    p = ModelParams(alpha=1.0, k1=1.0, k2=0.0)
    s = State(np.ones(8), np.zeros(8), np.zeros(8))
    s1 = step(s, 0.1, p, SolverConfig(), line8)
    assert G.integrate(s1.u, line8) == pytest.approx(0.9, rel=1e-12)


def test_step_cfl_breach_detected():
    g = G.build_grid(1, "cartesian", 1.0, 32)
    (x,) = g.mesh()
    u = np.exp(-((x - 0.5) ** 2) / 0.001)
    v = 50 * np.cos(2 * math.pi * x) + 50
    p = ModelParams()
    dt = 20 * stable_dt(State(u, v, np.zeros(32)), p, g, 1.0)
    with pytest.raises(NumericalFailure):
        step(State(u, v, np.zeros(32)), dt, p, SolverConfig(), g)


# -- run ----------------------------------------------------------------------

def test_run_t_end_zero(square32):
    p = ModelParams()
    tr = run(gaussian_bump(square32), p, SolverConfig(t_end=0.0), square32)
    assert len(tr) == 1
    assert tr.stop_reason == "completed"
    assert tr["t"][0] == 0.0


def test_run_steady_rows_identical():
    g = G.build_grid(2, "cartesian", 1.0, 16)
    p = ModelParams(alpha=1.5)
    tr = run(constant_state(g, 2.0, p), p, SolverConfig(t_end=1.0, lp_list=(2.0, 3.0)), g)
    assert tr.stop_reason == "completed"
    assert tr["t"][-1] == pytest.approx(1.0)
    for col in ("mass_u", "l1_w", "l1_ualpha", "linf_u", "min_u", "lp:2", "lp:3"):
        vals = np.asarray(tr[col])
        np.testing.assert_allclose(vals, vals[0], rtol=1e-10)
    assert np.max(np.abs(tr["ge:2"])) <= 1e-18


def test_run_callback_and_record_every(square32):
    seen = []
    cfg = SolverConfig(t_end=0.05, dt=0.001, record_every=7)
    tr = run(gaussian_bump(square32, width=0.2), ModelParams(), cfg, square32,
             callback=lambda s: seen.append(s.t))
    assert len(seen) == 51
    assert seen[0] == 0.0
    # initial row, every 7th step, plus the final state
    assert len(tr) == 1 + 50 // 7 + 1
    assert tr["t"][-1] == pytest.approx(0.05)
    assert np.all(np.diff(tr["t"]) > 0)


def test_run_rejects_negative_initial(line8):
    z = np.zeros(8)
    with pytest.raises(ValueError):
        run(State(z - 1, z, z), ModelParams(), SolverConfig(), line8)


def test_run_max_steps(square32):
    tr = run(gaussian_bump(square32), ModelParams(), SolverConfig(t_end=1.0, max_steps=3), square32)
    assert tr.stop_reason == "max_steps"
    assert tr.header["steps"] == 3


def test_run_blowup_threshold(square32):
    cfg = SolverConfig(t_end=1.0, blowup_linf_threshold=50.0)
    tr = run(gaussian_bump(square32, mass=10, width=0.05), ModelParams(), cfg, square32)
    assert tr.stop_reason == "blowup_threshold"
    assert tr["linf_u"][-1] > 50.0


def test_run_dt_collapse(square32):
    cfg = SolverConfig(t_end=1.0, dt_min=1.0)
    tr = run(gaussian_bump(square32), ModelParams(), cfg, square32)
    assert tr.stop_reason == "dt_collapse"
    assert len(tr) == 1


def test_run_numerical_failure_carries_trace():
    g = G.build_grid(1, "cartesian", 1.0, 32)
    (x,) = g.mesh()
    u = np.exp(-((x - 0.5) ** 2) / 0.001)
    v = 50 * np.cos(2 * math.pi * x) + 50
    cfg = SolverConfig(t_end=1.0, dt=0.05)
    with pytest.raises(NumericalFailure) as err:
        run(State(u, v, np.zeros(32)), ModelParams(), cfg, g)
    assert err.value.trace is not None
    assert err.value.trace.stop_reason == "numerical_failure"
    assert err.value.t == 0.0


def test_run_radial_conserves_mass():
    g = G.build_grid(1, "radial", 1.0, 64, effective_n=3)
    p = ModelParams(alpha=1.2)
    tr = run(gaussian_bump(g, mass=5.0, width=0.2), p, SolverConfig(t_end=0.5), g)
    assert tr.stop_reason == "completed"
    m = np.asarray(tr["mass_u"])
    assert np.max(np.abs(m - m[0])) <= 1e-12 * m[0]
    assert min(tr["min_u"]) >= 0


def test_run_alpha_three_halves_desk_scale():
    g = G.build_grid(2, "cartesian", 1.0, 64)
    p = ModelParams(alpha=1.5)
    tr = run(gaussian_bump(g, mass=10.0, width=0.1), p, SolverConfig(t_end=5.0, record_every=10), g)
    assert tr.stop_reason == "completed"
    assert tr["t"][-1] == pytest.approx(5.0)


def test_diffusion_only_eigenmode_second_order():
    from chemolab.convergence import convergence_study

    errors, orders = convergence_study((16, 32, 64))
    assert all(1.8 <= o <= 2.2 for o in orders), orders


def test_solver_config_validation():
    with pytest.raises(ValueError):
        SolverConfig(cfl=0.0)
    with pytest.raises(ValueError):
        SolverConfig(cfl=1.5)
    with pytest.raises(ValueError):
        SolverConfig(linear_tol=0.0)
    with pytest.raises(ValueError):
        SolverConfig(dt=-1.0)
    with pytest.raises(ValueError):
        SolverConfig(record_every=0)
    assert SolverConfig().dt_policy == "adaptive"
    assert SolverConfig(dt=0.1).dt_policy == "fixed"
