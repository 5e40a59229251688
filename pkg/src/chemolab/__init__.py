"""Numerical laboratory for the chemotaxis system with indirect nonlinear
signal production: finite-volume simulator, exact exponent certifier and
trace diagnostics."""

from .diagnostics import (
    CheckResult,
    RegimeClassification,
    Trace,
    check_fubini_inequality,
    check_lp_testing_identity,
    check_mass_conservation,
    check_w_l1_bound,
    classify_regime,
    exp_weighted_integral,
)
from .errors import GridMismatchError, NumericalFailure, PreconditionError
from .exponents import (
    ExponentParams,
    alpha_threshold,
    feasibility_scan,
    p_lower_bound,
    select_exponents,
    validate_exponents,
)
from .grid import (
    Grid,
    build_grid,
    chemotaxis_divergence,
    gradient_energy,
    integrate,
    laplacian,
    linf_norm,
    lp_norm,
)
from .model import ModelParams, rhs, transmission
from .stepper import SolverConfig, State, implicit_helmholtz_solve, run, stable_dt, step
from .sweep import RegimeTable, SweepConfig, run_case, sweep

__version__ = "0.1.0"
