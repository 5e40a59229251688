"""Exact-rational construction and certification of the exponent chain that
closes the L^p bootstrap for superlinear transmission.

Everything here is :class:`fractions.Fraction` arithmetic. The constraints
are strict inequalities near the critical exponent, where floating point
would happily certify a tuple that is actually on the boundary.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, replace
from fractions import Fraction

FEASIBLE = "feasible"
INFEASIBLE = "infeasible"
SUBLINEAR = "sublinear_not_required"

_FIELDS = (
    "n", "alpha", "tau", "theta_prime", "theta", "b", "p", "a", "lam",
    "eta1", "eta2", "eta3", "beta", "beta_prime", "delta",
)
# ``lambda`` is a keyword; the attribute is ``lam`` but JSON keeps the name
_JSON_KEY = {"lam": "lambda"}


def as_fraction(x):
    """Parse ints, Fractions, ``"a/b"`` strings or decimal strings exactly.

    Floats are converted through their shortest repr, so ``1.5`` becomes 3/2
    rather than the binary expansion.
    """
    if isinstance(x, Fraction):
        return x
    if isinstance(x, int):
        return Fraction(x)
    if isinstance(x, float):
        return Fraction(repr(x))
    return Fraction(str(x).strip())


def _pos(x):
    return x if x > 0 else Fraction(0)


def _mid(lo, hi):
    return (lo + hi) / 2


@dataclass(frozen=True)
class ExponentParams:
    n: int
    alpha: Fraction
    tau: Fraction
    theta_prime: Fraction
    theta: Fraction
    b: Fraction
    p: Fraction
    a: Fraction
    lam: Fraction
    eta1: Fraction
    eta2: Fraction
    eta3: Fraction
    beta: Fraction
    beta_prime: Fraction
    delta: Fraction

    def to_dict(self):
        d = {"n": self.n}
        for name in _FIELDS[1:]:
            x = getattr(self, name)
            d[_JSON_KEY.get(name, name)] = f"{x.numerator}/{x.denominator}"
        return d

    def to_json(self):
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_dict(cls, d):
        keys = {name: _JSON_KEY.get(name, name) for name in _FIELDS}
        missing = [k for k in keys.values() if k not in d]
        if missing:
            raise ValueError(f"missing exponent fields: {missing}")
        kw = {name: Fraction(d[keys[name]]) for name in _FIELDS[1:]}
        return cls(n=int(d["n"]), **kw)

    @classmethod
    def from_json(cls, text):
        return cls.from_dict(json.loads(text))


def alpha_threshold(n):
    """Critical transmission exponent ``min{4/n, 1 + 2/n}``."""
    if n not in (1, 2, 3):
        raise ValueError(f"n must be 1, 2 or 3, got {n}")
    return min(Fraction(4, n), 1 + Fraction(2, n))


def p_lower_bound(n, alpha, tau, theta_prime, b):
    """Lower bound that the testing exponent p has to exceed."""
    n_minus_2 = _pos(Fraction(n - 2))
    two_n = Fraction(2, n)
    return max(
        Fraction(1),
        alpha * n_minus_2 / n,
        alpha * tau * n_minus_2 / n,
        (two_n - 1 / theta_prime) / (1 - b) + 1 - two_n,
    )


def _b(n, tau, theta_prime):
    return (n - n / theta_prime) / (2 - n / tau + n)


def _a(n, p, theta):
    return (n * p / 2 - n / (2 * theta)) / (1 - Fraction(n, 2) + n * p / 2)


def _etas(n, alpha, tau, b, p, lam):
    k = 2 / (2 - lam)
    den = 2 - n + n * p
    eta1 = n * k * b * (alpha - 1 / tau) / den
    eta2 = n * k * (1 - b) * (alpha - 1) / den
    eta3 = n * k * (alpha - 1) / den
    return eta1, eta2, eta3


def _delta_bound(lam, b, beta):
    k = 2 / (2 - lam)
    return min(Fraction(1), k, k * b * beta)


def exponent_status(n, alpha):
    alpha = as_fraction(alpha)
    if alpha <= 0:
        raise ValueError(f"alpha must be positive, got {alpha}")
    if alpha >= alpha_threshold(n):
        return INFEASIBLE
    if alpha <= 1:
        return SUBLINEAR
    return FEASIBLE


def select_exponents(n, alpha, p_request=None):
    """Pick a certified exponent tuple for ``1 < alpha < alpha_threshold(n)``.

    Every free parameter is placed at the midpoint of its admissible open
    interval; p is ``max(p_request, 2 * p_lower_bound)``. Returns the status
    string ``"infeasible"`` or ``"sublinear_not_required"`` when no tuple is
    needed or possible.
    """
    alpha = as_fraction(alpha)
    status = exponent_status(n, alpha)
    if status != FEASIBLE:
        return status

    two_n = Fraction(2, n)
    cap = min(Fraction(1), two_n)
    inv_tau = _mid(alpha - two_n, cap)
    tau = 1 / inv_tau
    inv_tp = _mid(max(Fraction(0), inv_tau - cap), inv_tau + two_n - alpha)
    theta_prime = 1 / inv_tp
    theta = 1 / (1 - inv_tp)
    b = _b(n, tau, theta_prime)

    p = 2 * p_lower_bound(n, alpha, tau, theta_prime, b)
    if p_request is not None:
        p = max(p, as_fraction(p_request))

    a = _a(n, p, theta)
    lam = 2 * a
    eta1, eta2, eta3 = _etas(n, alpha, tau, b, p, lam)
    beta = _mid(1 / (1 - eta2), 1 / eta1)
    beta_prime = beta / (beta - 1)
    delta = _delta_bound(lam, b, beta) / 2
    return ExponentParams(
        n=n, alpha=alpha, tau=tau, theta_prime=theta_prime, theta=theta, b=b, p=p,
        a=a, lam=lam, eta1=eta1, eta2=eta2, eta3=eta3, beta=beta,
        beta_prime=beta_prime, delta=delta,
    )


def validate_exponents(params):
    """Identifiers of every violated constraint; empty means certified.

    Comparisons are exact. Derived quantities are recomputed from the
    primary ones (tau, theta_prime, p, beta) and must match exactly.
    """
    P = params
    n, alpha = P.n, P.alpha
    if n not in (1, 2, 3):
        # nothing else is defined without a valid dimension
        return ["n_range"]
    two_n = Fraction(2, n)
    cap = min(Fraction(1), two_n)
    bad = []

    def need(ok, name):
        if not ok:
            bad.append(name)

    need(1 < alpha < alpha_threshold(n), "alpha_range")
    # tau
    need(P.tau > 1, "tau_gt_1")
    inv_tau = 1 / P.tau if P.tau else None
    need(inv_tau is not None and alpha - two_n < inv_tau, "tau_lower")
    need(inv_tau is not None and inv_tau < cap, "tau_upper")
    # theta', theta
    need(P.theta_prime > 1, "theta_prime_gt_1")
    inv_tp = 1 / P.theta_prime if P.theta_prime else None
    if inv_tau is not None and inv_tp is not None:
        need(inv_tau - cap < inv_tp, "theta_prime_lower")
        need(inv_tp < inv_tau + two_n - alpha, "theta_prime_upper")
        need(alpha - two_n < inv_tau - inv_tp, "gap_lower")
        need(inv_tau - inv_tp < cap, "gap_upper")
    need(P.theta != 0 and inv_tp is not None and 1 / P.theta + inv_tp == 1, "theta_conjugate")
    # b and p
    try:
        need(P.b == _b(n, P.tau, P.theta_prime), "b_formula")
    except ZeroDivisionError:
        bad.append("b_formula")
    need(0 < P.b < 1, "b_range")
    try:
        need(P.p > p_lower_bound(n, alpha, P.tau, P.theta_prime, P.b), "p_lower")
    except ZeroDivisionError:
        bad.append("p_lower")
    # a, lambda
    try:
        need(P.a == _a(n, P.p, P.theta), "a_formula")
    except ZeroDivisionError:
        bad.append("a_formula")
    need(0 < P.a < 1, "a_range")
    need(P.lam == 2 * P.a, "lambda_formula")
    need(0 < P.lam < 2, "lambda_range")
    # eta
    try:
        e1, e2, e3 = _etas(n, alpha, P.tau, P.b, P.p, P.lam)
        need(P.eta1 == e1, "eta1_formula")
        need(P.eta2 == e2, "eta2_formula")
        need(P.eta3 == e3, "eta3_formula")
    except ZeroDivisionError:
        bad.extend(["eta1_formula", "eta2_formula", "eta3_formula"])
    need(P.eta1 > 0, "eta1_pos")
    need(P.eta2 > 0, "eta2_pos")
    need(0 < P.eta3 < 1, "eta3_range")
    need(0 < P.eta1 + P.eta2 < 1, "eta_sum")
    # beta
    need(P.beta > 1 and P.beta_prime > 1, "beta_gt_1")
    need(P.beta != 0 and P.beta_prime != 0 and 1 / P.beta + 1 / P.beta_prime == 1,
         "beta_conjugate")
    need(P.beta * P.eta1 < 1, "beta_eta1")
    need(P.beta_prime * P.eta2 < 1, "beta_prime_eta2")
    # delta
    if P.lam != 2:
        need(0 < P.delta < _delta_bound(P.lam, P.b, P.beta), "delta_range")
    else:
        bad.append("delta_range")
    return bad


def eta_sum_chain(params):
    """The two quantities of the chained bound ``eta1 + eta2 < X < 1``:
    returns ``(eta1 + eta2, X)`` with ``X = (alpha - 1/tau)/(2/n - 1/theta')``.
    """
    P = params
    x = (P.alpha - 1 / P.tau) / (Fraction(2, P.n) - 1 / P.theta_prime)
    return P.eta1 + P.eta2, x


def beta_interval(params):
    return 1 / (1 - params.eta2), 1 / params.eta1


def with_beta(params, beta):
    """Copy of ``params`` with beta replaced and beta' re-derived from it."""
    beta = as_fraction(beta)
    return replace(params, beta=beta, beta_prime=beta / (beta - 1))


def feasibility_scan(n, alpha_grid):
    out = []
    for alpha in alpha_grid:
        alpha = as_fraction(alpha)
        res = select_exponents(n, alpha)
        out.append((alpha, res if isinstance(res, str) else FEASIBLE))
    return out
