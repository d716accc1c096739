"""Closed-form matching equilibrium of the team production model.

A firm with Hicks-neutral log technology ``omega`` and log match efficiency
``omega_x`` hires one top worker of quality y and l workers of quality x,
producing

    f = exp(omega) * [alpha_x (e^omega_x x)^(1-sigma)
                      + alpha_y y^(1-sigma)]^(theta/(1-sigma)) * l^alpha_l

(times k^alpha_k once capital is added).  When both worker types are Pareto
distributed, the positively assorted equilibrium has the closed forms

    y = T(x)  = psi^(1/(1-sigma)) e^omega_x x
    l(x)      = psi^(lambda_y/(1-sigma)) C e^(omega_x lambda_y)
                x^(lambda_y - lambda_x)
    w(x)      = Lambda e^omega e^(omega_x (theta - lambda_y (1-alpha_l)))
                x^(theta + (1-alpha_l)(lambda_x - lambda_y))

with psi, C, Lambda functions of parameters only.  This module evaluates
those closed forms plus the Cobb-Douglas variant, where the matching becomes
y = A x^B with A depending on the technology level.
"""

import math
from dataclasses import dataclass

import numpy as np

from .errors import DivisionDegenerate, DomainError, InvalidParam, PamViolation
from .params import EquilibriumConstants, ModelParams

_DOMAIN_SLACK = 1e-9


def _maybe_scalar(a):
    return float(a) if np.ndim(a) == 0 else a


@dataclass(frozen=True)
class PamCheck:
    necessary_ok: bool
    sufficient_ok: bool


def pam_conditions(params: ModelParams) -> PamCheck:
    """Evaluate the necessary and sufficient conditions for positive sorting.

    Necessary: (theta > 0 and sigma >= 1) or (theta < 0 and sigma <= 1).
    Sufficient (any sigma != 1): theta above the max, or below the min, of
    {alpha_l (lambda_x - lambda_y), -(1 - alpha_l)(lambda_x - lambda_y)}.
    """
    th, al = params.theta, params.alpha_l
    gap = params.lambda_x - params.lambda_y
    necessary = (th > 0 and params.sigma >= 1) or (th < 0 and params.sigma <= 1)
    bounds = (al * gap, -(1.0 - al) * gap)
    sufficient = th > max(bounds) or th < min(bounds)
    return PamCheck(necessary_ok=necessary, sufficient_ok=sufficient)


def density_ratio_constant(params: ModelParams) -> float:
    """Constant C in g(x)/h(y) = C y^(lambda_y+1) / x^(lambda_x+1)."""
    return (params.lambda_x * params.x_min ** params.lambda_x
            / (params.lambda_y * params.y_min ** params.lambda_y))


def matching_share_constant(params: ModelParams, variant: str = "canonical") -> float:
    """The matching constant psi of the CES equilibrium.

    ``variant="canonical"`` is the derived closed form (denominator carries
    lambda_x - lambda_y).  ``variant="sign-flipped"`` evaluates the variant
    whose denominator carries lambda_x + lambda_y instead; it fails the
    equilibrium ODE oracle and exists only so tests can demonstrate that.
    """
    ax, ay, al, th = params.alpha_x, params.alpha_y, params.alpha_l, params.theta
    lx, ly = params.lambda_x, params.lambda_y
    if variant == "canonical":
        den_inner = th / (1.0 - al) - ly + lx
        if den_inner == 0.0:
            raise DivisionDegenerate(
                "theta/(1-alpha_l) - lambda_y + lambda_x is zero")
        return ax * (th / al + ly - lx) / (ay * den_inner)
    if variant == "sign-flipped":
        den_inner = th - (1.0 - al) * (ly + lx)
        if den_inner == 0.0:
            raise DivisionDegenerate(
                "theta - (1-alpha_l)(lambda_y + lambda_x) is zero")
        return (ax * (1.0 - al) * (th + al * (ly - lx))) / (ay * al * den_inner)
    raise InvalidParam(f"unknown psi variant {variant!r}")


def equilibrium_constants(params: ModelParams,
                          psi_variant: str = "canonical") -> EquilibriumConstants:
    """Solve the CES matching equilibrium for its closed-form constants.

    Returns psi, the matching slope psi^(1/(1-sigma)) (at zero match
    efficiency), the matching exponent (1 in CES mode), the density-ratio
    constant C, the wage level Lambda, and the log matching intercept
    b0 = ln(psi)/(1-sigma).

    Raises PamViolation when psi <= 0 (no positively assorted equilibrium)
    and DivisionDegenerate when the closed form's denominator vanishes.
    """
    if params.sigma == 1.0:
        raise InvalidParam("CES mode requires sigma != 1")
    psi = matching_share_constant(params, psi_variant)
    if psi <= 0.0:
        raise PamViolation(f"matching constant psi = {psi:.6g} <= 0")
    one_m_sigma = 1.0 - params.sigma
    slope = psi ** (1.0 / one_m_sigma)
    b0 = math.log(psi) / one_m_sigma
    c = density_ratio_constant(params)
    wage_level = (params.alpha_l
                  * (params.alpha_x + psi * params.alpha_y) ** (params.theta / one_m_sigma)
                  * psi ** (params.lambda_y * (params.alpha_l - 1.0) / one_m_sigma)
                  * c ** (params.alpha_l - 1.0))
    return EquilibriumConstants(psi=psi, slope=slope, exponent=1.0,
                                density_ratio=c, wage_level=wage_level,
                                b0=b0, mode="ces")


def match_top_type(x, omega_x, constants: EquilibriumConstants, params: ModelParams = None):
    """Equilibrium top-worker type matched with non-top type x.

    y = slope * exp(omega_x) * x^exponent; strictly increasing in x, and
    log-linear with unit slope in the CES case.  ``params`` enables the
    x >= x_min domain check when given.
    """
    x = np.asarray(x, dtype=float)
    if params is not None and np.any(x < params.x_min * (1.0 - _DOMAIN_SLACK)):
        raise DomainError("x below the Pareto lower bound x_min")
    if np.any(x <= 0):
        raise DomainError("x must be positive")
    return _maybe_scalar(constants.slope * np.exp(omega_x) * x ** constants.exponent)


def inverse_match(y, omega_x, constants: EquilibriumConstants, params: ModelParams = None):
    """Non-top type whose equilibrium match is y (inverse of match_top_type)."""
    y = np.asarray(y, dtype=float)
    if np.any(y <= 0):
        raise DomainError("y must be positive")
    x = (y * np.exp(-omega_x) / constants.slope) ** (1.0 / constants.exponent)
    if params is not None and np.any(x < params.x_min * (1.0 - _DOMAIN_SLACK)):
        raise DomainError("y below the matched image of x_min")
    return _maybe_scalar(x)


def labor_demand(x, omega_x, constants: EquilibriumConstants, params: ModelParams):
    """Equilibrium worker count demanded by a firm whose non-top type is x.

    l(x) = (slope e^omega_x)^lambda_y * C * x^(lambda_y - lambda_x):
    constant in x when the tail exponents agree, decreasing when the top tail
    is heavier (lambda_y < lambda_x).
    """
    x = np.asarray(x, dtype=float)
    if np.any(x < params.x_min * (1.0 - _DOMAIN_SLACK)):
        raise DomainError("x below the Pareto lower bound x_min")
    a = constants.slope * np.exp(omega_x)
    return _maybe_scalar(a ** params.lambda_y * constants.density_ratio
                         * x ** (params.lambda_y - params.lambda_x))


def wage_rate(x, omega, omega_x, constants: EquilibriumConstants, params: ModelParams):
    """Equilibrium wage of non-top type x.

    log w is additive in omega (unit loading), the match-efficiency term
    omega_x (theta - lambda_y (1-alpha_l)), and
    (theta + (1-alpha_l)(lambda_x - lambda_y)) * log x.  This additivity is
    what a two-way fixed-effects earnings decomposition relies on.
    """
    x = np.asarray(x, dtype=float)
    if np.any(x < params.x_min * (1.0 - _DOMAIN_SLACK)):
        raise DomainError("x below the Pareto lower bound x_min")
    th, al = params.theta, params.alpha_l
    lx, ly = params.lambda_x, params.lambda_y
    return _maybe_scalar(constants.wage_level * np.exp(omega)
                         * np.exp(np.multiply(omega_x, th - ly * (1.0 - al)))
                         * x ** (th + (1.0 - al) * (lx - ly)))


def output_ces(omega, x, y, l, k=1.0, params: ModelParams = None, omega_x=0.0):
    """Free-form CES team output at an arbitrary allocation (x, y, l, k).

    f = e^omega [alpha_x (e^omega_x x)^(1-sigma) + alpha_y y^(1-sigma)]
        ^(theta/(1-sigma)) * l^alpha_l * k^alpha_k.
    The capital term drops out when alpha_k == 0.
    """
    if params is None:
        raise InvalidParam("params is required")
    if params.sigma == 1.0:
        raise InvalidParam("CES mode requires sigma != 1")
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    l = np.asarray(l, dtype=float)
    if np.any(x <= 0) or np.any(y <= 0) or np.any(l <= 0):
        raise DomainError("x, y, l must be positive")
    one_m_sigma = 1.0 - params.sigma
    q = (params.alpha_x * (np.exp(omega_x) * x) ** one_m_sigma
         + params.alpha_y * y ** one_m_sigma)
    out = np.exp(omega) * q ** (params.theta / one_m_sigma) * l ** params.alpha_l
    if params.alpha_k != 0.0:
        k = np.asarray(k, dtype=float)
        if np.any(k <= 0):
            raise DomainError("k must be positive when alpha_k > 0")
        out = out * k ** params.alpha_k
    return _maybe_scalar(out)


def output_matched(omega, x, l, k, params: ModelParams,
                   constants: EquilibriumConstants, omega_x=0.0):
    """CES output evaluated at the optimal match y = T(x).

    Collapses to (alpha_x + alpha_y psi)^(theta/(1-sigma)) e^omega
    (e^omega_x x)^theta l^alpha_l k^alpha_k.
    """
    x = np.asarray(x, dtype=float)
    l = np.asarray(l, dtype=float)
    if np.any(x <= 0) or np.any(l <= 0):
        raise DomainError("x, l must be positive")
    level = (params.alpha_x + params.alpha_y * constants.psi) ** (
        params.theta / (1.0 - params.sigma))
    out = (level * np.exp(omega) * (np.exp(omega_x) * x) ** params.theta
           * l ** params.alpha_l)
    if params.alpha_k != 0.0:
        k = np.asarray(k, dtype=float)
        if np.any(k <= 0):
            raise DomainError("k must be positive when alpha_k > 0")
        out = out * k ** params.alpha_k
    return _maybe_scalar(out)


def cobb_douglas_constants(params: ModelParams, eta: float) -> EquilibriumConstants:
    """Matching constants of the Cobb-Douglas variant at technology level eta.

    The matching function is y = A x^B with

        B = (1-alpha_l)(alpha_l lambda_x - beta_x)
            / (alpha_l [(1-alpha_l) lambda_y - beta_y])
        A = (B / C)^((1-alpha_l)/D) * (alpha_l e^eta)^(1/D),
        D = (1-alpha_l) lambda_y - beta_y.

    B > 0 exactly when the CD positive-sorting condition holds
    (beta_x/lambda_x < alpha_l < 1 - beta_y/lambda_y, or the reversed
    ordering).  Unlike the CES case, the slope A moves with the technology
    level: d ln A / d eta = 1/D.
    """
    al, bx, by = params.alpha_l, params.beta_x_cd, params.beta_y_cd
    lx, ly = params.lambda_x, params.lambda_y
    d = (1.0 - al) * ly - by
    if d == 0.0 or al == 0.0:
        raise DivisionDegenerate("(1-alpha_l) lambda_y - beta_y is zero")
    b = (1.0 - al) * (al * lx - bx) / (al * d)
    if b <= 0.0:
        raise PamViolation(f"matching exponent B = {b:.6g} <= 0")
    c = density_ratio_constant(params)
    a = (b / c) ** ((1.0 - al) / d) * (al * math.exp(eta)) ** (1.0 / d)
    return EquilibriumConstants(psi=math.nan, slope=a, exponent=b,
                                density_ratio=c, wage_level=1.0,
                                b0=math.log(a), mode="cd")


def cd_labor_demand(x, eta: float, params: ModelParams,
                    constants: EquilibriumConstants = None):
    """Cobb-Douglas worker count along the matching schedule.

    From the wage first-order condition with w(x) = x^(beta_x/alpha_l):
    l = (alpha_l e^eta x^(beta_x - beta_x/alpha_l) y^beta_y)^(1/(1-alpha_l)),
    evaluated at y = A x^B.
    """
    if constants is None:
        constants = cobb_douglas_constants(params, eta)
    x = np.asarray(x, dtype=float)
    if np.any(x <= 0):
        raise DomainError("x must be positive")
    al, bx, by = params.alpha_l, params.beta_x_cd, params.beta_y_cd
    y = constants.slope * x ** constants.exponent
    inner = al * np.exp(eta) * x ** (bx - bx / al) * y ** by
    return _maybe_scalar(inner ** (1.0 / (1.0 - al)))


def cd_wage_rate(x, params: ModelParams):
    """Cobb-Douglas wage schedule w(x) = x^(beta_x/alpha_l) (level set to one)."""
    x = np.asarray(x, dtype=float)
    if np.any(x <= 0):
        raise DomainError("x must be positive")
    return _maybe_scalar(x ** (params.beta_x_cd / params.alpha_l))


def output_cd(eta, x, y, l, k=1.0, params: ModelParams = None):
    """Cobb-Douglas team output e^eta x^beta_x y^beta_y l^alpha_l k^alpha_k."""
    if params is None:
        raise InvalidParam("params is required")
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    l = np.asarray(l, dtype=float)
    if np.any(x <= 0) or np.any(y <= 0) or np.any(l <= 0):
        raise DomainError("x, y, l must be positive")
    out = (np.exp(eta) * x ** params.beta_x_cd * y ** params.beta_y_cd
           * l ** params.alpha_l)
    if params.alpha_k != 0.0:
        k = np.asarray(k, dtype=float)
        if np.any(k <= 0):
            raise DomainError("k must be positive when alpha_k > 0")
        out = out * k ** params.alpha_k
    return _maybe_scalar(out)
