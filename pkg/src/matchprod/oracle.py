"""Independent verification oracles for the matching equilibrium.

Nothing here reuses the closed-form solution path: the equilibrium ODE is
coded directly from the first-order conditions, candidate matching functions
are differentiated numerically, and market clearing is checked by quadrature.
A correct closed form must drive all residuals to the float noise floor; a
perturbed one must not.
"""

import numpy as np
from scipy.integrate import quad

from .errors import GridTooSmall, InvalidParam
from .model import inverse_match, labor_demand, match_top_type, output_ces, wage_rate
from .params import EquilibriumConstants, ModelParams

# 4th-order stencils at a generous relative step: plain central differences at
# h = x*1e-5 leave ~1e-6 of rounding noise in the second derivative, far above
# the 1e-8 residual budget.
_REL_STEP = 1e-3


def _d1(f, x, rel_step=_REL_STEP):
    h = np.abs(x) * rel_step
    return (f(x - 2 * h) - 8 * f(x - h) + 8 * f(x + h) - f(x + 2 * h)) / (12 * h)


def _d2(f, x, rel_step=_REL_STEP):
    h = np.abs(x) * rel_step
    return (-f(x - 2 * h) + 16 * f(x - h) - 30 * f(x)
            + 16 * f(x + h) - f(x + 2 * h)) / (12 * h * h)


def matching_ode_residual(candidate_t, params: ModelParams, mode: str = "ces",
                          grid=None, omega_x: float = 0.0,
                          derivatives=None) -> np.ndarray:
    """Pointwise residual of the equilibrium matching ODE for a candidate T.

    The second-order ODE is obtained by differentiating the wage first-order
    condition along the matching schedule and substituting the market-clearing
    slope condition.  In dimensionless form, with s1 = T'x/T and s2 = T''x/T':

    CES:  theta/alpha_l + theta/(1-alpha_l) s1
          - [1 + (alpha_y / (alpha_x e^(omega_x (1-sigma)))) (T/x)^(1-sigma)]
            * [(theta/(1-alpha_l) - lambda_y - 1) s1 + lambda_x + 1 + s2] = 0

    CD:   (1-alpha_l)(alpha_l (lambda_x+1) - beta_x)
          + (alpha_l beta_y - (1-alpha_l) alpha_l (lambda_y+1)) s1
          + (1-alpha_l) alpha_l s2 = 0

    ``candidate_t`` is a positive callable on the grid; ``derivatives`` may
    supply (T', T'') callables, otherwise 4th-order central differences with
    step x*1e-3 are used.
    """
    grid = np.asarray(grid, dtype=float)
    if grid.ndim != 1 or grid.size < 5:
        raise GridTooSmall("need at least 5 grid points")
    if np.any(grid <= 0):
        raise InvalidParam("grid must be positive")
    t = np.asarray(candidate_t(grid), dtype=float)
    if np.any(t <= 0):
        raise InvalidParam("candidate matching function must be positive")
    if derivatives is not None:
        d1, d2 = derivatives
        tp = np.asarray(d1(grid), dtype=float)
        tpp = np.asarray(d2(grid), dtype=float)
    else:
        tp = _d1(candidate_t, grid)
        tpp = _d2(candidate_t, grid)
    s1 = tp * grid / t
    s2 = tpp * grid / tp

    al, th = params.alpha_l, params.theta
    lx, ly = params.lambda_x, params.lambda_y
    if mode == "ces":
        if params.sigma == 1.0:
            raise InvalidParam("CES mode requires sigma != 1")
        one_m_sigma = 1.0 - params.sigma
        ratio = 1.0 + (params.alpha_y
                       / (params.alpha_x * np.exp(omega_x * one_m_sigma))
                       ) * (t / grid) ** one_m_sigma
        inner = (th / (1.0 - al) - ly - 1.0) * s1 + (lx + 1.0) + s2
        return th / al + (th / (1.0 - al)) * s1 - ratio * inner
    if mode == "cd":
        bx, by = params.beta_x_cd, params.beta_y_cd
        return ((1.0 - al) * (al * (lx + 1.0) - bx)
                + (al * by - (1.0 - al) * al * (ly + 1.0)) * s1
                + (1.0 - al) * al * s2)
    raise InvalidParam(f"unknown mode {mode!r}")


def density_ratio(x, y, params: ModelParams):
    """g(x)/h(y) for the two Pareto type densities."""
    c = (params.lambda_x * params.x_min ** params.lambda_x
         / (params.lambda_y * params.y_min ** params.lambda_y))
    return c * np.asarray(y, dtype=float) ** (params.lambda_y + 1.0) \
        / np.asarray(x, dtype=float) ** (params.lambda_x + 1.0)


def foc_residuals(x, params: ModelParams, constants: EquilibriumConstants,
                  omega: float = 0.0, omega_x: float = 0.0) -> dict:
    """Relative residuals of the three equilibrium conditions at (x, T(x), l(x)).

    worker_foc : f_x - w'(x) l(x) = 0
    labor_foc  : f_l - w(x) = 0
    clearing   : T'(x) l(x) - g(x)/h(T(x)) = 0

    Marginal products and derivatives are taken numerically from the
    free-form production and wage functions, so the check does not reuse
    the algebra that produced the closed forms.  Points within a few
    difference steps of the type lower bound are nudged into the interior
    so the stencils stay inside the domain.
    """
    x = np.maximum(np.asarray(x, dtype=float),
                   params.x_min * (1.0 + 5.0 * _REL_STEP))
    y = match_top_type(x, omega_x, constants, params)
    l = labor_demand(x, omega_x, constants, params)
    w = wage_rate(x, omega, omega_x, constants, params)

    f_x = _d1(lambda v: output_ces(omega, v, y, l, params=params, omega_x=omega_x), x)
    f_l = _d1(lambda v: output_ces(omega, x, y, v, params=params, omega_x=omega_x), l)
    w_p = _d1(lambda v: wage_rate(v, omega, omega_x, constants, params), x)
    t_p = _d1(lambda v: match_top_type(v, omega_x, constants, params), x)
    h_ratio = density_ratio(x, y, params)

    return {
        "worker_foc": (f_x - w_p * l) / np.maximum(np.abs(f_x), np.abs(w_p * l)),
        "labor_foc": (f_l - w) / np.maximum(np.abs(f_l), np.abs(w)),
        "clearing": (t_p * l - h_ratio) / np.abs(h_ratio),
    }


def market_clearing_residual(params: ModelParams, constants: EquilibriumConstants,
                             omega_x: float = 0.0, x_eval=None,
                             x_upper: float = None) -> np.ndarray:
    """Relative gap between labor demanded and supplied above each type x.

    Demand above x integrates l(T^{-1}(y)) h(y) over matched top types
    [T(x), T(x_upper)] by adaptive quadrature; supply is the closed Pareto
    tail mass of g between x and x_upper.
    """
    if x_eval is None:
        x_eval = np.geomspace(params.x_min, 50.0 * params.x_min, 50)
    x_eval = np.atleast_1d(np.asarray(x_eval, dtype=float))
    if x_upper is None:
        x_upper = 1e4 * params.x_min
    lx = params.lambda_x
    hy_level = params.lambda_y * params.y_min ** params.lambda_y

    def integrand(y):
        xv = inverse_match(y, omega_x, constants)
        return labor_demand(xv, omega_x, constants, params) \
            * hy_level / y ** (params.lambda_y + 1.0)

    res = np.empty_like(x_eval)
    y_hi = match_top_type(x_upper, omega_x, constants, params)
    for i, x0 in enumerate(x_eval):
        y_lo = match_top_type(x0, omega_x, constants, params)
        demand, _ = quad(integrand, y_lo, y_hi, limit=200, epsabs=0.0, epsrel=1e-10)
        supply = (params.x_min / x0) ** lx - (params.x_min / x_upper) ** lx
        res[i] = (demand - supply) / supply
    return res


def cd_demand_consistency(x, eta: float, params: ModelParams,
                          constants: EquilibriumConstants) -> np.ndarray:
    """Relative gap between the two routes to the CD worker count.

    Route 1: the wage first-order condition
    l = (alpha_l e^eta x^(beta_x - beta_x/alpha_l) y^beta_y)^(1/(1-alpha_l)).
    Route 2: the market-clearing slope condition l = (g/h)/T'.
    The two agree exactly only at the correct slope A, so this pins the part
    of the closed form the second-order ODE cancels out.
    """
    from .model import cd_labor_demand
    x = np.asarray(x, dtype=float)
    l_foc = cd_labor_demand(x, eta, params, constants)
    t = constants.slope * x ** constants.exponent
    t_p = constants.slope * constants.exponent * x ** (constants.exponent - 1.0)
    l_clearing = density_ratio(x, t, params) / t_p
    return (l_foc - l_clearing) / l_clearing
