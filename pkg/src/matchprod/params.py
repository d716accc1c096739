"""Structural parameters of the matched-team production economy.

One :class:`ModelParams` instance describes a sector: the CES (or
Cobb-Douglas) team production technology, the Pareto distributions of the
two worker types, and the shock processes driving Hicks-neutral technology
and match efficiency.
"""

import math
from dataclasses import dataclass, field, asdict

from .errors import InvalidParam


@dataclass(frozen=True)
class ModelParams:
    """Structural parameters of one sector's economy.

    Attributes
    ----------
    alpha_x, alpha_y : CES share weights of non-top / top worker quality (> 0).
    alpha_l : output elasticity of the worker count, in (0, 1).
    alpha_k : output elasticity of capital, in [0, 1). Zero drops capital.
    theta : returns to the worker-quality composite (nonzero).
    sigma : inverse elasticity of substitution between worker types (> 0);
        CES computations additionally require sigma != 1.
    lambda_x, lambda_y : Pareto tail exponents of non-top / top types (> 0).
    x_min, y_min : Pareto lower bounds (> 0).
    rho : AR(1) persistence of Hicks-neutral log technology, in (-1, 1).
    rho_x : AR(1) persistence of log match efficiency, in (-1, 1).
    sigma_xi : sd of the technology innovation.
    sigma_u_x : sd of the match-efficiency innovation.
    sigma_eps : sd of the measurement error on log output.
    beta_0 : production intercept.
    beta_x_cd, beta_y_cd : Cobb-Douglas quality elasticities (CD mode only).
    """

    alpha_x: float = 0.5
    alpha_y: float = 0.5
    alpha_l: float = 0.7
    alpha_k: float = 0.1
    theta: float = 0.5
    sigma: float = 2.0
    lambda_x: float = 2.06
    lambda_y: float = 1.80
    x_min: float = 1.0
    y_min: float = 1.0
    rho: float = 0.7
    rho_x: float = 0.7
    sigma_xi: float = 0.15
    sigma_u_x: float = 0.10
    sigma_eps: float = 0.10
    beta_0: float = 1.0
    beta_x_cd: float = 0.3
    beta_y_cd: float = 0.3

    def __post_init__(self):
        checks = [
            (self.alpha_x > 0, "alpha_x must be > 0"),
            (self.alpha_y > 0, "alpha_y must be > 0"),
            (0.0 < self.alpha_l < 1.0, "alpha_l must lie in (0, 1)"),
            (0.0 <= self.alpha_k < 1.0, "alpha_k must lie in [0, 1)"),
            (self.theta != 0.0, "theta must be nonzero"),
            (self.sigma > 0, "sigma must be > 0"),
            (self.lambda_x > 0, "lambda_x must be > 0"),
            (self.lambda_y > 0, "lambda_y must be > 0"),
            (self.x_min > 0, "x_min must be > 0"),
            (self.y_min > 0, "y_min must be > 0"),
            (abs(self.rho) < 1.0, "rho must lie in (-1, 1)"),
            (abs(self.rho_x) < 1.0, "rho_x must lie in (-1, 1)"),
            (self.sigma_xi >= 0, "sigma_xi must be >= 0"),
            (self.sigma_u_x >= 0, "sigma_u_x must be >= 0"),
            (self.sigma_eps >= 0, "sigma_eps must be >= 0"),
        ]
        for ok, msg in checks:
            if not ok:
                raise InvalidParam(msg)
        for name in ("alpha_x", "alpha_y", "alpha_l", "alpha_k", "theta",
                     "sigma", "lambda_x", "lambda_y", "x_min", "y_min"):
            if not math.isfinite(getattr(self, name)):
                raise InvalidParam(f"{name} must be finite")

    def replace(self, **changes) -> "ModelParams":
        fields = asdict(self)
        fields.update(changes)
        return ModelParams(**fields)


@dataclass(frozen=True)
class EquilibriumConstants:
    """Closed-form constants of the matching equilibrium.

    The matching function is ``y = slope * exp(omega_x) * x ** exponent``.
    In CES mode ``exponent == 1`` and ``slope = psi ** (1 / (1 - sigma))``
    evaluated at zero match efficiency; ``b0 = ln(psi) / (1 - sigma)`` is the
    log matching intercept. In Cobb-Douglas mode ``psi`` is not defined
    (stored as nan), the slope depends on the technology level, and
    ``b0 = ln(slope)``.

    ``density_ratio`` is lambda_x x_min^lambda_x / (lambda_y y_min^lambda_y),
    the constant in the type-density ratio g(x)/h(y) = density_ratio *
    y^(lambda_y+1) / x^(lambda_x+1). ``wage_level`` is the multiplicative
    level of the equilibrium wage schedule.
    """

    psi: float
    slope: float
    exponent: float
    density_ratio: float
    wage_level: float
    b0: float
    mode: str = field(default="ces")
