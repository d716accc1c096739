"""Walk through the closed-form matching equilibrium.

A firm pairs one top worker of quality y with l workers of quality x in a
CES team; with Pareto-distributed types the optimal assignment is linear,
y = psi^(1/(1-sigma)) e^(omega_x) x, and worker counts and wages follow in
closed form.  This script evaluates the constants, verifies them against
the independent ODE / first-order-condition oracles, and shows what breaks
when the matching constant is wrong.
"""

import numpy as np

from matchprod import (
    ModelParams,
    equilibrium_constants,
    labor_demand,
    match_top_type,
    pam_conditions,
    wage_rate,
)
from matchprod.errors import PamViolation
from matchprod.model import cobb_douglas_constants
from matchprod.oracle import (
    foc_residuals,
    market_clearing_residual,
    matching_ode_residual,
)

# A construction-sector-like parameterization: output elasticities around
# (theta, alpha_l, alpha_k) = (0.417, 0.777, 0.079), worker-quality tails
# 2.06 (non-top) and 1.80 (top).
params = ModelParams(theta=0.417, alpha_l=0.777, alpha_k=0.079,
                     lambda_x=2.06, lambda_y=1.80, sigma=1.5)

check = pam_conditions(params)
print("positive-sorting conditions:", check)

c = equilibrium_constants(params)
print(f"\nmatching constant psi   = {c.psi:.9f}")
print(f"matching slope (w_x=0)  = {c.slope:.6f}")
print(f"log matching intercept  = {c.b0:.6f}")
print(f"wage level              = {c.wage_level:.6f}")

grid = np.geomspace(1.0, 100.0, 100)
res = matching_ode_residual(lambda x: c.slope * x, params, mode="ces",
                            grid=grid)
print(f"\nODE oracle, closed form:      max residual {np.abs(res).max():.2e}")

res_bad = matching_ode_residual(lambda x: c.slope * x ** 1.1, params,
                                mode="ces", grid=grid)
print(f"ODE oracle, perturbed slope:  max residual {np.abs(res_bad).max():.2e}")

foc = foc_residuals(np.geomspace(1.0, 50.0, 20), params, c,
                    omega=0.3, omega_x=0.1)
print("first-order conditions:      ",
      {k: f"{np.abs(v).max():.2e}" for k, v in foc.items()})

mc = market_clearing_residual(params, c, omega_x=0.1)
print(f"market clearing (quadrature): max residual {np.abs(mc).max():.2e}")

# The heavier top tail (1.48 instead of 1.80) pushes the sorting condition
# past its boundary and the equilibrium disappears.
try:
    equilibrium_constants(params.replace(lambda_y=1.48))
except PamViolation as exc:
    print(f"\nlambda_y = 1.48 violates sorting: {exc}")

# Cobb-Douglas variant: the slope now moves with the technology level.
cd = ModelParams(alpha_l=0.6, lambda_x=2.0, lambda_y=1.5,
                 beta_x_cd=0.3, beta_y_cd=0.3, sigma=1.0, theta=0.5)
for eta in (0.0, 0.5):
    cc = cobb_douglas_constants(cd, eta=eta)
    print(f"\nCD at eta={eta}: slope A = {cc.slope:.4f}, exponent B = "
          f"{cc.exponent:.4f}")
    res = matching_ode_residual(lambda x: cc.slope * x ** cc.exponent, cd,
                                mode="cd", grid=grid)
    print(f"  CD ODE oracle: max residual {np.abs(res).max():.2e}")

# Equilibrium schedules on a small grid
print("\n   x      T(x)      l(x)      w(x)")
for x in (1.0, 2.0, 5.0, 20.0):
    print(f"{x:6.1f} {match_top_type(x, 0.0, c, params):9.3f} "
          f"{labor_demand(x, 0.0, c, params):9.3f} "
          f"{wage_rate(x, 0.0, 0.0, c, params):9.4f}")
