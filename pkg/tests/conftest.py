import numpy as np
import pytest

from matchprod import ModelParams

# Parameter sets satisfying the positive-sorting sufficient condition, used
# by the oracle and acceptance suites.  Tail exponents echo the estimated
# worker-quality tails (2.06 / 1.80); theta and alpha_l echo sector-level
# production estimates.
CES_PAM_SETS = {
    "construction_like": ModelParams(theta=0.417, alpha_l=0.777, alpha_k=0.079,
                                     lambda_x=2.06, lambda_y=1.80, sigma=1.5,
                                     rho=0.702),
    "symmetric": ModelParams(theta=0.5, alpha_l=0.5, lambda_x=2.0, lambda_y=2.0,
                             sigma=2.0),
    "manufacturing_like": ModelParams(theta=0.935, alpha_l=0.578, alpha_k=0.043,
                                      lambda_x=2.06, lambda_y=1.48, sigma=1.25,
                                      rho=0.808),
    "negative_theta": ModelParams(theta=-0.5, alpha_l=0.4, lambda_x=1.5,
                                  lambda_y=2.5, sigma=0.5),
    "wholesale_like": ModelParams(theta=1.275, alpha_l=0.53, alpha_k=0.031,
                                  lambda_x=2.06, lambda_y=1.48, sigma=1.8,
                                  rho=0.847),
    "wide_slope": ModelParams(theta=4.0, alpha_l=0.5, lambda_x=2.0, lambda_y=1.0,
                              sigma=3.0),
}

CD_PAM_SETS = {
    "integer_exponent": ModelParams(alpha_l=0.6, lambda_x=2.0, lambda_y=1.5,
                                    beta_x_cd=0.3, beta_y_cd=0.3, sigma=1.0,
                                    theta=0.5),
    "fractional_exponent": ModelParams(alpha_l=0.7, lambda_x=2.06, lambda_y=1.8,
                                       beta_x_cd=0.2, beta_y_cd=0.25, sigma=1.0,
                                       theta=0.5),
    "reversed_ordering": ModelParams(alpha_l=0.5, lambda_x=2.0, lambda_y=1.5,
                                     beta_x_cd=1.8, beta_y_cd=1.2, sigma=1.0,
                                     theta=0.5),
}


@pytest.fixture(scope="session")
def ces_pam_sets():
    return CES_PAM_SETS


@pytest.fixture(scope="session")
def cd_pam_sets():
    return CD_PAM_SETS


@pytest.fixture()
def rng():
    return np.random.default_rng(20240212)
