"""Age-sex earnings covariates shared by the generator and the estimator.

Age enters normalized as (age - 40) / 40, so every covariate column is zero
at age 40 and the fitted age profile is flat there by construction.  The
design is: age*male, age^2, age^2*male, age^3, age^3*male.
"""

import numpy as np

AGE_CENTER = 40.0
AGE_SCALE = 40.0

COVARIATE_NAMES = ("age_male", "age_sq", "age_sq_male", "age_cub", "age_cub_male")

# life-cycle profile used when generating earnings: concave in age with the
# peak pinned at 40, slightly steeper for men
DEFAULT_AGE_SEX_BETA = np.array([-0.098, -2.370, -0.579, 1.36, 0.589])


def age_sex_design(age, male) -> np.ndarray:
    """Covariate matrix (n, 5) for normalized age interacted with male."""
    a = (np.asarray(age, dtype=float) - AGE_CENTER) / AGE_SCALE
    m = np.asarray(male, dtype=float)
    return np.column_stack([a * m, a ** 2, a ** 2 * m, a ** 3, a ** 3 * m])


def age_sex_effect(age, male, beta=None):
    beta = DEFAULT_AGE_SEX_BETA if beta is None else np.asarray(beta, dtype=float)
    out = age_sex_design(age, male) @ beta
    return float(out[0]) if np.ndim(age) == 0 else out


def year_bins(year, base_year: int) -> np.ndarray:
    """Two-year bin index per observation (0 covers base_year, base_year+1)."""
    return (np.asarray(year, dtype=int) - int(base_year)) // 2
