"""Match-efficiency estimation from the firm-quality panel.

The log quality gap between the top worker and the mean non-top worker is
gap = b0 + omega_x with omega_x an AR(1), so

    gap_t = (1 - rho_x) b0 + rho_x gap_{t-1} + u_t,

estimated per sector with the lagged gap as its own instrument (exactly
identified, closed form).  The efficiency series is gap - b0_hat.
"""

from dataclasses import dataclass

import numpy as np
import pandas as pd

from .errors import InsufficientPanel

_VAR_FLOOR = 1e-14


@dataclass
class MatchEffEstimate:
    sector: object
    b0_hat: float
    rho_x_hat: float
    omega_x: pd.DataFrame      # firm_id, year, omega_x_hat
    n_obs: int
    stationary: bool           # |rho_x_hat| < 1


def estimate_match_efficiency(quality: pd.DataFrame,
                              sector=None) -> MatchEffEstimate:
    """Fit the gap AR(1); returns intercept, persistence and the series.

    A constant lagged gap (no within-panel variation) pins rho_x to 0 and
    the intercept to the mean gap, which is the degenerate no-innovation
    limit of the model.
    """
    df = quality[["firm_id", "year", "ln_y", "ln_x"]].copy()
    df["gap"] = df["ln_y"] - df["ln_x"]
    lag = df[["firm_id", "year", "gap"]].copy()
    lag["year"] = lag["year"] + 1
    pairs = df.merge(lag.rename(columns={"gap": "gap_lag"}),
                     on=["firm_id", "year"], how="inner")
    if len(pairs) < 2:
        raise InsufficientPanel("need at least 2 consecutive-year gaps")

    g, gl = pairs["gap"].to_numpy(), pairs["gap_lag"].to_numpy()
    if gl.var() < _VAR_FLOOR:
        rho_x, intercept = 0.0, float(g.mean())
    else:
        rho_x = float(np.cov(g, gl, ddof=0)[0, 1] / gl.var())
        intercept = float(g.mean() - rho_x * gl.mean())
    b0 = intercept / (1.0 - rho_x) if abs(1.0 - rho_x) > 1e-12 else np.nan
    series = pd.DataFrame({
        "firm_id": df["firm_id"], "year": df["year"],
        "omega_x_hat": df["gap"] - b0,
    }).sort_values(["firm_id", "year"], ignore_index=True)
    return MatchEffEstimate(sector=sector, b0_hat=float(b0),
                            rho_x_hat=rho_x, omega_x=series,
                            n_obs=len(pairs), stationary=abs(rho_x) < 1.0)


def general_slope_check(quality: pd.DataFrame) -> float:
    """Pooled OLS slope of ln_y on ln_x; the model predicts exactly 1."""
    if len(quality) < 2:
        raise InsufficientPanel("need at least 2 observations")
    ln_x = quality["ln_x"].to_numpy(dtype=float)
    ln_y = quality["ln_y"].to_numpy(dtype=float)
    if ln_x.var() < _VAR_FLOOR:
        raise InsufficientPanel("no variation in ln_x")
    return float(np.cov(ln_y, ln_x, ddof=0)[0, 1] / ln_x.var())


def estimate_by_sector(quality: pd.DataFrame) -> list:
    """Run the gap AR(1) and slope diagnostic per sector column."""
    results = []
    for sector, grp in quality.groupby("sector"):
        est = estimate_match_efficiency(grp, sector=sector)
        results.append((est, general_slope_check(grp)))
    return results
