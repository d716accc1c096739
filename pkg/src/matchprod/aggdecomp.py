"""Aggregation and decomposition of measured productivity.

Measured log productivity z adds the recovered technology to the quality
contribution (theta * ln y for the top-based index).  The share-weighted
aggregate splits exactly into an unweighted mean plus a share-value
covariance term (reallocation), and z = omega + quality splits the two
terms further into four.  All identities here are algebra, closed to
float precision, not estimates.
"""

import numpy as np
import pandas as pd

from .errors import (
    KeyMismatch,
    SharesNotNormalized,
    TooFewFirms,
    WindowOutOfRange,
)

_SHARE_TOL = 1e-8


def _theta_for(df, theta):
    if np.isscalar(theta):
        return np.full(len(df), float(theta))
    if "sector" not in df.columns:
        raise KeyMismatch("per-sector theta needs a sector column")
    try:
        return df["sector"].map(lambda s: float(theta[s])).to_numpy()
    except KeyError as exc:
        raise KeyMismatch(f"theta missing for sector {exc}") from None


def measured_productivity(df: pd.DataFrame, theta,
                          variant: str = "top") -> pd.DataFrame:
    """Rowwise measured productivity z = omega + quality contribution.

    variant "top":    quality = theta * ln_y
    variant "nontop": quality = theta * (omega_x_hat + ln_x)
    Within a sector the two differ by the constant theta * b0, because
    ln_y = b0 + omega_x + ln_x along the matching schedule.
    ``theta`` is a scalar or a mapping keyed by sector.
    """
    need = {"firm_id", "year", "omega_hat"}
    need |= {"ln_y"} if variant == "top" else {"ln_x", "omega_x_hat"}
    if variant not in ("top", "nontop"):
        raise KeyMismatch(f"unknown variant {variant!r}")
    if not need.issubset(df.columns):
        raise KeyMismatch(f"missing columns {sorted(need - set(df.columns))}")
    th = _theta_for(df, theta)
    quality = th * (df["ln_y"].to_numpy() if variant == "top"
                    else df["omega_x_hat"].to_numpy() + df["ln_x"].to_numpy())
    out = pd.DataFrame({
        "firm_id": df["firm_id"], "year": df["year"],
        "omega_comp": df["omega_hat"].to_numpy(),
        "quality_comp": quality,
        "variant": variant,
    })
    if "sector" in df.columns:
        out.insert(2, "sector", df["sector"])
    out["z"] = out["omega_comp"] + out["quality_comp"]
    return out


def cd_measured_productivity(df: pd.DataFrame, beta_x, beta_y) -> pd.DataFrame:
    """Cobb-Douglas variant: z = eta + beta_x ln_x + beta_y ln_y."""
    need = {"firm_id", "year", "omega_hat", "ln_x", "ln_y"}
    if not need.issubset(df.columns):
        raise KeyMismatch(f"missing columns {sorted(need - set(df.columns))}")
    bx, by = _theta_for(df, beta_x), _theta_for(df, beta_y)
    out = pd.DataFrame({
        "firm_id": df["firm_id"], "year": df["year"],
        "omega_comp": df["omega_hat"].to_numpy(),
        "quality_comp": bx * df["ln_x"].to_numpy() + by * df["ln_y"].to_numpy(),
        "variant": "cd",
    })
    if "sector" in df.columns:
        out.insert(2, "sector", df["sector"])
    out["z"] = out["omega_comp"] + out["quality_comp"]
    return out


def _check_shares(shares, years):
    sums = pd.Series(shares).groupby(pd.Series(years).to_numpy()).sum()
    bad = sums[(sums - 1.0).abs() > _SHARE_TOL]
    if len(bad):
        raise SharesNotNormalized(
            f"shares do not sum to 1 in years {bad.index.tolist()}")


def aggregate(values, shares, years) -> pd.Series:
    """Share-weighted aggregate per year, z_t = sum_j s_jt z_jt.

    exp of the result is the share-weighted geometric mean of the levels.
    """
    values = np.asarray(values, dtype=float)
    shares = np.asarray(shares, dtype=float)
    years = np.asarray(years)
    _check_shares(shares, years)
    df = pd.DataFrame({"v": values * shares, "year": years})
    out = df.groupby("year")["v"].sum()
    out.name = "aggregate"
    return out


def olley_pakes(values, shares, years) -> pd.DataFrame:
    """Aggregate = unweighted mean + sum_j (s_j - mean s)(z_j - mean z)."""
    values = np.asarray(values, dtype=float)
    shares = np.asarray(shares, dtype=float)
    years = np.asarray(years)
    _check_shares(shares, years)
    rows = []
    df = pd.DataFrame({"z": values, "s": shares, "year": years})
    for year, grp in df.groupby("year"):
        z, s = grp["z"].to_numpy(), grp["s"].to_numpy()
        cov_term = float(np.sum((s - s.mean()) * (z - z.mean())))
        rows.append({"year": year, "aggregate": float(np.sum(s * z)),
                     "mean": float(z.mean()), "covariance": cov_term})
    return pd.DataFrame(rows)


def four_term(omega, quality, shares, years) -> pd.DataFrame:
    """Two stacked decompositions of z = omega + quality.

    Columns omega_mean, omega_cov, quality_mean, quality_cov sum to the
    aggregate exactly.
    """
    part1 = olley_pakes(omega, shares, years)
    part2 = olley_pakes(quality, shares, years)
    out = pd.DataFrame({
        "year": part1["year"],
        "aggregate": part1["aggregate"] + part2["aggregate"],
        "omega_mean": part1["mean"], "omega_cov": part1["covariance"],
        "quality_mean": part2["mean"], "quality_cov": part2["covariance"],
    })
    return out


def growth_rates(series: pd.Series, periods) -> pd.DataFrame:
    """Average annual growth of a log series, in percent per year.

    ((last - first) / n_years) * 100 for each (start, end) window.
    """
    series = pd.Series(series)
    rows = []
    for start, end in periods:
        if start not in series.index or end not in series.index:
            raise WindowOutOfRange(f"window {start}-{end} not covered")
        if end <= start:
            raise WindowOutOfRange(f"empty window {start}-{end}")
        rate = (series.loc[end] - series.loc[start]) / (end - start) * 100.0
        rows.append({"start": start, "end": end, "growth_pct_per_year": rate})
    return pd.DataFrame(rows)


def dispersion_stats(z, years, omega=None, quality=None,
                     min_firms: int = 10) -> pd.DataFrame:
    """Per-year variance, interquartile range and the 90th-10th gap.

    With the two components supplied, the split
    Var(z) = Var(omega) + Var(quality) + 2 Cov closes exactly.
    Percentiles interpolate linearly between order statistics.
    """
    z = np.asarray(z, dtype=float)
    years = np.asarray(years)
    with_split = omega is not None and quality is not None
    rows = []
    for year in np.unique(years):
        mask = years == year
        if mask.sum() < min_firms:
            raise TooFewFirms(f"{int(mask.sum())} firms in {year}, "
                              f"need >= {min_firms}")
        zv = z[mask]
        row = {
            "year": year,
            "var_z": float(np.var(zv)),
            "iqr": float(np.percentile(zv, 75) - np.percentile(zv, 25)),
            "p90_p10": float(np.percentile(zv, 90) - np.percentile(zv, 10)),
        }
        if with_split:
            ov = np.asarray(omega, dtype=float)[mask]
            qv = np.asarray(quality, dtype=float)[mask]
            row["var_omega"] = float(np.var(ov))
            row["var_quality"] = float(np.var(qv))
            row["cov_omega_quality"] = float(np.cov(ov, qv, ddof=0)[0, 1])
        rows.append(row)
    return pd.DataFrame(rows)
