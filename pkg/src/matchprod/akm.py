"""Two-way fixed-effects earnings decomposition and worker quality.

log earnings = intercept + worker effect + age-sex covariates + firm effect
+ two-year period effects + residual, estimated by sparse least squares on
the largest connected worker-firm set.  Worker quality is the person effect
plus the age-sex contribution; firm-level top and non-top qualities are the
inputs to the production-function stage.
"""

from dataclasses import dataclass, field

import numpy as np
import pandas as pd
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components
from scipy.sparse.linalg import lsmr

from .covariates import COVARIATE_NAMES, age_sex_design, year_bins
from .errors import NotConnected, SolverNoConvergence, UnknownWorker

DEFAULT_SIZE_BINS = ((1, 9), (10, 19), (20, 99), (100, 499), (500, None))


@dataclass
class ScreenConfig:
    """Sample restrictions applied before estimation."""

    min_age: int = 20
    max_age: int = 64
    earnings_floor: float = 0.0      # analogue of minimum wage x 40 x 13
    secondary_job_ratio: float = 2.0 / 3.0
    drop_owners: bool = True


def apply_sample_screens(matches: pd.DataFrame,
                         screen: ScreenConfig = None):
    """Apply the estimation screens; returns (kept matches, drop counts).

    In order: age window, earnings floor, keep the two highest-paying jobs
    per worker-year, drop the second job when it pays less than two-thirds
    of the first, drop owner matches.  Idempotent by construction.
    """
    screen = screen or ScreenConfig()
    report = {"rows_in": len(matches)}
    df = matches

    keep = (df["age"] >= screen.min_age) & (df["age"] <= screen.max_age)
    report["dropped_age"] = int((~keep).sum())
    df = df[keep]

    keep = df["earnings"] >= screen.earnings_floor
    report["dropped_floor"] = int((~keep).sum())
    df = df[keep]

    df = df.sort_values(["worker_id", "year", "earnings", "firm_id"],
                        ascending=[True, True, False, True])
    rank = df.groupby(["worker_id", "year"]).cumcount()
    report["dropped_extra_jobs"] = int((rank >= 2).sum())
    df = df[rank < 2]

    top_pay = df.groupby(["worker_id", "year"])["earnings"].transform("max")
    second = (df.groupby(["worker_id", "year"]).cumcount() == 1)
    weak_second = second & (df["earnings"]
                            < screen.secondary_job_ratio * top_pay)
    report["dropped_two_thirds"] = int(weak_second.sum())
    df = df[~weak_second]

    if screen.drop_owners and "owner_flag" in df.columns:
        owners = df["owner_flag"].astype(bool)
        report["dropped_owner"] = int(owners.sum())
        df = df[~owners]
    else:
        report["dropped_owner"] = 0

    report["rows_out"] = len(df)
    return df.reset_index(drop=True), report


def _graph_components(matches):
    workers, w_codes = np.unique(matches["worker_id"].to_numpy(),
                                 return_inverse=True)
    firms, f_codes = np.unique(matches["firm_id"].to_numpy(),
                               return_inverse=True)
    n_w, n_f = len(workers), len(firms)
    ones = np.ones(len(matches), dtype=np.int8)
    adj = sp.coo_matrix((ones, (w_codes, f_codes + n_w)),
                        shape=(n_w + n_f, n_w + n_f))
    adj = adj + adj.T
    n_comp, labels = connected_components(adj.tocsr(), directed=False)
    return workers, w_codes, firms, f_codes, n_comp, labels


def largest_connected_set(matches: pd.DataFrame):
    """Matches whose worker and firm lie in the largest connected component.

    Returns (subset, stats) with the component-size distribution measured
    in match rows.
    """
    workers, w_codes, firms, f_codes, n_comp, labels = _graph_components(matches)
    match_comp = labels[w_codes]  # == labels[f_codes + n_w] by construction
    sizes = np.bincount(match_comp, minlength=n_comp)
    biggest = int(np.argmax(sizes))
    keep = match_comp == biggest
    stats = {
        "n_components": int(n_comp),
        "match_counts": np.sort(sizes)[::-1].tolist(),
        "share_kept": float(sizes[biggest] / len(matches)) if len(matches) else 0.0,
    }
    return matches[keep].reset_index(drop=True), stats


@dataclass
class AkmEstimate:
    """Fitted two-way fixed-effects earnings decomposition."""

    alpha: pd.Series            # worker effects, indexed by worker_id
    psi: pd.Series              # firm effects, indexed by firm_id
    beta: np.ndarray            # age-sex covariate coefficients
    year_effects: pd.Series     # two-year bin effects (first bin is 0)
    intercept: float
    residuals: np.ndarray
    r_squared: float
    adj_r_squared: float
    base_year: int
    n_params: int
    solver: dict = field(default_factory=dict)


def _build_design(matches, base_year):
    workers, w_codes, firms, f_codes, n_comp, labels = _graph_components(matches)
    n, n_w, n_f = len(matches), len(workers), len(firms)

    # pin the smallest firm_id of each component to psi = 0
    firm_labels = labels[n_w:]
    pinned = np.zeros(n_f, dtype=bool)
    for comp in range(n_comp):
        members = np.flatnonzero(firm_labels == comp)
        if members.size:
            pinned[members[0]] = True  # firms sorted by id within np.unique
    free_idx = np.flatnonzero(~pinned)
    firm_col_of = np.full(n_f, -1)
    firm_col_of[free_idx] = np.arange(len(free_idx))

    bins = year_bins(matches["year"], base_year)
    n_bins = int(bins.max()) + 1 if n else 1

    xb = age_sex_design(matches["age"], matches["sex"])
    n_x = xb.shape[1]

    rows, cols, vals = [np.arange(n)], [w_codes], [np.ones(n)]
    has_free_firm = firm_col_of[f_codes] >= 0
    rows.append(np.flatnonzero(has_free_firm))
    cols.append(n_w + firm_col_of[f_codes[has_free_firm]])
    vals.append(np.ones(int(has_free_firm.sum())))

    x_base = n_w + len(free_idx)
    for k in range(n_x):
        rows.append(np.arange(n))
        cols.append(np.full(n, x_base + k))
        vals.append(xb[:, k])

    yr_base = x_base + n_x
    in_later_bin = bins >= 1
    rows.append(np.flatnonzero(in_later_bin))
    cols.append(yr_base + bins[in_later_bin] - 1)
    vals.append(np.ones(int(in_later_bin.sum())))

    const_col = yr_base + (n_bins - 1)
    rows.append(np.arange(n))
    cols.append(np.full(n, const_col))
    vals.append(np.ones(n))

    design = sp.csr_matrix(
        (np.concatenate(vals),
         (np.concatenate(rows), np.concatenate(cols))),
        shape=(n, const_col + 1))
    layout = {
        "workers": workers, "firms": firms, "free_idx": free_idx,
        "n_w": n_w, "x_base": x_base, "yr_base": yr_base,
        "const_col": const_col, "n_bins": n_bins, "n_comp": n_comp,
        "worker_labels": labels[:n_w],
    }
    return design, layout


def estimate_akm(matches: pd.DataFrame, tol: float = 1e-10,
                 max_iter: int = None, require_connected: bool = False) -> AkmEstimate:
    """Least-squares fit of the two-way fixed-effects earnings equation.

    The sparse design (worker dummies, firm dummies with one firm per
    component pinned to zero, age-sex covariates, two-year bins, intercept)
    is column-equilibrated and solved with LSMR; equilibration is the
    diagonal preconditioning of the normal equations.  Convergence is
    verified on the normal-equation residual at ``tol`` relative.  The one
    remaining gauge direction (workers versus intercept) is resolved by
    recentering worker effects to mean zero.
    """
    y = np.log(matches["earnings"].to_numpy(dtype=float))
    base_year = int(matches["year"].min())
    design, layout = _build_design(matches, base_year)
    if require_connected and layout["n_comp"] > 1:
        raise NotConnected(f"{layout['n_comp']} components; run "
                           "largest_connected_set first")

    col_norms = np.sqrt(np.asarray(design.multiply(design).sum(axis=0)).ravel())
    col_norms[col_norms == 0] = 1.0
    scaled = design @ sp.diags(1.0 / col_norms)
    if max_iter is None:
        max_iter = 20 * (design.shape[0] + design.shape[1])
    sol = lsmr(scaled, y, atol=1e-14, btol=1e-14, conlim=0.0,
               maxiter=max_iter)
    coef = sol[0] / col_norms

    fitted = design @ coef
    resid = y - fitted
    ne_num = np.linalg.norm(design.T @ resid)
    ne_den = np.linalg.norm(design.T @ y)
    rel = ne_num / ne_den if ne_den > 0 else 0.0
    if rel > tol:
        raise SolverNoConvergence(
            f"normal-equation residual {rel:.3e} above tolerance {tol:.1e}")

    n_w = layout["n_w"]
    alpha = coef[:n_w].copy()
    intercept = coef[layout["const_col"]]
    shift = alpha.mean()
    alpha -= shift
    intercept += shift

    psi = np.zeros(len(layout["firms"]))
    psi[layout["free_idx"]] = coef[n_w:n_w + len(layout["free_idx"])]
    beta = coef[layout["x_base"]:layout["x_base"] + len(COVARIATE_NAMES)]
    yr = np.zeros(layout["n_bins"])
    yr[1:] = coef[layout["yr_base"]:layout["yr_base"] + layout["n_bins"] - 1]

    sst = np.sum((y - y.mean()) ** 2)
    ssr = np.sum(resid ** 2)
    r2 = 1.0 - ssr / sst if sst > 0 else 1.0
    p = design.shape[1]
    n = len(y)
    adj = 1.0 - (1.0 - r2) * (n - 1) / max(n - p - 1, 1)
    return AkmEstimate(
        alpha=pd.Series(alpha, index=pd.Index(layout["workers"], name="worker_id")),
        psi=pd.Series(psi, index=pd.Index(layout["firms"], name="firm_id")),
        beta=np.asarray(beta),
        year_effects=pd.Series(yr, index=pd.RangeIndex(layout["n_bins"], name="bin")),
        intercept=float(intercept),
        residuals=resid,
        r_squared=float(r2),
        adj_r_squared=float(adj),
        base_year=base_year,
        n_params=int(p),
        solver={"iterations": int(sol[2]), "ne_rel_residual": float(rel),
                "n_components": layout["n_comp"]},
    )


def worker_quality(estimate: AkmEstimate, matches: pd.DataFrame) -> np.ndarray:
    """Worker quality h = person effect + age-sex contribution, per match row.

    Excludes the firm effect, intercept, period effects and residual, so h is
    invariant to shifting all firm effects by a constant.
    """
    ids = matches["worker_id"].to_numpy()
    missing = ~np.isin(ids, estimate.alpha.index.to_numpy())
    if missing.any():
        raise UnknownWorker(f"{int(missing.sum())} matches reference workers "
                            "outside the fitted sample")
    alpha = estimate.alpha.loc[ids].to_numpy()
    return alpha + age_sex_design(matches["age"], matches["sex"]) @ estimate.beta


def identify_top_workers(matches: pd.DataFrame,
                         tie_threshold: float = 0.995) -> np.ndarray:
    """Flag the top-paid match per firm-year, and a near-tied second.

    The highest-earning match is a top worker; the second highest is also a
    top iff its earnings exceed ``tie_threshold`` times the highest.  Exact
    ties break deterministically toward the smaller worker_id.
    """
    order = matches.reset_index(drop=True).sort_values(
        ["firm_id", "year", "earnings", "worker_id"],
        ascending=[True, True, False, True])
    rank = order.groupby(["firm_id", "year"]).cumcount()
    top_pay = order.groupby(["firm_id", "year"])["earnings"].transform("max")
    is_top = (rank == 0) | ((rank == 1)
                            & (order["earnings"] > tie_threshold * top_pay))
    flags = np.empty(len(order), dtype=bool)
    flags[order.index.to_numpy()] = is_top.to_numpy()
    return flags


def firm_quality(matches: pd.DataFrame, h: np.ndarray, flags: np.ndarray):
    """Firm-year top and non-top quality; returns (table, n_dropped).

    ln_y averages h over the flagged top matches (one or two), ln_x over the
    rest.  Firm-years without a non-top worker are dropped and counted.
    """
    df = pd.DataFrame({
        "firm_id": matches["firm_id"].to_numpy(),
        "year": matches["year"].to_numpy(),
        "h": np.asarray(h, dtype=float),
        "top": np.asarray(flags, dtype=bool),
    })
    key = ["firm_id", "year"]
    tops = df[df["top"]].groupby(key)["h"].agg(ln_y="mean", n_top="size")
    non = df[~df["top"]].groupby(key)["h"].agg(ln_x="mean", n_nontop="size")
    out = tops.join(non, how="left")
    dropped = int(out["n_nontop"].isna().sum())
    out = out.dropna(subset=["n_nontop"]).reset_index()
    out["n_top"] = out["n_top"].astype(int)
    out["n_nontop"] = out["n_nontop"].astype(int)
    return out[["firm_id", "year", "ln_y", "ln_x", "n_top", "n_nontop"]], dropped


def _bin_label(lo, hi):
    return f"{lo}-{hi}" if hi is not None else f"{lo}+"


def variance_decomposition(estimate: AkmEstimate, matches: pd.DataFrame,
                           size_bins=DEFAULT_SIZE_BINS) -> pd.DataFrame:
    """Variance components of log earnings, overall and by firm size.

    Components: worker effect, firm effect, age-sex contribution, period
    effect, residual.  Population moments, so the additive identity
    Var(ln w) = sum of variances + 2 * sum of pairwise covariances is exact.
    """
    lnw = np.log(matches["earnings"].to_numpy(dtype=float))
    worker = estimate.alpha.loc[matches["worker_id"].to_numpy()].to_numpy()
    firm = estimate.psi.loc[matches["firm_id"].to_numpy()].to_numpy()
    xb = age_sex_design(matches["age"], matches["sex"]) @ estimate.beta
    yr = estimate.year_effects.to_numpy()[
        year_bins(matches["year"], estimate.base_year)]
    resid = lnw - (estimate.intercept + worker + firm + xb + yr)

    size = matches.groupby(["firm_id", "year"])["worker_id"].transform("size")
    comps = {"worker": worker, "firm": firm, "xb": xb, "year": yr,
             "resid": resid}
    names = list(comps)

    def stats(mask):
        row = {"n": int(mask.sum())}
        if row["n"] == 0:
            return row
        w = lnw[mask]
        row["var_lnw"] = float(np.var(w))
        for name in names:
            row[f"var_{name}"] = float(np.var(comps[name][mask]))
        for i, a in enumerate(names):
            for b in names[i + 1:]:
                row[f"cov_{a}_{b}"] = float(np.cov(
                    comps[a][mask], comps[b][mask], ddof=0)[0, 1])
        return row

    rows = [{"firm_size": "all", **stats(np.ones(len(lnw), dtype=bool))}]
    for lo, hi in size_bins:
        mask = (size >= lo).to_numpy()
        if hi is not None:
            mask &= (size <= hi).to_numpy()
        rows.append({"firm_size": _bin_label(lo, hi), **stats(mask)})
    return pd.DataFrame(rows)
