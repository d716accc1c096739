"""Two-stage proxy-variable estimation of the production function.

Stage 1 regresses log output on a polynomial in the logs of top-worker
quality, worker count, capital, intermediates and prices; the fitted value
phi captures everything except measurement error, because intermediate
demand is strictly monotone in the technology shock and can be inverted.
Stage 2 exploits the technology AR(1): the composite residual

    e(b) = ln f_t - b0 - X_t c - rho [phi_{t-1} - b0 - X_{t-1} c]

is orthogonal to lagged inputs and current (predetermined) capital, giving
GMM moment conditions E[e * Z_{t-1}] = 0.  Estimation runs sector by
sector; bootstrap standard errors resample whole firms to respect the
panel dependence and the generated-regressor phi.
"""

import itertools
from dataclasses import dataclass

import numpy as np
import pandas as pd
from scipy.optimize import lsq_linear, minimize, minimize_scalar

from .errors import InsufficientPanel, MissingCoefficients, NoConvergence

CES_REGRESSORS = ("ln_y", "ln_l", "ln_k")
CES_COEF_NAMES = ("beta_0", "theta", "alpha_l", "alpha_k", "rho")
CD_REGRESSORS = ("ln_x", "ln_y", "ln_l", "ln_k")
CD_COEF_NAMES = ("beta_0", "beta_x", "beta_y", "alpha_l", "alpha_k", "rho")

_RHO_BOUND = 0.995


def prepare_panel(firms: pd.DataFrame, quality: pd.DataFrame = None) -> pd.DataFrame:
    """Build the log panel for estimation.

    With ``quality`` given (the firm-quality table), worker qualities come
    from the estimated ln_y / ln_x; otherwise the firm table's own x, y
    columns are used.  Rows with any nonpositive level are dropped.
    """
    df = firms.copy()
    if quality is not None:
        df = df.merge(quality[["firm_id", "year", "ln_y", "ln_x"]],
                      on=["firm_id", "year"], how="inner")
    else:
        df["ln_y"] = np.log(df["y"])
        df["ln_x"] = np.log(df["x"])
    keep = (df["value_added"] > 0) & (df["capital"] > 0) \
        & (df["labor_count"] > 0) & (df["materials"] > 0)
    df = df[keep].copy()
    df["ln_f"] = np.log(df["value_added"])
    df["ln_l"] = np.log(df["labor_count"].astype(float))
    df["ln_k"] = np.log(df["capital"])
    df["ln_m"] = np.log(df["materials"])
    df["ln_pg"] = np.log(df["p_g"])
    df["ln_pm"] = np.log(df["p_m"])
    cols = ["firm_id", "sector", "year", "ln_f", "ln_y", "ln_x", "ln_l",
            "ln_k", "ln_m", "ln_pg", "ln_pm"]
    cols = [c for c in cols if c in df.columns]
    return df[cols].sort_values(["firm_id", "year"], ignore_index=True)


def polynomial_basis(columns: np.ndarray, degree: int) -> np.ndarray:
    """All monomials of total degree <= degree, intercept included."""
    n, k = columns.shape
    terms = [np.ones(n)]
    for d in range(1, degree + 1):
        for combo in itertools.combinations_with_replacement(range(k), d):
            term = np.ones(n)
            for j in combo:
                term = term * columns[:, j]
            terms.append(term)
    return np.column_stack(terms)


@dataclass
class Stage1Fit:
    phi_hat: pd.DataFrame        # firm_id, year, phi_hat
    residuals: np.ndarray
    r_squared: float
    degree: int
    n_columns: int
    rank: int
    n_dropped: int


def stage1(panel: pd.DataFrame, degree: int = 3, form: str = "ces") -> Stage1Fit:
    """First-stage OLS of log output on the polynomial proxy basis.

    The residual is measurement error only; collinear basis columns (prices
    move at the sector-year level, so the cubic basis is rank deficient by
    construction) are handled by the SVD least squares and reported.
    """
    if degree < 1:
        raise InsufficientPanel("degree must be >= 1")
    var_names = ["ln_y", "ln_l", "ln_k", "ln_m", "ln_pg", "ln_pm"]
    if form == "cd":
        var_names = ["ln_x"] + var_names
    logs = panel[var_names].to_numpy(dtype=float)
    # standardize for conditioning; fitted values are unaffected
    mu, sd = logs.mean(axis=0), logs.std(axis=0)
    sd[sd == 0] = 1.0
    basis = polynomial_basis((logs - mu) / sd, degree)
    y = panel["ln_f"].to_numpy(dtype=float)
    # absorb the intercept exactly (demeaned slopes block): the truncated
    # SVD of the rank-deficient basis would otherwise reproduce the
    # constant direction only approximately, and a level shift of ln f
    # would not pass through phi exactly
    y_bar = y.mean()
    slopes_block = basis[:, 1:] - basis[:, 1:].mean(axis=0)
    coef, _, rank, _ = np.linalg.lstsq(slopes_block, y - y_bar, rcond=None)
    fitted = y_bar + slopes_block @ coef
    resid = y - fitted
    sst = np.sum((y - y_bar) ** 2)
    r2 = 1.0 - resid @ resid / sst if sst > 0 else 1.0
    phi = pd.DataFrame({"firm_id": panel["firm_id"], "year": panel["year"],
                        "phi_hat": fitted})
    return Stage1Fit(phi_hat=phi, residuals=resid, r_squared=float(r2),
                     degree=degree, n_columns=basis.shape[1],
                     rank=int(rank) + 1,
                     n_dropped=int(basis.shape[1] - rank - 1))


def _lag_pairs(panel, phi_hat, regressors):
    """Rows with both t-1 and t observed, with lagged phi and instruments."""
    df = panel.merge(phi_hat, on=["firm_id", "year"], how="left")
    lag = df.copy()
    lag["year"] = lag["year"] + 1
    keep = ["firm_id", "year", "phi_hat", "ln_m", "ln_pg", "ln_pm"]
    keep += list(regressors)
    keep = [c for c in keep if c in lag.columns or c in ("firm_id", "year")]
    lag = lag[keep].rename(columns={
        c: c + "_lag" for c in keep if c not in ("firm_id", "year")})
    pairs = df.merge(lag, on=["firm_id", "year"], how="inner")
    return pairs


@dataclass
class PfEstimate:
    """Second-stage GMM estimate for one sector."""

    sector: object
    coef: dict
    se: dict = None
    n_obs: int = 0
    objective: float = np.nan
    converged: bool = True
    form: str = "ces"
    stage1: Stage1Fit = None
    starts: int = 0

    @property
    def coef_vector(self):
        names = CES_COEF_NAMES if self.form == "ces" else CD_COEF_NAMES
        return np.array([self.coef[n] for n in names])


class _MomentSystem:
    def __init__(self, pairs, regressors, weight=None,
                 include_prices=False):
        self.y = pairs["ln_f"].to_numpy(dtype=float)
        self.x_now = pairs[list(regressors)].to_numpy(dtype=float)
        self.x_lag = pairs[[c + "_lag" for c in regressors]].to_numpy(dtype=float)
        self.phi_lag = pairs["phi_hat_lag"].to_numpy(dtype=float)
        z_cols = [np.ones(len(pairs)), self.phi_lag,
                  pairs["ln_m_lag"].to_numpy(dtype=float)]
        z_cols += [pairs[c + "_lag"].to_numpy(dtype=float)
                   for c in regressors if c != "ln_k"]
        z_cols.append(pairs["ln_k"].to_numpy(dtype=float))  # predetermined
        if include_prices:
            z_cols.append(pairs["ln_pg_lag"].to_numpy(dtype=float))
            z_cols.append(pairs["ln_pm_lag"].to_numpy(dtype=float))
        self.z = np.column_stack(z_cols)
        # demean the non-constant instruments: spans the same moment space,
        # balances the identity weighting, and makes an output level shift
        # translate the objective exactly (the lagged-phi instrument would
        # otherwise shift with the data)
        self.z[:, 1:] -= self.z[:, 1:].mean(axis=0)
        self.n = len(pairs)
        self.weight = np.eye(self.z.shape[1]) if weight is None else weight

    def residual(self, b):
        b0, coefs, rho = b[0], b[1:-1], b[-1]
        inner = self.phi_lag - b0 - self.x_lag @ coefs
        return self.y - b0 - self.x_now @ coefs - rho * inner

    def moments(self, b):
        return self.z.T @ self.residual(b) / self.n

    def objective(self, b):
        m = self.moments(b)
        return m @ self.weight @ m

    def moment_jacobian(self, b):
        b0, coefs, rho = b[0], b[1:-1], b[-1]
        de = np.empty((self.n, len(b)))
        de[:, 0] = -(1.0 - rho)
        de[:, 1:-1] = -(self.x_now - rho * self.x_lag)
        de[:, -1] = -(self.phi_lag - b0 - self.x_lag @ coefs)
        return self.z.T @ de / self.n

    def objective_grad(self, b):
        m = self.moments(b)
        jac = self.moment_jacobian(b)
        return m @ self.weight @ m, 2.0 * jac.T @ (self.weight @ m)

    def optimal_weight(self, b):
        e = self.residual(b)
        s = (self.z * e[:, None]).T @ (self.z * e[:, None]) / self.n
        return np.linalg.pinv(s)


def _ols_start(pairs, regressors):
    x = np.column_stack([np.ones(len(pairs)),
                         pairs[list(regressors)].to_numpy(dtype=float)])
    y = pairs["ln_f"].to_numpy(dtype=float)
    coef, *_ = np.linalg.lstsq(x, y, rcond=None)
    resid = y - x @ coef
    lag = pairs["phi_hat_lag"].to_numpy(dtype=float) - x[:, :1] @ coef[:1] \
        - pairs[[c + "_lag" for c in regressors]].to_numpy(dtype=float) @ coef[1:]
    denom = lag @ lag
    rho0 = float(np.clip(resid @ lag / denom, -0.9, 0.9)) if denom > 1e-12 else 0.0
    return np.concatenate([coef, [rho0]])


def stage2(panel: pd.DataFrame, stage1_fit: Stage1Fit, form: str = "ces",
           weighting: str = "identity", seed: int = 0,
           n_extra_starts: int = 8, nonnegative_quality: bool = None,
           include_price_instruments: bool = False) -> PfEstimate:
    """GMM over (intercept, output elasticities, rho).

    The profile over rho is minimized on a deterministic global grid with
    exact inner least squares and local refinement; a multistart BFGS pass
    (OLS start of the static log equation plus perturbed copies, gradient
    norm 1e-8 or 500 iterations per start) cross-checks the basin.  Identity
    weighting by default; ``weighting="twostep"`` re-minimizes with the
    optimal weight at the first-pass estimate.

    In the Cobb-Douglas form the quality elasticities are constrained to be
    nonnegative by default: the equilibrium matching schedule makes the
    technology shock an exact linear function of the two log qualities, so
    an observationally equivalent parameterization with beta_x - B*D < 0
    exists, and the sign restriction is what selects the structural root.
    """
    regressors = CES_REGRESSORS if form == "ces" else CD_REGRESSORS
    names = CES_COEF_NAMES if form == "ces" else CD_COEF_NAMES
    if nonnegative_quality is None:
        nonnegative_quality = form == "cd"
    pairs = _lag_pairs(panel, stage1_fit.phi_hat, regressors)
    if len(pairs) < 5 * len(names):
        raise InsufficientPanel(
            f"{len(pairs)} usable year-pairs for {len(names)} parameters")
    system = _MomentSystem(pairs, regressors,
                           include_prices=include_price_instruments)

    slope_lo = 0.0 if nonnegative_quality else -10.0
    n_quality = 2 if form == "cd" else 1
    bounds = ([(-100.0, 100.0)]
              + [(slope_lo, 10.0)] * n_quality
              + [(-10.0, 10.0)] * (len(names) - 2 - n_quality)
              + [(-_RHO_BOUND, _RHO_BOUND)])

    start = _ols_start(pairs, regressors)
    rng = np.random.default_rng(seed)
    starts = [start]
    for _ in range(n_extra_starts):
        jitter = start.copy()
        jitter[:-1] += rng.normal(0.0, 0.1, len(start) - 1)
        jitter[-1] = rng.uniform(-0.9, 0.9)
        starts.append(jitter)
    starts = [np.clip(s, [b[0] for b in bounds], [b[1] for b in bounds])
              for s in starts]

    lo = np.array([b[0] for b in bounds])
    hi = np.array([b[1] for b in bounds])

    rho_anchor = float(start[-1])

    def run(system):
        # Given rho the residual is linear in the other parameters, so the
        # inner problem is an exact (possibly box-constrained) least squares
        # and the profile over rho is one-dimensional.  A deterministic
        # global grid plus local refinement pins the estimate far more
        # sharply than BFGS termination can on a flat valley; the multistart
        # BFGS runs as a cross-check and can only trigger an
        # extra local refinement, never a less deterministic endpoint.
        boxed = nonnegative_quality
        w_half = np.linalg.cholesky(system.weight)

        def inner(rho):
            target = system.y - rho * system.phi_lag
            cols = [np.full(system.n, 1.0 - rho)]
            cols += [system.x_now[:, j] - rho * system.x_lag[:, j]
                     for j in range(system.x_now.shape[1])]
            g = system.z.T @ np.column_stack(cols) / system.n
            q = system.z.T @ target / system.n
            a, rhs = w_half.T @ g, w_half.T @ q
            if boxed:
                coef = lsq_linear(a, rhs, bounds=(lo[:-1], hi[:-1])).x
            else:
                coef, *_ = np.linalg.lstsq(a, rhs, rcond=None)
            r = rhs - a @ coef
            return float(r @ r), coef

        grid = np.linspace(-_RHO_BOUND, _RHO_BOUND, 199)
        values = np.array([inner(r)[0] for r in grid])
        v_min, v_max = values.min(), values.max()
        if v_max < 1e-16:
            # wholly degenerate profile (shock-free data fits at every rho):
            # take the grid point nearest the OLS anchor, replicate-stable
            k = int(np.argmin(np.abs(grid - rho_anchor)))
            val, coef = inner(grid[k])
            return np.concatenate([coef, [grid[k]]]), val, True
        flat_band = values <= v_min + 1e-9 * (v_max - v_min)
        if flat_band.sum() > 1:
            # a flat floor (unidentified persistence): stay on the grid,
            # nearest the anchor among the exact near-ties
            idx = np.flatnonzero(flat_band)
            k = idx[np.argmin(np.abs(grid[idx] - rho_anchor))]
            val, coef = inner(grid[k])
            return np.concatenate([coef, [grid[k]]]), val, True

        def refine(center):
            window = (max(-_RHO_BOUND, center - 0.011),
                      min(_RHO_BOUND, center + 0.011))
            res = minimize_scalar(lambda r: inner(r)[0], bounds=window,
                                  method="bounded",
                                  options={"xatol": 1e-13, "maxiter": 300})
            val, coef = inner(res.x)
            return np.concatenate([coef, [res.x]]), val

        best, best_val = refine(grid[int(np.argmin(values))])
        bfgs_ok = False
        bfgs_best, bfgs_val = None, np.inf
        for s0 in starts:
            res = minimize(system.objective_grad, s0, jac=True,
                           method="L-BFGS-B", bounds=bounds,
                           options={"maxiter": 500, "gtol": 1e-8,
                                    "ftol": 1e-14})
            if res.fun < bfgs_val:
                bfgs_best, bfgs_val, bfgs_ok = res.x, res.fun, res.success
        if bfgs_val < best_val * (1.0 - 1e-9):
            cand, cand_val = refine(float(bfgs_best[-1]))
            if cand_val < best_val:
                best, best_val = cand, cand_val
        return best, best_val, bfgs_ok or np.isfinite(best_val)

    best, best_val, ok = run(system)
    if weighting == "twostep":
        system = _MomentSystem(pairs, regressors,
                               weight=system.optimal_weight(best),
                               include_prices=include_price_instruments)
        best, best_val, ok = run(system)

    sector = panel["sector"].iloc[0] if "sector" in panel.columns else None
    return PfEstimate(sector=sector, coef=dict(zip(names, best)),
                      n_obs=len(pairs), objective=float(best_val),
                      converged=bool(ok), form=form, stage1=stage1_fit,
                      starts=len(starts))


def estimate_production(panel: pd.DataFrame, degree: int = 3,
                        form: str = "ces", weighting: str = "identity",
                        seed: int = 0) -> PfEstimate:
    """Stage 1 + stage 2 on a single-sector panel."""
    fit1 = stage1(panel, degree=degree, form=form)
    return stage2(panel, fit1, form=form, weighting=weighting, seed=seed)


def bootstrap_se(panel: pd.DataFrame, b: int = 200, degree: int = 3,
                 form: str = "ces", weighting: str = "identity",
                 seed: int = 0, min_success: float = 0.8) -> dict:
    """Firm-block bootstrap of both stages; SE = sd across replicates.

    Firms are resampled with replacement (each keeps its whole year path,
    preserving the AR(1) structure), both stages rerun per replicate, and
    replicate seeds split deterministically.  Fails unless at least
    ``min_success`` of replicates estimate successfully.
    """
    if b < 2:
        raise NoConvergence("bootstrap needs at least 2 replicates")
    names = CES_COEF_NAMES if form == "ces" else CD_COEF_NAMES
    firms = np.unique(panel["firm_id"].to_numpy())
    groups = {fid: grp for fid, grp in panel.groupby("firm_id")}
    draws = []
    for rep in range(b):
        rng = np.random.default_rng(
            np.random.SeedSequence(seed, spawn_key=(81, rep)))
        sampled = rng.choice(firms, size=len(firms), replace=True)
        frames = []
        for k, fid in enumerate(sampled):
            g = groups[fid].copy()
            g["firm_id"] = k  # clones become distinct firms
            frames.append(g)
        boot = pd.concat(frames, ignore_index=True)
        try:
            est = estimate_production(boot, degree=degree, form=form,
                                      weighting=weighting, seed=seed + rep + 1)
            draws.append(est.coef_vector)
        except Exception:
            continue
    if len(draws) < min_success * b:
        raise NoConvergence(
            f"only {len(draws)}/{b} bootstrap replicates succeeded")
    spread = np.std(np.vstack(draws), axis=0, ddof=1)
    return dict(zip(names, spread))


def recover_tfp(panel: pd.DataFrame, stage1_fit: Stage1Fit,
                estimate: PfEstimate) -> pd.DataFrame:
    """Recovered log technology: phi minus the estimated input contribution."""
    if not estimate.coef:
        raise MissingCoefficients("estimate carries no coefficients")
    regressors = CES_REGRESSORS if estimate.form == "ces" else CD_REGRESSORS
    df = panel.merge(stage1_fit.phi_hat, on=["firm_id", "year"], how="inner")
    contribution = estimate.coef["beta_0"] + sum(
        estimate.coef[name] * df[col]
        for name, col in zip(
            (CES_COEF_NAMES if estimate.form == "ces" else CD_COEF_NAMES)[1:-1],
            regressors))
    out = pd.DataFrame({"firm_id": df["firm_id"], "year": df["year"],
                        "omega_hat": df["phi_hat"] - contribution})
    return out.sort_values(["firm_id", "year"], ignore_index=True)


def estimate_cd(panel: pd.DataFrame, degree: int = 3,
                weighting: str = "identity", seed: int = 0) -> PfEstimate:
    """Cobb-Douglas variant: both worker qualities enter the regressor set.

    Same architecture; the instrument list carries the first lags of phi,
    intermediates, both qualities and employment, plus current capital.
    """
    return estimate_production(panel, degree=degree, form="cd",
                               weighting=weighting, seed=seed)
