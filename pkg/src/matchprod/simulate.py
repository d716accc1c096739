"""Synthetic firm panels and matched employer-employee records.

Firms draw a base non-top worker type (their mean type then churns slowly
around it) and receive AR(1) paths for log technology and log match
efficiency; top type, worker count, output, capital and the
intermediate-input proxy then follow the model's closed forms.  The
worker panel attaches an actual roster to every firm-year:
one top worker whose latent quality equals ln y exactly (the top slot
turns over yearly), and non-top workers drawn around ln x who persist and
move between firms, which keeps the worker-firm graph connected.

Randomness is split hierarchically with SeedSequence spawn keys
(sector, firm, purpose), so firm-level draws are invariant to adding
firms.  Mobility destinations necessarily depend on the whole firm set.
"""

import math
from dataclasses import dataclass, field

import numpy as np
import pandas as pd

from .covariates import age_sex_effect
from .errors import ConfigError, InvalidParam
from .model import cobb_douglas_constants, equilibrium_constants
from .params import ModelParams

# stream purpose codes; the purpose leads the spawn key so that sector,
# firm and year indices can never collide across stream families
_P_FIRM = 0
_P_PRICES = 1
_P_ROSTER = 2
_P_POOL = 3
_P_OWNER = 4
_P_NOISE = 5


def _rng(seed, purpose, *key):
    return np.random.default_rng(
        np.random.SeedSequence(int(seed),
                               spawn_key=(int(purpose),) + tuple(int(k) for k in key)))


@dataclass
class SimConfig:
    """Configuration of one synthetic economy."""

    n_firms: int = 300                  # per sector
    n_sectors: int = 1
    years: int = 13
    start_year: int = 2003
    params: object = field(default_factory=ModelParams)  # one per sector, or shared
    production: str = "ces"             # "ces" or "cd"
    mobility_rate: float = 0.10
    workers_per_firm_scale: float = 1.0
    # sector-level AR(1) log price processes
    price_rho: float = 0.8
    price_sigma: float = 0.05
    # intermediate input demand ln m = c0 + c1 w + c_cubic w^3 + c2 ln l + c3 ln k
    #                                 + c4 ln(p_g/p_m), strictly increasing in w
    c0: float = 0.0
    c1: float = 1.0
    c2: float = 0.5
    c3: float = 0.3
    c4: float = -0.5
    m_cubic: float = 0.0
    # predetermined capital: ln k AR(1) loaded on lagged technology
    capital_rho: float = 0.75
    capital_omega_loading: float = 0.3
    capital_sigma: float = 0.15
    capital_log_mean: float = 2.0
    # worker panel
    nontop_quality_sd: float = 0.25
    earnings_noise_sd: float = 0.25
    earnings_design_r2: float = None    # overrides earnings_noise_sd when set
    firm_effect_sd: float = 0.20
    owner_rate: float = 0.02
    female_share: float = 0.49
    # movers sort to firms of similar type; this fraction relocates uniformly
    # at random instead, keeping long-range links in the worker-firm graph
    mobility_mix_uniform: float = 0.25
    # slow AR(1) wiggle of the firm's mean non-top type around its Pareto
    # base draw (roster composition churn); also what separately identifies
    # the two quality elasticities in the Cobb-Douglas estimation
    x_drift_rho: float = 0.8
    x_drift_sigma: float = 0.05
    # deterministic per-year drifts for trend scenarios
    omega_drift: float = 0.0
    omega_x_drift: float = 0.0
    x_trend: float = 0.0
    truncate_quantile: float = 1.0 - 1e-6
    seed: int = 12345

    def __post_init__(self):
        if isinstance(self.params, ModelParams):
            object.__setattr__(self, "params", (self.params,) * self.n_sectors)
        else:
            self.params = tuple(self.params)
        checks = [
            (self.n_firms >= 1, "n_firms must be >= 1"),
            (self.n_sectors >= 1, "n_sectors must be >= 1"),
            (len(self.params) == self.n_sectors,
             "need one ModelParams per sector"),
            (self.years >= 3, "years must be >= 3 (lagged moments need depth)"),
            (0.0 < self.mobility_rate <= 1.0,
             "mobility_rate must lie in (0, 1]"),
            (self.c1 > 0.0, "c1 must be > 0 (proxy invertibility)"),
            (self.m_cubic >= 0.0, "m_cubic must be >= 0"),
            (self.workers_per_firm_scale > 0.0, "scale must be > 0"),
            (self.production in ("ces", "cd"), "production must be ces or cd"),
            (0.0 <= self.mobility_mix_uniform <= 1.0,
             "mobility_mix_uniform must lie in [0, 1]"),
            (self.x_drift_sigma >= 0.0 and abs(self.x_drift_rho) < 1.0,
             "x drift needs sigma >= 0 and |rho| < 1"),
            (0.0 < self.truncate_quantile < 1.0, "truncate_quantile in (0,1)"),
            (self.seed >= 0, "seed must be a nonnegative integer"),
        ]
        for ok, msg in checks:
            if not ok:
                raise ConfigError(msg)


def draw_pareto(lam: float, minimum: float, n: int, stream,
                truncate_quantile: float = 1.0 - 1e-6) -> np.ndarray:
    """Inverse-CDF Pareto draws minimum * U^(-1/lam), upper-truncated.

    The truncation (default at the 1-1e-6 quantile) keeps sample moments
    finite for tail exponents <= 2.  Deterministic given the stream.
    """
    if lam <= 0 or minimum <= 0:
        raise InvalidParam("lam and minimum must be > 0")
    u = stream.uniform(low=1.0 - truncate_quantile, high=1.0, size=n)
    return minimum * u ** (-1.0 / lam)


def _ar1_path(stream, rho, sd, n, drift=0.0):
    """Stationary-start AR(1) plus an optional deterministic per-period drift."""
    shocks = stream.standard_normal(n)
    path = np.empty(n)
    stat_sd = sd / math.sqrt(1.0 - rho * rho) if sd > 0 else 0.0
    path[0] = stat_sd * shocks[0]
    for t in range(1, n):
        path[t] = rho * path[t - 1] + sd * shocks[t]
    return path + drift * np.arange(n)


def simulate_firm_panel(config: SimConfig) -> pd.DataFrame:
    """Generate the firm-year table from the matching equilibrium.

    Columns: firm_id, sector, year, value_added, capital, labor_count,
    materials, p_g, p_m, share, eps, omega, omega_x, x, y.  Within each
    year the value-added shares sum to one.
    """
    years = np.arange(config.start_year, config.start_year + config.years)
    t_idx = np.arange(config.years)
    frames = []
    for s in range(config.n_sectors):
        p = config.params[s]
        if config.production == "ces":
            consts = equilibrium_constants(p)
        else:
            consts = cobb_douglas_constants(p, eta=0.0)  # validates sorting
            d_cd = (1.0 - p.alpha_l) * p.lambda_y - p.beta_y_cd

        pr = _rng(config.seed, _P_PRICES, s)
        ln_pg = _ar1_path(pr, config.price_rho, config.price_sigma, config.years)
        ln_pm = _ar1_path(pr, config.price_rho, config.price_sigma, config.years)

        for j in range(config.n_firms):
            r = _rng(config.seed, _P_FIRM, s, j)
            x = draw_pareto(p.lambda_x, p.x_min, 1, r,
                            config.truncate_quantile)[0]
            omega = _ar1_path(r, p.rho, p.sigma_xi, config.years,
                              drift=config.omega_drift)
            omega_x = _ar1_path(r, p.rho_x, p.sigma_u_x, config.years,
                                drift=config.omega_x_drift)
            k_shocks = r.standard_normal(config.years)
            eps = p.sigma_eps * r.standard_normal(config.years)

            ln_k = np.empty(config.years)
            stat = (config.capital_sigma
                    / math.sqrt(1.0 - config.capital_rho ** 2))
            ln_k[0] = config.capital_log_mean + stat * k_shocks[0]
            for t in range(1, config.years):
                ln_k[t] = ((1.0 - config.capital_rho) * config.capital_log_mean
                           + config.capital_rho * ln_k[t - 1]
                           + config.capital_omega_loading * omega[t - 1]
                           + config.capital_sigma * k_shocks[t])

            ln_x = (math.log(x) + config.x_trend * t_idx
                    + _ar1_path(r, config.x_drift_rho,
                                config.x_drift_sigma, config.years))
            if config.production == "ces":
                ln_y = consts.b0 + omega_x + ln_x
                ln_l_cont = (p.lambda_y * (math.log(consts.slope) + omega_x)
                             + math.log(consts.density_ratio)
                             + (p.lambda_y - p.lambda_x) * ln_x
                             + math.log(config.workers_per_firm_scale))
                tech = omega
            else:
                # matching holds up to the persistent efficiency deviation
                # omega_x; without it the technology shock would be an exact
                # linear function of (ln x, ln y) and the quality
                # elasticities would be unidentified
                eta = omega
                ln_a = ((1.0 - p.alpha_l) / d_cd
                        * math.log(consts.exponent / consts.density_ratio)
                        + (math.log(p.alpha_l) + eta) / d_cd)
                ln_y = ln_a + consts.exponent * ln_x + omega_x
                ln_l_cont = ((math.log(p.alpha_l) + eta
                              + (p.beta_x_cd - p.beta_x_cd / p.alpha_l) * ln_x
                              + p.beta_y_cd * ln_y) / (1.0 - p.alpha_l)
                             + math.log(config.workers_per_firm_scale))
                tech = eta

            l = np.maximum(2, np.ceil(np.exp(ln_l_cont))).astype(int)
            ln_l = np.log(l)
            if config.production == "ces":
                ln_f = (p.beta_0 + p.theta * ln_y + p.alpha_l * ln_l
                        + p.alpha_k * ln_k + tech + eps)
            else:
                ln_f = (p.beta_0 + p.beta_x_cd * ln_x + p.beta_y_cd * ln_y
                        + p.alpha_l * ln_l + p.alpha_k * ln_k + tech + eps)
            ln_m = (config.c0 + config.c1 * tech + config.m_cubic * tech ** 3
                    + config.c2 * ln_l + config.c3 * ln_k
                    + config.c4 * (ln_pg - ln_pm))

            frames.append(pd.DataFrame({
                "firm_id": s * 10 ** 6 + j,
                "sector": s,
                "year": years,
                "value_added": np.exp(ln_f),
                "capital": np.exp(ln_k),
                "labor_count": l,
                "materials": np.exp(ln_m),
                "p_g": np.exp(ln_pg),
                "p_m": np.exp(ln_pm),
                "eps": eps,
                "omega": tech,
                "omega_x": omega_x,
                "x": np.exp(ln_x),
                "y": np.exp(ln_y),
                "t_idx": t_idx,
            }))
    panel = pd.concat(frames, ignore_index=True).drop(columns="t_idx")
    totals = panel.groupby("year")["value_added"].transform("sum")
    panel["share"] = panel["value_added"] / totals
    return panel.sort_values(["sector", "firm_id", "year"], ignore_index=True)


class _Worker:
    __slots__ = ("wid", "alpha", "age", "male")

    def __init__(self, wid, alpha, age, male):
        self.wid = wid
        self.alpha = alpha
        self.age = age
        self.male = male


def _new_workers(firm_id, counter, n, target_ln_x, stream, config,
                 age_range, demean):
    ages = stream.integers(age_range[0], age_range[1] + 1, size=n)
    male = stream.random(n) >= config.female_share
    sd = config.nontop_quality_sd
    delta = np.clip(stream.normal(0.0, sd, size=n) if sd > 0 else np.zeros(n),
                    -2.5 * sd, 2.5 * sd)
    if demean and n > 0:
        delta -= delta.mean()
    quality = target_ln_x + delta
    alphas = quality - age_sex_effect(ages, male)
    workers = []
    for i in range(n):
        workers.append(_Worker(firm_id * 10 ** 7 + counter + i,
                               float(alphas[i]), int(ages[i]), bool(male[i])))
    return workers, counter + n


def simulate_worker_panel(firm_panel: pd.DataFrame,
                          config: SimConfig) -> pd.DataFrame:
    """Attach a matched worker roster to every firm-year.

    Every firm-year gets one fresh top worker whose latent quality
    (person effect plus age-sex effect) equals ln y exactly, and
    labor_count - 1 persistent non-top workers centered on ln x (exact at
    roster assembly, approximate under churn).  Earnings follow the
    additive log decomposition: sector wage level + person effect +
    age-sex profile + firm effect + iid noise.
    """
    need = {"firm_id", "sector", "year", "labor_count", "x", "y"}
    if not need.issubset(firm_panel.columns):
        raise ConfigError("firm panel must carry the truth columns x and y")

    wage_level = {}
    for s in range(config.n_sectors):
        if config.production == "ces":
            wage_level[s] = math.log(
                equilibrium_constants(config.params[s]).wage_level)
        else:
            wage_level[s] = 0.0

    panel = firm_panel.sort_values(["year", "firm_id"])
    years = sorted(panel["year"].unique())
    by_year = {yr: grp for yr, grp in panel.groupby("year")}

    roster = {}        # firm_id -> list of _Worker
    counters = {}      # firm_id -> next worker slot
    streams = {}       # firm_id -> roster stream
    psi = {}           # firm_id -> firm wage effect
    sector_of = {}
    ln_x_of = {}

    rows = {k: [] for k in ("worker_id", "firm_id", "year", "age", "sex",
                            "alpha_i", "is_top", "sector")}

    def emit(w, firm_id, year, sector, is_top):
        rows["worker_id"].append(w.wid)
        rows["firm_id"].append(firm_id)
        rows["year"].append(year)
        rows["age"].append(w.age)
        rows["sex"].append(int(w.male))
        rows["alpha_i"].append(w.alpha)
        rows["is_top"].append(int(is_top))
        rows["sector"].append(sector)

    for year in years:
        grp = by_year[year]
        firm_ids = grp["firm_id"].to_numpy()
        targets = (grp["labor_count"].to_numpy() - 1).astype(int)
        ln_y = np.log(grp["y"].to_numpy())
        ln_x = np.log(grp["x"].to_numpy())
        sectors = grp["sector"].to_numpy()

        pool = []
        if year == years[0]:
            for fid, n_non, lx, sec in zip(firm_ids, targets, ln_x, sectors):
                st = _rng(config.seed, _P_ROSTER, int(fid))
                streams[fid] = st
                psi[fid] = (st.normal(0.0, config.firm_effect_sd)
                            if config.firm_effect_sd > 0 else 0.0)
                sector_of[fid] = int(sec)
                ln_x_of[fid] = lx
                roster[fid], counters[fid] = _new_workers(
                    fid, 0, n_non, lx, st, config, (25, 55), demean=True)
        else:
            # age everyone, then draw mobility, then rebalance rosters
            for fid in firm_ids:
                for w in roster[fid]:
                    w.age += 1
            stays = {}
            for fid, n_non in zip(firm_ids, targets):
                st = streams[fid]
                move = st.random(len(roster[fid])) < config.mobility_rate
                staying = [w for w, mv in zip(roster[fid], move) if not mv]
                pool.extend(w for w, mv in zip(roster[fid], move) if mv)
                if len(staying) > n_non:
                    pool.extend(staying[n_non:])
                    staying = staying[:n_non]
                stays[fid] = staying
            yr_rng = _rng(config.seed, _P_POOL, int(year))
            yr_rng.shuffle(pool)
            target_of = dict(zip(firm_ids, targets))
            # open slots ordered by destination type, for assortative moves
            by_type = sorted(zip(ln_x, firm_ids))
            slots = [fid for lx, fid in by_type
                     for _ in range(target_of[fid] - len(stays[fid]))]
            if pool and slots:
                n_uniform = min(int(round(config.mobility_mix_uniform
                                          * len(pool))), len(slots))
                for w in pool[:n_uniform]:
                    k = int(yr_rng.integers(len(slots)))
                    stays[slots.pop(k)].append(w)
                rest = pool[n_uniform:]
                if len(rest) > len(slots):
                    rest = rest[:len(slots)]  # the others exit the panel
                rest.sort(key=lambda w: w.alpha + age_sex_effect(w.age, w.male))
                for w, fid in zip(rest, slots):
                    stays[fid].append(w)
            for fid, lx in zip(firm_ids, ln_x):
                ln_x_of[fid] = lx
                short = target_of[fid] - len(stays[fid])
                if short > 0:
                    hires, counters[fid] = _new_workers(
                        fid, counters[fid], short, lx,
                        streams[fid], config, (22, 50), demean=False)
                    stays[fid].extend(hires)
                roster[fid] = stays[fid]

        for fid, yr_lny in zip(firm_ids, ln_y):
            st = streams[fid]
            age = int(st.integers(35, 56))
            male = bool(st.random() >= config.female_share)
            top = _Worker(fid * 10 ** 7 + counters[fid],
                          float(yr_lny - age_sex_effect(age, male)), age, male)
            counters[fid] += 1
            emit(top, fid, year, sector_of[fid], True)
            for w in roster[fid]:
                emit(w, fid, year, sector_of[fid], False)

    out = pd.DataFrame(rows)
    systematic = (np.array([wage_level[s] for s in out["sector"]])
                  + out["alpha_i"].to_numpy()
                  + age_sex_effect(out["age"], out["sex"])
                  + np.array([psi[f] for f in out["firm_id"]]))
    if config.earnings_design_r2 is not None:
        r2 = config.earnings_design_r2
        if not 0.0 < r2 < 1.0:
            raise ConfigError("earnings_design_r2 must lie in (0, 1)")
        noise_sd = math.sqrt(systematic.var() * (1.0 - r2) / r2)
    else:
        noise_sd = config.earnings_noise_sd
    noise_rng = _rng(config.seed, _P_NOISE)
    noise = (noise_rng.normal(0.0, noise_sd, len(out)) if noise_sd > 0
             else np.zeros(len(out)))
    out["earnings"] = np.exp(systematic + noise)
    owner_rng = _rng(config.seed, _P_OWNER)
    out["owner_flag"] = (owner_rng.random(len(out)) < config.owner_rate).astype(int)
    return out.sort_values(["firm_id", "year", "worker_id"],
                           ignore_index=True)
