"""Command-line pipeline: simulate -> screen -> akm -> quality -> paretofit
-> estimate-pf -> matcheff -> decompose, plus the Monte Carlo harness.

Every run writes a manifest with the fully resolved configuration; rerunning
any stage with the same manifest and seed reproduces its artifacts byte for
byte.  All artifacts are comma-separated UTF-8 tables with a header row.
"""

import argparse
import os
import sys

import numpy as np
import pandas as pd

from . import akm as akm_mod
from .aggdecomp import (
    dispersion_stats,
    four_term,
    growth_rates,
    measured_productivity,
    olley_pakes,
)
from .config import build_sim_config, parse_config, resolve_config
from .covariates import COVARIATE_NAMES, age_sex_design
from .errors import MissingInput, ModelError
from .matcheff import estimate_match_efficiency, general_slope_check
from .montecarlo import run_recovery
from .paretotail import rank_regression
from .prodfn import bootstrap_se, prepare_panel, recover_tfp, stage1, stage2
from .simulate import simulate_firm_panel, simulate_worker_panel
from .tables import (
    FIRM_FILE_COLUMNS,
    MATCH_FILE_COLUMNS,
    read_table,
    write_manifest,
    write_table,
)


def _path(out, name):
    return os.path.join(out, name)


def _coef_names(form):
    from .prodfn import CD_COEF_NAMES, CES_COEF_NAMES
    return CES_COEF_NAMES if form == "ces" else CD_COEF_NAMES


def _sector_filter(df, sectors):
    if sectors is None or "sector" not in df.columns:
        return df
    return df[df["sector"].isin(sectors)].reset_index(drop=True)


def stage_simulate(resolved, out):
    cfg = build_sim_config(resolved)
    firms = simulate_firm_panel(cfg)
    matches = simulate_worker_panel(firms, cfg)
    write_table(firms, _path(out, "firms.csv"), FIRM_FILE_COLUMNS)
    write_table(matches, _path(out, "matches.csv"), MATCH_FILE_COLUMNS)


def stage_screen(resolved, out):
    matches = read_table(_path(out, "matches.csv"))
    screen = akm_mod.ScreenConfig(
        earnings_floor=float(resolved.get("screen.earnings_floor", 0.0)))
    kept, report = akm_mod.apply_sample_screens(matches, screen)
    write_table(kept, _path(out, "matches_screened.csv"))
    rep = pd.DataFrame(sorted(report.items()), columns=["metric", "count"])
    write_table(rep, _path(out, "screen_report.csv"))


def stage_akm(resolved, out):
    matches = read_table(_path(out, "matches_screened.csv"))
    connected, stats = akm_mod.largest_connected_set(matches)
    write_table(connected, _path(out, "matches_connected.csv"))
    est = akm_mod.estimate_akm(connected)
    write_table(est.alpha.rename("alpha").reset_index(),
                _path(out, "akm_worker_effects.csv"))
    write_table(est.psi.rename("psi").reset_index(),
                _path(out, "akm_firm_effects.csv"))
    rows = [("intercept", est.intercept)]
    rows += list(zip(COVARIATE_NAMES, est.beta))
    rows += [(f"year_bin_{k}", v) for k, v in est.year_effects.items()]
    rows += [("r_squared", est.r_squared), ("adj_r_squared", est.adj_r_squared),
             ("base_year", est.base_year), ("n_params", est.n_params),
             ("n_components", stats["n_components"]),
             ("share_kept", stats["share_kept"])]
    write_table(pd.DataFrame(rows, columns=["name", "value"]),
                _path(out, "akm_coefficients.csv"))
    write_table(akm_mod.variance_decomposition(est, connected),
                _path(out, "akm_variance_decomposition.csv"))


def _load_akm(out):
    coefs = read_table(_path(out, "akm_coefficients.csv"))
    table = dict(zip(coefs["name"], coefs["value"]))
    alpha = read_table(_path(out, "akm_worker_effects.csv"))
    beta = np.array([table[name] for name in COVARIATE_NAMES])
    return alpha.set_index("worker_id")["alpha"], beta


def stage_quality(resolved, out):
    matches = read_table(_path(out, "matches_connected.csv"))
    alpha, beta = _load_akm(out)
    h = alpha.loc[matches["worker_id"].to_numpy()].to_numpy() \
        + age_sex_design(matches["age"], matches["sex"]) @ beta
    flags = akm_mod.identify_top_workers(matches)
    quality, dropped = akm_mod.firm_quality(matches, h, flags)
    write_table(quality, _path(out, "firm_quality.csv"))
    write_table(pd.DataFrame([("firm_years_without_nontop", dropped)],
                             columns=["metric", "count"]),
                _path(out, "quality_report.csv"))


def _quality_source(resolved, out):
    if resolved.get("pf.use_truth"):
        firms = read_table(_path(out, "firms.csv"))
        q = firms[["firm_id", "year"]].copy()
        q["ln_y"] = np.log(firms["y"])
        q["ln_x"] = np.log(firms["x"])
        return q
    return read_table(_path(out, "firm_quality.csv"))


def stage_paretofit(resolved, out, input_path=None):
    threshold = resolved.get("pareto.threshold")
    threshold = -np.inf if threshold is None else float(threshold)
    rows = []
    if input_path:
        values = read_table(input_path).iloc[:, 0].to_numpy(dtype=float)
        fits = [("input", rank_regression(values, threshold=threshold))]
    else:
        quality = _quality_source(resolved, out)
        fits = [
            ("top_quality", rank_regression(np.exp(quality["ln_y"]),
                                            threshold=threshold)),
            ("nontop_quality", rank_regression(np.exp(quality["ln_x"]),
                                               threshold=threshold)),
        ]
    for name, fit in fits:
        rows.append({"series": name, "lambda_hat": fit.lambda_hat,
                     "standard_error": fit.standard_error,
                     "r_squared": fit.r_squared, "threshold": fit.threshold,
                     "n_used": fit.n_used})
        print(f"{name}: lambda_hat={fit.lambda_hat:.4f} "
              f"se={fit.standard_error:.4f} r2={fit.r_squared:.4f} "
              f"n={fit.n_used}")
    write_table(pd.DataFrame(rows), _path(out, "tail_fits.csv"))


def stage_estimate_pf(resolved, out, sectors=None):
    firms = _sector_filter(read_table(_path(out, "firms.csv")), sectors)
    quality = None if resolved.get("pf.use_truth") \
        else read_table(_path(out, "firm_quality.csv"))
    form = resolved.get("pf.form", "ces")
    degree = int(resolved.get("pf.degree", 3))
    weighting = resolved.get("pf.weighting", "identity")
    n_boot = int(resolved.get("pf.bootstrap", 0))
    seed = int(resolved["sim.seed"])
    names = _coef_names(form)

    coef_rows, tfp_frames = [], []
    for sector, grp in firms.groupby("sector"):
        panel = prepare_panel(grp, quality)
        fit = stage1(panel, degree=degree, form=form)
        est = stage2(panel, fit, form=form, weighting=weighting, seed=seed)
        ses = {name: np.nan for name in names}
        if n_boot > 0:
            ses = bootstrap_se(panel, b=n_boot, degree=degree, form=form,
                               weighting=weighting, seed=seed)
        row = {"sector": sector, "n_obs": est.n_obs,
               "objective": est.objective, "converged": est.converged,
               "stage1_r_squared": fit.r_squared}
        for name in names:
            row[name] = est.coef[name]
            row[f"se_{name}"] = ses[name]
        coef_rows.append(row)
        tfp_frames.append(recover_tfp(panel, fit, est))
    write_table(pd.DataFrame(coef_rows), _path(out, "pf_coefficients.csv"))
    tfp = pd.concat(tfp_frames, ignore_index=True)
    write_table(tfp.sort_values(["firm_id", "year"], ignore_index=True),
                _path(out, "tfp.csv"))


def stage_matcheff(resolved, out, sectors=None):
    firms = _sector_filter(read_table(_path(out, "firms.csv")), sectors)
    quality = _quality_source(resolved, out).merge(
        firms[["firm_id", "year", "sector"]], on=["firm_id", "year"])
    rows, series = [], []
    for sector, grp in quality.groupby("sector"):
        est = estimate_match_efficiency(grp, sector=sector)
        rows.append({"sector": sector, "b0_hat": est.b0_hat,
                     "rho_x_hat": est.rho_x_hat,
                     "b1_hat": general_slope_check(grp),
                     "n_obs": est.n_obs, "stationary": est.stationary})
        series.append(est.omega_x)
    write_table(pd.DataFrame(rows), _path(out, "matcheff_coefficients.csv"))
    omega_x = pd.concat(series, ignore_index=True)
    write_table(omega_x.sort_values(["firm_id", "year"], ignore_index=True),
                _path(out, "omega_x.csv"))


def stage_decompose(resolved, out, sectors=None):
    firms = _sector_filter(read_table(_path(out, "firms.csv")), sectors)
    tfp = read_table(_path(out, "tfp.csv"))
    quality = _quality_source(resolved, out)
    pf = read_table(_path(out, "pf_coefficients.csv"))
    theta_col = "theta" if "theta" in pf.columns else "beta_y"
    theta = dict(zip(pf["sector"], pf[theta_col]))

    df = firms[["firm_id", "sector", "year", "value_added"]] \
        .merge(tfp, on=["firm_id", "year"]) \
        .merge(quality[["firm_id", "year", "ln_y"]], on=["firm_id", "year"])
    df["share"] = df["value_added"] / df.groupby("year")["value_added"] \
        .transform("sum")
    prod = measured_productivity(df, theta, variant="top")
    prod["share"] = df["share"].to_numpy()
    write_table(prod, _path(out, "measured_productivity.csv"))

    op = olley_pakes(prod["z"], prod["share"], prod["year"])
    write_table(op, _path(out, "olley_pakes.csv"))
    ft = four_term(prod["omega_comp"], prod["quality_comp"], prod["share"],
                   prod["year"])
    write_table(ft, _path(out, "four_term.csv"))

    z_agg = op.set_index("year")["aggregate"]
    om_agg = (ft["omega_mean"] + ft["omega_cov"]).set_axis(ft["year"])
    qu_agg = (ft["quality_mean"] + ft["quality_cov"]).set_axis(ft["year"])
    years = z_agg.index.to_numpy()
    first, last = int(years.min()), int(years.max())
    mid = 2008 if first < 2008 < last else int(years[len(years) // 2])
    windows = [(first, last), (first, mid), (mid, last)]
    gr_rows = []
    for name, series in (("measured", z_agg), ("technology", om_agg),
                         ("top_quality", qu_agg)):
        g = growth_rates(series, windows)
        g.insert(0, "series", name)
        gr_rows.append(g)
    write_table(pd.concat(gr_rows, ignore_index=True),
                _path(out, "growth_rates.csv"))

    disp = dispersion_stats(prod["z"], prod["year"],
                            omega=prod["omega_comp"],
                            quality=prod["quality_comp"], min_firms=2)
    write_table(disp, _path(out, "dispersion.csv"))

    # plot-ready long series; normalized-to-zero first year is presentation
    # only
    long_rows = []
    for name, series in (("measured", z_agg), ("technology", om_agg),
                         ("top_quality", qu_agg)):
        for year, value in series.items():
            long_rows.append((year, name, value))
            long_rows.append((year, name + "_index",
                              value - series.loc[first]))
    write_table(pd.DataFrame(long_rows,
                             columns=["year", "series_name", "value"]),
                _path(out, "aggregate_series.csv"))


def stage_montecarlo(resolved, out):
    cfg = build_sim_config(resolved)
    import dataclasses
    cfg = dataclasses.replace(
        cfg, n_firms=int(resolved.get("mc.n_firms", cfg.n_firms)),
        years=int(resolved.get("mc.years", cfg.years)))
    summary = run_recovery(cfg, reps=int(resolved.get("mc.reps", 20)),
                           degree=int(resolved.get("pf.degree", 3)),
                           weighting=resolved.get("pf.weighting", "identity"))
    write_table(summary, _path(out, "montecarlo_summary.csv"))
    print(summary.to_string(index=False))


PIPELINE = ("simulate", "screen", "akm", "quality", "paretofit",
            "estimate-pf", "matcheff", "decompose")


def run_stage(name, resolved, out, sectors=None, input_path=None):
    os.makedirs(out, exist_ok=True)
    if name == "simulate":
        stage_simulate(resolved, out)
    elif name == "screen":
        stage_screen(resolved, out)
    elif name == "akm":
        stage_akm(resolved, out)
    elif name == "quality":
        stage_quality(resolved, out)
    elif name == "paretofit":
        stage_paretofit(resolved, out, input_path)
    elif name == "estimate-pf":
        stage_estimate_pf(resolved, out, sectors)
    elif name == "matcheff":
        stage_matcheff(resolved, out, sectors)
    elif name == "decompose":
        stage_decompose(resolved, out, sectors)
    elif name == "montecarlo":
        stage_montecarlo(resolved, out)
    elif name == "pipeline":
        write_manifest(_path(out, "manifest.txt"), resolved)
        for stage in PIPELINE:
            run_stage(stage, resolved, out, sectors)
        return
    else:
        raise ModelError(f"unknown stage {name}")
    if name != "pipeline":
        write_manifest(_path(out, "manifest.txt"), resolved)


def build_parser():
    parser = argparse.ArgumentParser(
        prog="matchprod",
        description="Matched-team production model: simulation and "
                    "estimation pipeline")
    sub = parser.add_subparsers(dest="command", required=True)
    commands = PIPELINE + ("montecarlo", "pipeline")
    for name in commands:
        p = sub.add_parser(name)
        p.add_argument("--config", help="flat key=value config file")
        p.add_argument("--seed", type=int, help="overrides sim.seed")
        p.add_argument("--out", default="out", help="artifact directory")
        p.add_argument("--sectors",
                       help="comma-separated sector ids to estimate")
        p.add_argument("--bootstrap", type=int, help="bootstrap replicates")
        p.add_argument("--degree", type=int, help="stage-1 polynomial degree")
        p.add_argument("--threshold", type=float,
                       help="log-value cutoff for the tail fit")
        p.add_argument("--reps", type=int, help="Monte Carlo replicates")
        p.add_argument("--form", choices=("ces", "cd"),
                       help="production form for estimate-pf")
        p.add_argument("--use-truth", action="store_true",
                       help="estimate on the generator's truth columns")
        if name == "paretofit":
            p.add_argument("--input", help="one-column value file")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    file_values = parse_config(args.config) if args.config else {}
    overrides = {}
    if args.seed is not None:
        overrides["sim.seed"] = args.seed
    if args.bootstrap is not None:
        overrides["pf.bootstrap"] = args.bootstrap
    if args.degree is not None:
        overrides["pf.degree"] = args.degree
    if args.threshold is not None:
        overrides["pareto.threshold"] = args.threshold
    if args.reps is not None:
        overrides["mc.reps"] = args.reps
    if args.form is not None:
        overrides["pf.form"] = args.form
    if args.use_truth:
        overrides["pf.use_truth"] = True
    resolved = resolve_config(file_values, overrides)
    sectors = None
    if args.sectors:
        sectors = [int(s) for s in args.sectors.split(",")]
    try:
        run_stage(args.command, resolved, args.out, sectors,
                  getattr(args, "input", None))
    except MissingInput as exc:
        print(f"error[{args.command}]: {exc}", file=sys.stderr)
        return 2
    except ModelError as exc:
        print(f"error[{args.command}]: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
