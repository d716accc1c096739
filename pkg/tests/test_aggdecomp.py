import numpy as np
import pandas as pd
import pytest

from matchprod import ModelParams
from matchprod.aggdecomp import (
    aggregate,
    cd_measured_productivity,
    dispersion_stats,
    four_term,
    growth_rates,
    measured_productivity,
    olley_pakes,
)
from matchprod.errors import (
    KeyMismatch,
    SharesNotNormalized,
    TooFewFirms,
    WindowOutOfRange,
)
from matchprod.prodfn import PfEstimate, prepare_panel, recover_tfp, stage1
from matchprod.simulate import SimConfig, simulate_firm_panel

PARAMS = ModelParams(theta=0.417, alpha_l=0.777, alpha_k=0.079, lambda_x=2.06,
                     lambda_y=1.80, sigma=5.0, rho=0.702)
TRUTH = dict(beta_0=1.0, theta=0.417, alpha_l=0.777, alpha_k=0.079, rho=0.702)


def sim_panel(**kw):
    defaults = dict(n_firms=120, years=8, params=PARAMS, seed=19,
                    workers_per_firm_scale=2.0)
    defaults.update(kw)
    return simulate_firm_panel(SimConfig(**defaults))


def quality_frame(n=50, theta=0.4, b0=0.6, seed=1):
    rng = np.random.default_rng(seed)
    ln_x = rng.normal(size=n)
    omega_x = rng.normal(0, 0.2, size=n)
    return pd.DataFrame({
        "firm_id": np.arange(n), "year": 2003, "sector": 0,
        "omega_hat": rng.normal(size=n),
        "ln_x": ln_x, "omega_x_hat": omega_x,
        "ln_y": b0 + omega_x + ln_x,
    })


class TestMeasuredProductivity:
    def test_zero_theta_reduces_to_technology(self):
        df = quality_frame()
        out = measured_productivity(df, theta=0.0)
        np.testing.assert_array_equal(out["z"], df["omega_hat"])

    def test_variants_differ_by_sector_constant(self):
        df = quality_frame(theta=0.4, b0=0.6)
        top = measured_productivity(df, theta=0.4, variant="top")
        non = measured_productivity(df, theta=0.4, variant="nontop")
        diff = top["z"] - non["z"]
        assert np.max(diff) - np.min(diff) < 1e-10
        assert diff.iloc[0] == pytest.approx(0.4 * 0.6, abs=1e-12)

    def test_additive_identity(self):
        out = measured_productivity(quality_frame(), theta=0.37)
        np.testing.assert_allclose(
            out["z"], out["omega_comp"] + out["quality_comp"], atol=0)

    def test_accounting_identity_through_estimation(self):
        # z = ln f - alpha_l ln l - alpha_k ln k - beta_0 - stage-1 residual
        firms = sim_panel()
        panel = prepare_panel(firms)
        fit = stage1(panel)
        est = PfEstimate(sector=0, coef=dict(TRUTH), form="ces")
        tfp = recover_tfp(panel, fit, est)
        df = tfp.merge(panel, on=["firm_id", "year"])
        out = measured_productivity(df, theta=TRUTH["theta"])
        direct = (df["ln_f"] - fit.residuals - TRUTH["beta_0"]
                  - TRUTH["alpha_l"] * df["ln_l"]
                  - TRUTH["alpha_k"] * df["ln_k"])
        assert np.max(np.abs(out["z"] - direct)) < 1e-10

    def test_per_sector_theta_mapping(self):
        df = quality_frame()
        out = measured_productivity(df, theta={0: 0.5})
        assert np.allclose(out["quality_comp"], 0.5 * df["ln_y"])
        with pytest.raises(KeyMismatch):
            measured_productivity(df, theta={7: 0.5})

    def test_missing_columns(self):
        df = quality_frame().drop(columns="ln_y")
        with pytest.raises(KeyMismatch):
            measured_productivity(df, theta=0.4, variant="top")


class TestAggregate:
    def test_equal_shares_is_mean(self):
        z = np.array([1.0, 2.0, 6.0])
        out = aggregate(z, np.full(3, 1 / 3), np.full(3, 2003))
        assert out.loc[2003] == pytest.approx(3.0, rel=1e-15)

    def test_direct_arithmetic(self):
        out = aggregate([1.0, 0.0], [0.7, 0.3], [2003, 2003])
        assert out.loc[2003] == pytest.approx(0.7, abs=1e-15)

    def test_single_firm(self):
        out = aggregate([2.5], [1.0], [2003])
        assert out.loc[2003] == 2.5

    def test_linearity(self):
        rng = np.random.default_rng(0)
        z = rng.normal(size=30)
        s = rng.dirichlet(np.ones(30))
        yrs = np.full(30, 2003)
        a = aggregate(3.0 * z + 2.0, s, yrs).loc[2003]
        b = 3.0 * aggregate(z, s, yrs).loc[2003] + 2.0
        assert a == pytest.approx(b, rel=1e-12)

    def test_rejects_unnormalized(self):
        with pytest.raises(SharesNotNormalized):
            aggregate([1.0, 1.0], [0.6, 0.6], [2003, 2003])


class TestOlleyPakes:
    def test_equal_shares_zero_covariance(self):
        out = olley_pakes([1.0, 2.0, 3.0], np.full(3, 1 / 3), np.full(3, 2003))
        assert out.iloc[0]["covariance"] == pytest.approx(0.0, abs=1e-15)
        assert out.iloc[0]["aggregate"] == pytest.approx(2.0)

    def test_direct_arithmetic(self):
        out = olley_pakes([1.0, 0.0], [0.7, 0.3], [2003, 2003]).iloc[0]
        assert out["mean"] == pytest.approx(0.5)
        assert out["covariance"] == pytest.approx(0.2)
        assert out["aggregate"] == pytest.approx(0.7)

    def test_identity_on_simulated_panel(self):
        panel = sim_panel()
        z = np.log(panel["value_added"])
        out = olley_pakes(z, panel["share"], panel["year"])
        gap = out["aggregate"] - out["mean"] - out["covariance"]
        assert np.max(np.abs(gap)) < 1e-12


class TestFourTerm:
    def test_zero_quality_reduces_to_op(self):
        rng = np.random.default_rng(2)
        omega = rng.normal(size=40)
        s = rng.dirichlet(np.ones(40))
        yrs = np.full(40, 2003)
        ft = four_term(omega, np.zeros(40), s, yrs).iloc[0]
        op = olley_pakes(omega, s, yrs).iloc[0]
        assert ft["omega_mean"] == pytest.approx(op["mean"], rel=1e-12)
        assert ft["omega_cov"] == pytest.approx(op["covariance"], rel=1e-12)
        assert ft["quality_mean"] == 0 and ft["quality_cov"] == 0

    def test_parts_sum_to_aggregate(self):
        panel = sim_panel()
        omega = panel["omega"].to_numpy()
        quality = PARAMS.theta * np.log(panel["y"].to_numpy())
        out = four_term(omega, quality, panel["share"], panel["year"])
        gap = out["aggregate"] - out[["omega_mean", "omega_cov",
                                      "quality_mean", "quality_cov"]].sum(axis=1)
        assert np.max(np.abs(gap)) < 1e-12
        direct = aggregate(omega + quality, panel["share"], panel["year"])
        assert np.max(np.abs(out.set_index("year")["aggregate"]
                             - direct)) < 1e-12

    def test_sign_pattern_under_drifts(self):
        # rising technology, falling match efficiency: technology terms up,
        # quality contribution down, measured aggregate down
        panel = sim_panel(n_firms=250, years=13, seed=77, omega_drift=0.02,
                          omega_x_drift=-0.058)
        omega = panel["omega"].to_numpy()
        quality = PARAMS.theta * np.log(panel["y"].to_numpy())
        out = four_term(omega, quality, panel["share"], panel["year"])
        yrs = out["year"]
        windows = [(yrs.iloc[0], yrs.iloc[-1])]
        om = growth_rates(out.set_index("year")["omega_mean"]
                          + out.set_index("year")["omega_cov"], windows)
        qu = growth_rates(out.set_index("year")["quality_mean"]
                          + out.set_index("year")["quality_cov"], windows)
        zz = growth_rates(out.set_index("year")["aggregate"], windows)
        assert om["growth_pct_per_year"].iloc[0] > 0
        assert qu["growth_pct_per_year"].iloc[0] < 0
        assert zz["growth_pct_per_year"].iloc[0] < 0


class TestGrowthRates:
    def test_flat_series(self):
        s = pd.Series(0.5, index=range(2003, 2016))
        out = growth_rates(s, [(2003, 2015)])
        assert out["growth_pct_per_year"].iloc[0] == 0.0

    def test_level_drop_matches_report(self):
        # a 0.0456 log-point decline over 12 years is -0.38 percent per year
        s = pd.Series([0.0] + [np.nan] * 11 + [-0.0456],
                      index=range(2003, 2016)).interpolate()
        out = growth_rates(s, [(2003, 2015)])
        assert out["growth_pct_per_year"].iloc[0] == pytest.approx(-0.38,
                                                                   abs=0.005)

    def test_window_splitting_identity(self):
        rng = np.random.default_rng(4)
        s = pd.Series(rng.normal(size=13).cumsum(), index=range(2003, 2016))
        out = growth_rates(s, [(2003, 2015), (2003, 2008), (2008, 2015)])
        full, a, b = out["growth_pct_per_year"]
        weighted = (5 * a + 7 * b) / 12
        assert abs(full - weighted) < 1e-10

    def test_window_out_of_range(self):
        s = pd.Series([1.0, 2.0], index=[2003, 2004])
        with pytest.raises(WindowOutOfRange):
            growth_rates(s, [(2003, 2010)])
        with pytest.raises(WindowOutOfRange):
            growth_rates(s, [(2004, 2004)])


class TestDispersion:
    def test_variance_identity(self):
        rng = np.random.default_rng(5)
        omega = rng.normal(size=200)
        quality = 0.4 * omega + rng.normal(0, 0.5, 200)
        z = omega + quality
        yrs = np.repeat([2003, 2004], 100)
        out = dispersion_stats(z, yrs, omega=omega, quality=quality)
        gap = out["var_z"] - (out["var_omega"] + out["var_quality"]
                              + 2 * out["cov_omega_quality"])
        assert np.max(np.abs(gap)) < 1e-12

    def test_constant_values(self):
        out = dispersion_stats(np.full(20, 1.5), np.full(20, 2003))
        row = out.iloc[0]
        assert row["var_z"] == 0 and row["iqr"] == 0 and row["p90_p10"] == 0

    def test_shrinking_quality_dispersion(self):
        rng = np.random.default_rng(6)
        omega = rng.normal(0, 0.5, 400)
        q1 = rng.normal(0, 1.0, 200)
        q2 = rng.normal(0, 0.4, 200)
        z = omega + np.concatenate([q1, q2])
        yrs = np.repeat([2003, 2004], 200)
        out = dispersion_stats(z, yrs, omega=omega,
                               quality=np.concatenate([q1, q2]))
        assert out.iloc[1]["var_z"] < out.iloc[0]["var_z"]

    def test_too_few_firms(self):
        with pytest.raises(TooFewFirms):
            dispersion_stats(np.ones(5), np.full(5, 2003))


class TestCdVariant:
    def test_zero_betas(self):
        df = quality_frame()
        out = cd_measured_productivity(df, beta_x=0.0, beta_y=0.0)
        np.testing.assert_array_equal(out["z"], df["omega_hat"])

    def test_additive_closure_and_op_linearity(self):
        df = quality_frame(n=80)
        out = cd_measured_productivity(df, beta_x=0.3, beta_y=0.25)
        np.testing.assert_allclose(
            out["z"], out["omega_comp"] + out["quality_comp"], atol=0)
        shares = np.full(80, 1 / 80)
        yrs = df["year"].to_numpy()
        total = olley_pakes(out["z"], shares, yrs).iloc[0]
        parts = (olley_pakes(out["omega_comp"], shares, yrs).iloc[0]
                 + olley_pakes(out["quality_comp"], shares, yrs).iloc[0])
        assert total["aggregate"] == pytest.approx(
            parts["aggregate"], abs=1e-12)


def test_dispersion_invariant_to_row_order():
    rng = np.random.default_rng(9)
    z = rng.normal(size=60)
    yrs = np.repeat([2003, 2004], 30)
    base = dispersion_stats(z, yrs)
    perm = rng.permutation(60)
    again = dispersion_stats(z[perm], yrs[perm])
    pd.testing.assert_frame_equal(base, again)
