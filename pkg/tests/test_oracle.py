import numpy as np
import pytest

from matchprod import cobb_douglas_constants, equilibrium_constants
from matchprod.errors import GridTooSmall, PamViolation
from matchprod.model import match_top_type
from matchprod.oracle import (
    cd_demand_consistency,
    foc_residuals,
    market_clearing_residual,
    matching_ode_residual,
)

GRID = np.geomspace(1.0, 100.0, 100)


def closed_form(params, omega_x=0.0, psi_variant="canonical"):
    c = equilibrium_constants(params, psi_variant=psi_variant)
    return c, (lambda x: c.slope * np.exp(omega_x) * x)


class TestCesOde:
    def test_closed_form_passes(self, ces_pam_sets):
        for name, p in ces_pam_sets.items():
            grid = np.geomspace(p.x_min, 100 * p.x_min, 100)
            _, t = closed_form(p, omega_x=0.2)
            res = matching_ode_residual(t, p, mode="ces", grid=grid, omega_x=0.2)
            assert np.max(np.abs(res)) < 1e-8, name

    def test_analytic_derivatives_path(self, ces_pam_sets):
        p = ces_pam_sets["construction_like"]
        c, t = closed_form(p)
        res = matching_ode_residual(
            t, p, mode="ces", grid=GRID,
            derivatives=(lambda x: np.full_like(x, c.slope),
                         lambda x: np.zeros_like(x)))
        assert np.max(np.abs(res)) < 1e-12

    def test_perturbed_exponent_fails(self, ces_pam_sets):
        p = ces_pam_sets["construction_like"]
        c, _ = closed_form(p)
        res = matching_ode_residual(lambda x: c.slope * x ** 1.1, p,
                                    mode="ces", grid=GRID)
        assert np.max(np.abs(res)) > 1e-2

    def test_sign_flipped_variant_fails_when_tails_differ(self, ces_pam_sets):
        # The matching constant with the flipped tail-sum sign in its
        # denominator is wrong; the ODE oracle rejects it.
        failures = 0
        for name, p in ces_pam_sets.items():
            if p.lambda_x == p.lambda_y:
                continue
            try:
                _, t = closed_form(p, psi_variant="sign-flipped")
            except PamViolation:
                failures += 1
                continue
            grid = np.geomspace(p.x_min, 100 * p.x_min, 100)
            res = matching_ode_residual(t, p, mode="ces", grid=grid)
            assert np.max(np.abs(res)) > 1e-4, name
            failures += 1
        assert failures >= 4

    def test_sign_flipped_variant_positive_but_wrong(self, ces_pam_sets):
        # wide_slope has both variants positive, so the oracle itself (not the
        # positivity gate) must adjudicate.
        p = ces_pam_sets["wide_slope"]
        c_ok, t_ok = closed_form(p)
        c_bad, t_bad = closed_form(p, psi_variant="sign-flipped")
        assert c_bad.psi > 0 and abs(c_bad.psi - c_ok.psi) > 1e-3
        res_ok = matching_ode_residual(t_ok, p, mode="ces", grid=GRID)
        res_bad = matching_ode_residual(t_bad, p, mode="ces", grid=GRID)
        assert np.max(np.abs(res_ok)) < 1e-8
        assert np.max(np.abs(res_bad)) > 1e-3

    def test_grid_too_small(self, ces_pam_sets):
        p = ces_pam_sets["construction_like"]
        _, t = closed_form(p)
        with pytest.raises(GridTooSmall):
            matching_ode_residual(t, p, mode="ces", grid=np.array([1.0, 2.0, 3.0]))


class TestCdOde:
    def test_closed_form_passes(self, cd_pam_sets):
        for name, p in cd_pam_sets.items():
            c = cobb_douglas_constants(p, eta=0.2)
            res = matching_ode_residual(
                lambda x: c.slope * x ** c.exponent, p, mode="cd", grid=GRID)
            assert np.max(np.abs(res)) < 1e-8, name

    def test_wrong_exponent_fails(self, cd_pam_sets):
        p = cd_pam_sets["integer_exponent"]
        c = cobb_douglas_constants(p, eta=0.2)
        res = matching_ode_residual(
            lambda x: c.slope * x ** (c.exponent * 0.9), p, mode="cd", grid=GRID)
        assert np.max(np.abs(res)) > 1e-2

    def test_demand_consistency_pins_slope(self, cd_pam_sets):
        # The second-order ODE cancels A; the two routes to l(x) do not.
        x = np.geomspace(1.0, 50.0, 40)
        for name, p in cd_pam_sets.items():
            c = cobb_douglas_constants(p, eta=0.3)
            res = cd_demand_consistency(x, 0.3, p, c)
            assert np.max(np.abs(res)) < 1e-10, name
            wrong = type(c)(psi=c.psi, slope=1.25 * c.slope, exponent=c.exponent,
                            density_ratio=c.density_ratio,
                            wage_level=c.wage_level, b0=c.b0, mode="cd")
            res_wrong = cd_demand_consistency(x, 0.3, p, wrong)
            assert np.min(np.abs(res_wrong)) > 1e-3


class TestFirstOrderConditions:
    def test_three_conditions_hold(self, ces_pam_sets, rng):
        for name, p in ces_pam_sets.items():
            c = equilibrium_constants(p)
            x = p.x_min * np.exp(rng.uniform(0.0, 4.0, size=100))
            omega = rng.normal(0.0, 0.4)
            omega_x = rng.normal(0.0, 0.2)
            res = foc_residuals(x, p, c, omega=omega, omega_x=omega_x)
            for key, val in res.items():
                assert np.max(np.abs(val)) < 1e-8, (name, key)

    def test_detects_wrong_wage_level(self, ces_pam_sets):
        p = ces_pam_sets["construction_like"]
        c = equilibrium_constants(p)
        wrong = type(c)(psi=c.psi, slope=c.slope, exponent=c.exponent,
                        density_ratio=c.density_ratio,
                        wage_level=2.0 * c.wage_level, b0=c.b0)
        res = foc_residuals(np.array([2.0, 5.0]), p, wrong)
        assert np.max(np.abs(res["labor_foc"])) > 1e-2


class TestMarketClearing:
    @pytest.mark.parametrize("key", ["construction_like", "negative_theta"])
    def test_quadrature_identity(self, ces_pam_sets, key):
        # construction_like has lambda_y < lambda_x, negative_theta the reverse
        p = ces_pam_sets[key]
        c = equilibrium_constants(p)
        res = market_clearing_residual(p, c, omega_x=0.1)
        assert res.shape == (50,)
        assert np.max(np.abs(res)) < 1e-6

    def test_perturbed_demand_breaks_identity(self, ces_pam_sets):
        # clearing is invariant to the matching slope (it cancels in
        # l * h(T) * T'), so the negative control perturbs the worker count
        # through the density-ratio constant instead
        p = ces_pam_sets["construction_like"]
        c = equilibrium_constants(p)
        wrong = type(c)(psi=c.psi, slope=c.slope, exponent=c.exponent,
                        density_ratio=1.5 * c.density_ratio,
                        wage_level=c.wage_level, b0=c.b0)
        res = market_clearing_residual(p, wrong, omega_x=0.1,
                                       x_eval=np.array([1.0, 2.0, 5.0]))
        assert np.min(np.abs(res)) > 1e-2


def test_match_consistency_between_model_and_oracle(ces_pam_sets):
    # the oracle's closed-form candidate equals the model's matching function
    p = ces_pam_sets["construction_like"]
    c = equilibrium_constants(p)
    x = np.geomspace(1.0, 30.0, 10)
    np.testing.assert_allclose(match_top_type(x, 0.2, c, p),
                               c.slope * np.exp(0.2) * x, rtol=1e-15)
