"""Toy-model densities, samplers, and conjugate oracles."""

import numpy as np
import pytest
from scipy.integrate import quad

from wkernel.core import LogPriorVector, WeightVector
from wkernel.errors import ConvergenceWarning, InvalidInput, Unsupported
from wkernel.models import (
    BetaBinomialConfig,
    McmcConfig,
    ModelBundle,
    NormalMeanConfig,
    RegressionConfig,
    WeibullConfig,
    betabinom_logpmf,
    curve_stats,
    exact_weighted_mean,
    merge_shift_experiment,
    predictive_tail_stat,
    run_model,
    weibull_logpdf,
)
from wkernel.core import LogLikMatrix


class TestWeibullDensity:
    def test_exponential_special_case(self):
        assert weibull_logpdf(1.0, 1.0, 1.0) == pytest.approx(-1.0)

    def test_hand_value(self):
        # log 4 - 4 at shape 2, scale 1, x = 2
        assert weibull_logpdf(2.0, 2.0, 1.0) == pytest.approx(np.log(4.0) - 4.0)

    def test_normalization_by_quadrature(self):
        for gamma, lam in [(0.8, 1.3), (2.0, 50.0), (3.5, 0.7)]:
            total, _ = quad(
                lambda x: np.exp(weibull_logpdf(x, gamma, lam)), 0, np.inf
            )
            assert total == pytest.approx(1.0, abs=1e-6)

    def test_domain_validation(self):
        with pytest.raises(InvalidInput):
            weibull_logpdf(-1.0, 2.0, 1.0)
        with pytest.raises(InvalidInput):
            weibull_logpdf(1.0, -2.0, 1.0)


class TestBetaBinomialDensity:
    def test_small_overdispersion_matches_binomial(self):
        from scipy.stats import binom

        x = np.arange(6)
        bb = np.exp(betabinom_logpmf(x, 5, 0.25, 1e-6))
        bn = binom.pmf(x, 5, 0.25)
        np.testing.assert_allclose(bb, bn, atol=1e-4)

    def test_normalization(self):
        x = np.arange(6)
        total = np.exp(betabinom_logpmf(x, 5, 0.25, 0.65)).sum()
        assert total == pytest.approx(1.0, abs=1e-12)

    def test_mean_is_nq0(self):
        x = np.arange(6)
        pmf = np.exp(betabinom_logpmf(x, 5, 0.25, 0.65))
        assert (x * pmf).sum() == pytest.approx(5 * 0.25, abs=1e-8)

    def test_domain_validation(self):
        with pytest.raises(InvalidInput):
            betabinom_logpmf(6, 5, 0.25, 0.65)
        with pytest.raises(InvalidInput):
            betabinom_logpmf(2, 5, 0.25, 1.5)


class TestRunModelConjugate:
    def test_betabinom_draw_mean_matches_posterior(self):
        cfg = BetaBinomialConfig(seed=5, m_draws=20000)
        bundle = run_model(cfg)
        x = bundle.data
        a = 1.0 + x.sum()
        b = 1.0 + cfg.n * cfg.N - x.sum()
        exact_mean = a / (a + b)
        exact_sd = np.sqrt(a * b / ((a + b) ** 2 * (a + b + 1)))
        mc_se = exact_sd / np.sqrt(cfg.m_draws)
        assert abs(bundle.draws.mean() - exact_mean) < 3 * mc_se

    def test_normal_mean_posterior_variance(self):
        cfg = NormalMeanConfig(n=100, m_draws=100000, seed=6)
        bundle = run_model(cfg)
        assert bundle.draws.var() == pytest.approx(1.0 / 100, rel=0.05)

    def test_scaled_prior_posterior(self):
        cfg = BetaBinomialConfig(
            seed=7, m_draws=20000, rho=0.0, alpha=2.0, beta=1.0, prior_weight=0.1
        )
        bundle = run_model(cfg)
        x = bundle.data
        n_lam = cfg.n * cfg.prior_weight
        a = 1.0 + n_lam * 1.0 + x.sum()
        b = 1.0 + x.size * cfg.N - x.sum()
        assert bundle.draws.mean() == pytest.approx(a / (a + b), abs=0.01)
        assert bundle.logprior.prior_weight == 0.1

    def test_loglik_recomputes(self):
        for cfg in (NormalMeanConfig(n=20, m_draws=50, seed=1), BetaBinomialConfig(seed=2, m_draws=50)):
            bundle = run_model(cfg)
            assert bundle.loglik_gap() <= 1e-10


class TestRunModelMcmc:
    def test_weibull_recovers_shape(self):
        cfg = WeibullConfig(
            gamma=2.0,
            lam=50.0,
            n=200,
            seed=3,
            mcmc=McmcConfig(chains=2, iters=3000, burn_in=1000, seed=3),
        )
        bundle = run_model(cfg)
        gamma_draws = bundle.draws[:, 0]
        assert abs(gamma_draws.mean() - 2.0) < 3 * gamma_draws.std()

    def test_weibull_deterministic_under_seed(self):
        cfg = WeibullConfig(seed=4, mcmc=McmcConfig(chains=2, iters=500, burn_in=200, seed=4))
        a = run_model(cfg)
        b = run_model(cfg)
        np.testing.assert_array_equal(a.draws, b.draws)
        np.testing.assert_array_equal(a.data, b.data)

    def test_weibull_loglik_recomputes(self, weibull_bundle):
        assert weibull_bundle.loglik_gap() <= 1e-10

    def test_regression_loglik_recomputes(self, regression_bundle):
        assert regression_bundle.loglik_gap() <= 1e-10

    def test_regression_acceptance_rate_reasonable(self, regression_bundle):
        assert 0.1 <= regression_bundle.acceptance_rate <= 0.6

    def test_student_t_regression_runs(self):
        cfg = RegressionConfig(
            likelihood="student_t",
            seed=5,
            mcmc=McmcConfig(chains=2, iters=2000, burn_in=800, seed=5),
        )
        bundle = run_model(cfg)
        assert bundle.loglik_gap() <= 1e-10
        assert bundle.draws.shape[1] == 5  # four coefficients plus scale

    def test_frozen_bad_step_warns(self):
        cfg = WeibullConfig(
            seed=6,
            mcmc=McmcConfig(chains=1, iters=300, burn_in=1, step_size=200.0, seed=6),
        )
        with pytest.warns(ConvergenceWarning):
            run_model(cfg)


class TestExactWeightedMean:
    def test_unit_weights_return_posterior_mean(self):
        cfg = BetaBinomialConfig(seed=8, m_draws=100)
        bundle = run_model(cfg)
        x = bundle.data
        a = 1.0 + x.sum()
        b = 1.0 + cfg.n * cfg.N - x.sum()
        w = WeightVector(np.ones(cfg.n))
        assert exact_weighted_mean(bundle, w, "q_mean") == pytest.approx(a / (a + b))

    def test_case_deletion(self):
        cfg = BetaBinomialConfig(seed=9, m_draws=100)
        bundle = run_model(cfg)
        x = bundle.data
        w = np.ones(cfg.n)
        w[3] = 0.0
        got = exact_weighted_mean(bundle, WeightVector(w), "q_mean")
        num = 1.0 + x.sum() - x[3]
        den = 2.0 + (cfg.n - 1) * cfg.N
        assert got == pytest.approx(num / den, rel=1e-12)

    def test_doubling_equals_duplication(self):
        cfg = BetaBinomialConfig(seed=10, m_draws=100)
        bundle = run_model(cfg)
        x = bundle.data
        w = np.ones(cfg.n)
        w[5] = 2.0
        got = exact_weighted_mean(bundle, WeightVector(w), "q_mean")
        a = 1.0 + x.sum() + x[5]
        b = 1.0 + (cfg.n + 1) * cfg.N - (x.sum() + x[5])
        assert got == pytest.approx(a / (a + b), rel=1e-12)

    def test_unsupported_for_mcmc_models(self, weibull_bundle):
        w = WeightVector(np.ones(weibull_bundle.n_obs))
        with pytest.raises(Unsupported):
            exact_weighted_mean(weibull_bundle, w, "gamma")


class TestPredictiveTail:
    def test_threshold_zero_gives_one(self, weibull_bundle):
        vals = predictive_tail_stat(weibull_bundle, 0.0)
        np.testing.assert_allclose(vals, 1.0)

    def test_closed_form_survival(self):
        draws = np.array([[1.0, 1.0], [1.0, 1.0]])
        ll = LogLikMatrix(np.zeros((2, 2)))
        bundle = ModelBundle(
            model="weibull",
            data=np.array([1.0, 2.0]),
            draws=draws,
            loglik=ll,
            logprior=LogPriorVector(np.zeros(2)),
            theta_hat=np.array([1.0, 1.0]),
            param_names=("gamma", "lambda"),
        )
        vals = predictive_tail_stat(bundle, np.log(2.0))
        np.testing.assert_allclose(vals, 0.5, rtol=1e-12)

    def test_monotone_in_threshold(self, weibull_bundle):
        a = predictive_tail_stat(weibull_bundle, 30.0)
        b = predictive_tail_stat(weibull_bundle, 40.0)
        assert np.all(b <= a)

    def test_requires_weibull(self, betabinom_bundle):
        with pytest.raises(Unsupported):
            predictive_tail_stat(betabinom_bundle, 40.0)


class TestMergeShift:
    def test_same_index_gives_zero(self, regression_bundle):
        grid = np.linspace(-1, 1, 7)
        shift = merge_shift_experiment(regression_bundle, 4, 4, grid)
        np.testing.assert_allclose(shift, 0.0, atol=1e-15)

    def test_antisymmetric(self, regression_bundle):
        grid = np.linspace(-1, 1, 7)
        ab = merge_shift_experiment(regression_bundle, 2, 9, grid)
        ba = merge_shift_experiment(regression_bundle, 9, 2, grid)
        np.testing.assert_allclose(ab, -ba, atol=1e-14)

    def test_normal_mean_matches_exact_reweighting(self):
        cfg = NormalMeanConfig(n=50, m_draws=100000, seed=11)
        bundle = run_model(cfg)
        x = bundle.data
        from_i = int(np.argmin(x))
        into_j = int(np.argmax(x))
        pred = merge_shift_experiment(bundle, from_i, into_j)[0]
        w = np.ones(50)
        w[from_i] = 0.0
        w[into_j] = 2.0
        exact = exact_weighted_mean(bundle, WeightVector(w), "theta_mean") - x.mean()
        assert pred == pytest.approx(exact, rel=0.10)

    def test_curve_stats_match_design(self, regression_bundle):
        grid = np.array([-0.5, 0.0, 0.5])
        stats = curve_stats(regression_bundle, grid)
        beta = regression_bundle.draws[0, :4]
        expect = beta[0] + beta[1] * grid + beta[2] * grid**2 + beta[3] * grid**3
        np.testing.assert_allclose(stats.values[0], expect, rtol=1e-12)

    def test_index_validation(self, regression_bundle):
        with pytest.raises(InvalidInput):
            merge_shift_experiment(regression_bundle, -1, 3)
