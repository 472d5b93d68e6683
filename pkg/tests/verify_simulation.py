#!/usr/bin/env python3
# coding=utf-8

"""
@author: guoyanfeng
@software: PyCharm
@time: 19-8-13 下午3:40
"""
import numpy as np
import pytest
from scipy import stats

from gptcm.exceptions import ConfigError, DomainError
from gptcm.samplers import rng_stream
from gptcm.simulation import (SimConfig, _calibrate_censoring_rate, SimulationTruth, build_covariance, build_mrf_graph_from_precision,
                              default_coefficients, noncured_survival, pseudo_mrf_graph, sample_noncured_time,
                              sample_noncured_time_mh, simulate, simulate_cox_misspec, simulate_gptcm,
                              simulate_validation)

THETA, PROPS, LAMBDAS, KAPPA = 2.0, np.array([0.2, 0.5, 0.3]), np.array([0.6, 1.2, 2.5]), 2.0


class TestCovariance(object):

    def test_low_dim_entries(self):
        sigma = build_covariance(10, 3, 0.1, (0.13, 0.14, 0.15))
        assert sigma.shape == (30, 30)
        assert np.allclose(np.diag(sigma), 1.0)
        assert sigma[0, 10] == pytest.approx(0.1)
        assert sigma[0, 1] == pytest.approx(0.13)
        assert sigma[0, 2] == pytest.approx(0.13 ** 2)
        assert sigma[20, 21] == pytest.approx(0.15)
        assert sigma[6, 8] == 0.0
        assert sigma[0, 11] == 0.0
        assert np.allclose(sigma, sigma.T)

    def test_not_positive_definite_raises(self):
        with pytest.raises(DomainError):
            build_covariance(10, 3, -0.6, (0.13, 0.14, 0.15))

    def test_graph_from_precision(self):
        sigma = build_covariance(10, 3, 0.1, (0.13, 0.14, 0.15))
        graph = build_mrf_graph_from_precision(sigma, 3)
        weights = graph.weights.toarray()
        assert weights[0, 10] == 0.5
        assert weights[6, 8] == 0.0
        assert weights[0, 1] == 1.0
        assert np.count_nonzero(weights == 0.5) == 30 * 2
        assert np.all(np.diag(weights) == 0)
        assert graph.b == pytest.approx(0.1)
        assert graph.a == pytest.approx(np.log(0.1 / 0.9))

    def test_pseudo_graph(self):
        weights = pseudo_mrf_graph(5, 3).weights.toarray()
        assert weights[0, 5] == 1.0 and weights[0, 10] == 1.0 and weights[5, 10] == 1.0
        assert weights[0, 1] == 0.0
        assert np.count_nonzero(weights) == 15 * 2


class TestConfig(object):

    def test_default_coefficients(self):
        beta, zeta, zeta0 = default_coefficients(10, 3)
        assert np.allclose(beta[0][:7], [-1.0, -0.5, 0.8, 0.8, -1.0, 0.0, 0.0])
        assert np.all(beta[2][7:] == 0)
        assert np.allclose(zeta[1][:6], [-0.5, 0.5, 0.0, 1.0, 0.0, -1.0])
        assert np.allclose(zeta0, [-0.5, 1.0, 1.2])

    def test_preset_overrides(self):
        cfg = SimConfig.from_preset("high-dim", n=50, p=None)
        assert cfg.p == 200 and cfg.n == 50
        with pytest.raises(ConfigError):
            SimConfig.from_preset("mid-dim")

    @pytest.mark.parametrize("kwargs", [dict(mode="cox_misspec", p=4), dict(kappa=0.0), dict(rho=1.0),
                                        dict(noncured_method="newton"), dict(L=4),
                                        dict(censor_target=1.0), dict(censor_rate=-1.0)])
    def test_invalid_config_raises(self, kwargs):
        with pytest.raises(ConfigError):
            SimConfig(**kwargs)

    def test_wrong_mode_raises(self):
        with pytest.raises(ConfigError):
            simulate_gptcm(SimConfig.from_preset("cox-misspec"))
        with pytest.raises(ConfigError):
            simulate_cox_misspec(SimConfig())


class TestNoncuredTime(object):

    def test_single_type_inverse(self):
        theta, lam, kappa = 1.7, 1.3, 1.5
        u = rng_stream(8).uniform()
        surv = np.log1p(u * np.expm1(theta)) / theta
        expected = lam * (-np.log(surv)) ** (1.0 / kappa)
        draw = sample_noncured_time(theta, np.array([1.0]), np.array([lam]), kappa, rng_stream(8))
        assert draw == pytest.approx(expected, rel=1e-9)

    def test_conditional_survival_bounds(self):
        assert noncured_survival(1e-12, THETA, PROPS, LAMBDAS, KAPPA) == pytest.approx(1.0, abs=1e-9)
        assert noncured_survival(1e3, THETA, PROPS, LAMBDAS, KAPPA) == pytest.approx(0.0, abs=1e-12)

    def test_distribution_matches_conditional_survival(self):
        rng = rng_stream(2)
        draws = np.array([sample_noncured_time(THETA, PROPS, LAMBDAS, KAPPA, rng) for _ in range(4000)])
        cdf = np.vectorize(lambda t: 1.0 - noncured_survival(t, THETA, PROPS, LAMBDAS, KAPPA))
        assert stats.kstest(draws, cdf).statistic < 0.035

    def test_more_clonogens_fail_earlier(self):
        rng = rng_stream(3)
        low = [sample_noncured_time(0.5, PROPS, LAMBDAS, KAPPA, rng) for _ in range(2000)]
        high = [sample_noncured_time(5.0, PROPS, LAMBDAS, KAPPA, rng) for _ in range(2000)]
        assert np.median(high) < np.median(low)

    def test_non_positive_theta_raises(self):
        with pytest.raises(DomainError):
            sample_noncured_time(0.0, PROPS, LAMBDAS, KAPPA, rng_stream(1))

    @pytest.mark.slow
    def test_metropolis_agrees_with_inverse_cdf(self):
        rng = rng_stream(4)
        draws = np.array([sample_noncured_time_mh(THETA, PROPS, LAMBDAS, KAPPA, rng) for _ in range(1500)])
        cdf = np.vectorize(lambda t: 1.0 - noncured_survival(t, THETA, PROPS, LAMBDAS, KAPPA))
        assert stats.kstest(draws, cdf).statistic < 0.05


class TestSimulateGptcm(object):

    def test_dataset_and_truth(self):
        cfg = SimConfig(n=300, seed=5)
        data, truth = simulate(cfg)
        assert data.n == 300 and data.d == 2 and data.p_sizes == [10, 10, 10]
        assert data.validate() == []
        assert np.all(data.event[truth.cured] == 0)
        assert np.allclose(data.time[truth.cured], truth.censor_time[truth.cured])
        assert np.all(np.isinf(truth.latent_time[truth.cured]))
        assert np.allclose(data.time, np.minimum(truth.latent_time, truth.censor_time))
        assert np.allclose(truth.props.sum(axis=1), 1.0)
        assert np.all(truth.censor_time <= 4.0)

    def test_same_seed_same_data(self):
        first, _ = simulate(SimConfig(n=60, seed=9))
        second, _ = simulate(SimConfig(n=60, seed=9))
        other, _ = simulate(SimConfig(n=60, seed=10))
        assert np.array_equal(first.time, second.time)
        assert np.array_equal(first.cell_covariates[2], second.cell_covariates[2])
        assert np.array_equal(first.proportions, second.proportions)
        assert not np.array_equal(first.time, other.time)

    def test_cure_fraction(self):
        _, truth = simulate(SimConfig(n=3000, seed=2))
        assert truth.cured.mean() == pytest.approx(np.mean(np.exp(-truth.theta)), abs=0.02)

    def test_validation_shares_truth(self):
        cfg = SimConfig(n=50, seed=4)
        data, truth = simulate(cfg)
        valid, valid_truth = simulate_validation(cfg, n=40)
        assert valid.n == 40
        assert not np.array_equal(data.clinical[:40], valid.clinical)
        for l in range(3):
            assert np.array_equal(truth.beta[l], valid_truth.beta[l])

    def test_truth_serialization(self):
        _, truth = simulate(SimConfig(n=40, seed=3))
        values = truth.to_dict()
        assert all(t is None for t, c in zip(values["latent_time"], values["cured"]) if c)
        restored = SimulationTruth.from_dict(values)
        assert np.array_equal(restored.latent_time, truth.latent_time)
        assert np.array_equal(restored.active("beta"), truth.active("beta"))
        assert int(truth.active("beta").sum()) == 5 + 4 + 4

    def test_observed_proportions_drive_event_times(self):
        data, truth = simulate(SimConfig(n=200, seed=8))
        assert np.array_equal(truth.props, data.proportions)
        alpha = np.column_stack([np.exp(truth.zeta0[l] + data.cell_covariates[l] @ truth.zeta[l]) for l in range(3)])
        assert not np.allclose(truth.props, alpha / alpha.sum(axis=1, keepdims=True), atol=0.01)

    def test_fixed_censoring_rate(self):
        data, truth = simulate(SimConfig(n=200, seed=3, censor_rate=50.0))
        assert np.all(truth.censor_time <= 4.0)
        assert 1.0 - data.event.mean() > 0.9

    def test_censoring_rate_calibration(self):
        latent = np.array([1.0, 2.0, np.inf, 0.5])
        window = np.array([2.0, 1.0, 3.0, 3.0])
        rate = _calibrate_censoring_rate(latent, 0.75, window)
        assert rate == pytest.approx(-2.0 * np.log((np.sqrt(5.0) - 1.0) / 2.0), rel=1e-8)
        assert _calibrate_censoring_rate(latent, 0.5, window) == pytest.approx(np.exp(-30.0))
        assert _calibrate_censoring_rate(np.array([1.0, 3.0]), 0.5) > 0

    @pytest.mark.slow
    def test_censoring_and_cure_fractions(self):
        data, truth = simulate(SimConfig(n=10000, seed=1))
        assert 1.0 - data.event.mean() == pytest.approx(0.2, abs=0.03)
        assert truth.cured.mean() == pytest.approx(np.mean(np.exp(-truth.theta)), abs=0.02)

    @pytest.mark.slow
    def test_exchangeable_proportions(self):
        cfg = SimConfig(n=10000, seed=12, zeta=[np.zeros(10)] * 3, zeta0=np.ones(3))
        data, _ = simulate(cfg)
        assert np.allclose(data.proportions.mean(axis=0), 1.0 / 3.0, atol=0.01)


class TestSimulateCox(object):

    def test_pseudo_cell_types(self):
        data, truth = simulate(SimConfig.from_preset("cox-misspec", n=500, seed=2))
        assert data.L == 3 and data.p_sizes == [5, 5, 5] and data.d == 5
        assert np.all(data.proportions == 1.0 / 3.0)
        assert np.array_equal(data.cell_covariates[0], data.clinical)
        assert truth.h0 == 0.5
        assert np.allclose(truth.xi, [-0.8, -2.0, -2.0, 1.0, 1.0])
        assert int(truth.active("beta").sum()) == 0

    def test_calibrated_censoring(self):
        data, _ = simulate(SimConfig.from_preset("cox-misspec", n=5000, seed=3))
        assert 1.0 - data.event.mean() == pytest.approx(0.2, abs=0.03)

    def test_zero_effects_give_weibull_times(self):
        cfg = SimConfig.from_preset("cox-misspec", n=100000, seed=6, cox_effects=np.zeros(5))
        _, truth = simulate(cfg)
        cdf = lambda t: 1.0 - np.exp(-0.5 * np.power(t, 2.0))
        assert stats.kstest(truth.latent_time, cdf).statistic < 0.01
