#!/usr/bin/env python3
# coding=utf-8

"""
@author: guoyanfeng
@software: PyCharm
@time: 19-8-12 上午10:05
"""
import itertools

import numpy as np
import pytest
from scipy import integrate
from scipy.special import gamma as gamma_fn

from gptcm.domain import HyperParams, ModelSpec, MrfGraph, ParameterState, SurvivalDataset, Variant
from gptcm.exceptions import ContractError, DatasetError, DomainError, SpecError, StateError
from gptcm.model_core import (conjugate_posteriors, dirichlet_log_density, indicator_log_prior, linear_predictors,
                              log_likelihood, logcond_beta, logcond_kappa, logcond_xi, logcond_zeta, mrf_flip_delta,
                              mrf_log_prior, pointwise_log_likelihood, population_log_density, population_survival,
                              weibull_scale_from_mean, weibull_survival)
from tests.conftest import make_dataset, make_spec, make_state


def _pop_surv(t, theta, props, lambdas, kappa):
    return population_survival(t, theta, props, weibull_survival(t, lambdas, kappa))


class TestWeibull(object):

    def test_survival_at_scale(self):
        assert weibull_survival(2.0, 2.0, 3.0) == pytest.approx(np.exp(-1.0), abs=1e-15)

    def test_exponential_case(self):
        t = np.array([0.5, 1.0, 4.0])
        assert np.allclose(weibull_survival(t, 2.0, 1.0), np.exp(-t / 2.0), rtol=1e-14)

    def test_scale_from_mean(self):
        assert weibull_scale_from_mean(3.0, 1.0) == pytest.approx(3.0, rel=1e-14)
        assert weibull_scale_from_mean(1.0, 2.0) == pytest.approx(1.0 / gamma_fn(1.5), rel=1e-14)

    @pytest.mark.parametrize("args", [(0.0, 1.0, 1.0), (1.0, -1.0, 1.0), (1.0, 1.0, 0.0), (np.nan, 1.0, 1.0)])
    def test_non_positive_raises(self, args):
        with pytest.raises(DomainError):
            weibull_survival(*args)


class TestPopulationSurvival(object):

    def test_bounds_and_cure_plateau(self):
        theta, props = 1.7, np.array([0.2, 0.5, 0.3])
        lambdas = np.array([0.5, 1.0, 2.0])
        for t in (0.01, 0.5, 2.0, 10.0):
            value = _pop_surv(t, theta, props, lambdas, 1.5)
            assert np.exp(-theta) < value <= 1.0
        assert _pop_surv(1e4, theta, props, lambdas, 1.5) == pytest.approx(np.exp(-theta), abs=1e-12)

    def test_decreasing_in_time(self):
        grid = np.linspace(0.05, 5.0, 60)
        values = [_pop_surv(t, 0.8, [0.6, 0.4], np.array([1.0, 3.0]), 2.0) for t in grid]
        assert np.all(np.diff(values) <= 0)

    def test_single_type_reduces_to_promotion_time_model(self):
        t, theta, lam, kappa = 1.3, 2.2, 0.9, 1.4
        cdf = 1.0 - np.exp(-(t / lam) ** kappa)
        assert _pop_surv(t, theta, [1.0], np.array([lam]), kappa) == pytest.approx(np.exp(-theta * cdf), rel=1e-13)

    def test_props_off_simplex_raise(self):
        with pytest.raises(DomainError):
            population_survival(1.0, 1.0, [0.5, 0.49], [0.5, 0.5])

    def test_density_matches_derivative(self):
        rng = np.random.default_rng(3)
        for _ in range(20):
            theta, kappa, t = rng.uniform(0.5, 3.0), rng.uniform(0.5, 3.0), rng.uniform(0.2, 3.0)
            props = rng.dirichlet(np.ones(3))
            lambdas = rng.uniform(0.5, 2.0, size=3)
            h = 1e-5 * t
            slope = (_pop_surv(t - h, theta, props, lambdas, kappa)
                     - _pop_surv(t + h, theta, props, lambdas, kappa)) / (2.0 * h)
            density = np.exp(population_log_density(t, theta, props, lambdas, kappa))
            assert density == pytest.approx(slope, rel=1e-5)

    def test_density_mass_is_non_cure_probability(self):
        theta, props, lambdas, kappa = 1.2, np.array([0.3, 0.7]), np.array([0.8, 1.6]), 1.5
        mass, _ = integrate.quad(lambda t: np.exp(population_log_density(t, theta, props, lambdas, kappa)),
                                 0.0, 60.0, limit=200)
        assert mass == pytest.approx(1.0 - np.exp(-theta), abs=1e-7)


class TestDirichlet(object):

    def test_uniform_density(self):
        assert dirichlet_log_density([0.2, 0.3, 0.5], [1.0, 1.0, 1.0]) == pytest.approx(np.log(2.0), abs=1e-14)

    def test_two_part_density_integrates_to_one(self):
        mass, _ = integrate.quad(lambda x: np.exp(dirichlet_log_density([x, 1.0 - x], [2.5, 1.5])), 0.0, 1.0)
        assert mass == pytest.approx(1.0, abs=1e-7)

    def test_row_wise(self):
        ptilde = np.array([[0.2, 0.8], [0.5, 0.5]])
        alpha = np.array([[1.0, 2.0], [3.0, 3.0]])
        values = dirichlet_log_density(ptilde, alpha)
        assert values.shape == (2,)
        assert values[0] == pytest.approx(dirichlet_log_density(ptilde[0], alpha[0]), abs=1e-14)

    @pytest.mark.parametrize("ptilde", [[0.0, 1.0], [0.5, 0.6], [-0.1, 1.1]])
    def test_boundary_or_invalid_raises(self, ptilde):
        with pytest.raises(DomainError):
            dirichlet_log_density(ptilde, [1.0, 1.0])


class TestMrfPrior(object):

    def test_no_smoothing_is_independent_bernoulli(self):
        a = -1.3
        graph = MrfGraph(np.zeros((3, 3)), a, 0.0)
        configs = [np.array(c) for c in itertools.product((0, 1), repeat=3)]
        log_norm = np.log(sum(np.exp(mrf_log_prior(c, graph)) for c in configs))
        prob = np.exp(a) / (1.0 + np.exp(a))
        for c in configs:
            expected = indicator_log_prior(c, np.full(3, prob))
            assert mrf_log_prior(c, graph) - log_norm == pytest.approx(expected, abs=1e-12)

    def test_edges_counted_twice(self):
        weights = np.array([[0.0, 0.5], [0.5, 0.0]])
        graph = MrfGraph(weights, -2.0, 1.0)
        assert mrf_log_prior([1, 1], graph) == pytest.approx(-4.0 + 1.0, abs=1e-14)

    def test_flip_delta_matches_difference(self):
        rng = np.random.default_rng(5)
        raw = np.triu(rng.uniform(size=(4, 4)) * (rng.uniform(size=(4, 4)) < 0.6), 1)
        graph = MrfGraph(raw + raw.T, -1.1, 0.7)
        for c in itertools.product((0, 1), repeat=4):
            gamma = np.array(c)
            for k in range(4):
                flipped = gamma.copy()
                flipped[k] = 1 - flipped[k]
                expected = mrf_log_prior(flipped, graph) - mrf_log_prior(gamma, graph)
                assert mrf_flip_delta(gamma, k, graph) == pytest.approx(expected, abs=1e-12)

    def test_graph_must_be_symmetric(self):
        with pytest.raises(SpecError):
            MrfGraph(np.array([[0.0, 1.0], [0.0, 0.0]]), -1.0, 0.1)


class TestLikelihood(object):

    def test_matches_direct_composition_without_proportion_regression(self, dataset, state):
        spec = ModelSpec("noBVS1")
        derived = linear_predictors(state, dataset, measurement_error=False)
        expected = 0.0
        for i in range(dataset.n):
            t, theta, props = dataset.time[i], derived.theta[i], dataset.proportions[i]
            lambdas = derived.lam[i]
            if dataset.event[i]:
                expected += population_log_density(t, theta, props, lambdas, state.kappa)
            else:
                expected += np.log(_pop_surv(t, theta, props, lambdas, state.kappa))
        assert log_likelihood(state, dataset, spec) == pytest.approx(expected, rel=1e-10)

    def test_dirichlet_term_added_with_proportion_regression(self, dataset, state):
        derived = linear_predictors(state, dataset, measurement_error=True)
        expected = 0.0
        for i in range(dataset.n):
            t, theta, props = dataset.time[i], derived.theta[i], derived.props[i]
            if dataset.event[i]:
                expected += population_log_density(t, theta, props, derived.lam[i], state.kappa)
            else:
                expected += np.log(_pop_surv(t, theta, props, derived.lam[i], state.kappa))
            expected += dirichlet_log_density(dataset.proportions[i], derived.alpha[i])
        assert log_likelihood(state, dataset, ModelSpec("noBVS2")) == pytest.approx(expected, rel=1e-10)

    def test_pointwise_sums_to_total(self, dataset, state):
        spec = ModelSpec("Ber2")
        values = pointwise_log_likelihood(state, dataset, spec)
        assert values.shape == (dataset.n,)
        assert float(np.sum(values)) == pytest.approx(log_likelihood(state, dataset, spec), rel=1e-12)

    def test_clamped_exponent_is_counted(self, dataset, state):
        state.xi0 = 600.0
        derived = linear_predictors(state, dataset, measurement_error=False)
        assert derived.clamp_count >= dataset.n
        assert np.all(np.isfinite(derived.log_theta))


class TestConditionals(object):

    @staticmethod
    def _with(state, **changes):
        other = state.copy()
        for name, value in changes.items():
            setattr(other, name, value)
        return other

    @pytest.mark.parametrize("variant", ["noBVS1", "MRF2"])
    def test_beta_conditional_differences(self, variant, dataset, state):
        spec = make_spec(variant, dataset)
        j, l, v1, v2 = 1, 1, 0.4, -0.3
        low, high = state.copy(), state.copy()
        low.beta[l][j], high.beta[l][j] = v1, v2
        var = state.tau2[l]
        expected = (log_likelihood(low, dataset, spec) - log_likelihood(high, dataset, spec)
                    - 0.5 * (v1 ** 2 - v2 ** 2) / var)
        actual = logcond_beta(j, l, v1, state, dataset, spec) - logcond_beta(j, l, v2, state, dataset, spec)
        assert actual == pytest.approx(expected, abs=1e-8)

    def test_xi_conditional_differences(self, dataset, state):
        spec = ModelSpec("Ber1")
        expected = (log_likelihood(self._with(state, xi=np.array([0.5, state.xi[1]])), dataset, spec)
                    - log_likelihood(self._with(state, xi=np.array([-0.2, state.xi[1]])), dataset, spec)
                    - 0.5 * (0.5 ** 2 - 0.2 ** 2) / state.v2)
        actual = logcond_xi(0, 0.5, state, dataset, spec) - logcond_xi(0, -0.2, state, dataset, spec)
        assert actual == pytest.approx(expected, abs=1e-8)

    def test_kappa_conditional_differences(self, dataset, state):
        spec = ModelSpec("noBVS2")
        expected = (log_likelihood(self._with(state, kappa=2.0), dataset, spec)
                    - log_likelihood(self._with(state, kappa=0.8), dataset, spec)
                    - (2.0 - 0.8))
        actual = logcond_kappa(2.0, state, dataset, spec) - logcond_kappa(0.8, state, dataset, spec)
        assert actual == pytest.approx(expected, abs=1e-8)
        assert logcond_kappa(0.0, state, dataset, spec) == -np.inf

    def test_inactive_coefficient_raises(self, dataset):
        inactive = make_state(dataset, active=0)
        with pytest.raises(ContractError):
            logcond_beta(0, 0, 0.1, inactive, dataset, ModelSpec("Ber1"))

    def test_zeta_needs_proportion_regression(self, dataset, state):
        with pytest.raises(ContractError):
            logcond_zeta(0, 0, 0.1, state, dataset, ModelSpec("Ber1"))


class TestConjugate(object):

    def test_inclusion_probability_posterior(self):
        data = make_dataset(p_sizes=(2, 3))
        state = make_state(data)
        posts = conjugate_posteriors(state, data, ModelSpec("Ber2"))
        first = posts["pi"][0]
        assert first.family == "beta"
        assert np.allclose(first.a, [2.0, 2.0])
        assert np.allclose(first.b, [3.0, 3.0])
        assert np.allclose(posts["rho"][1].b, [5.0, 5.0, 5.0])

    def test_variance_posteriors(self, dataset, state):
        posts = conjugate_posteriors(state, dataset, ModelSpec("noBVS1"))
        assert posts["v2"].a == pytest.approx(5.0 + 0.5 * dataset.d)
        assert posts["v2"].b == pytest.approx(20.0 + 0.5 * float(np.sum(state.xi ** 2)))
        assert posts["tau2"][1].a == pytest.approx(5.0 + 1.5)
        assert "pi" not in posts and "w2" not in posts


class TestDomain(object):

    def test_variant_names(self):
        assert Variant.from_name("gptcm-mrf2") is Variant.MRF2
        assert Variant.from_name("ber1").selection == "bernoulli"
        with pytest.raises(SpecError):
            Variant.from_name("MRF3")

    def test_mrf_variant_needs_graph(self):
        with pytest.raises(SpecError):
            ModelSpec("MRF2")

    def test_default_inclusion_prior(self):
        hyper = HyperParams.default_for(10)
        assert hyper.b_pi == 10.0 and hyper.b_rho == 10.0
        assert hyper.mrf_a == pytest.approx(np.log(0.1 / 0.9))

    def test_spike_without_slab_is_rejected(self):
        state = ParameterState.zeros(1, [2], active=0)
        state.beta[0][1] = 0.3
        with pytest.raises(StateError):
            state.validate()

    def test_row_not_summing_to_one_is_named(self):
        data = make_dataset(n=6)
        props = data.proportions.copy()
        props[3] = props[3] * 0.98
        with pytest.raises(DatasetError) as err:
            SurvivalDataset.checked(data.time, data.event, data.clinical, data.cell_covariates, props)
        assert "proportions row 3" in str(err.value.message)
