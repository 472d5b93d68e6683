#!/usr/bin/env python3
# coding=utf-8

"""
@author: guoyanfeng
@software: PyCharm
@time: 19-8-12 下午2:30
"""
import itertools

import numpy as np
import pytest
from scipy import stats
from scipy.special import gammaln, logsumexp

from gptcm.domain import HyperParams, ModelSpec, MrfGraph, ParameterState
from gptcm.exceptions import ContractError, DomainError, SamplerError
from gptcm.model_core import LikelihoodWorkspace, linear_predictors, mrf_log_prior
from gptcm.samplers import (LogDensity, SamplerDiagnostics, arms_abscissae, arms_sample, gibbs_draw_beta,
                            gibbs_draw_invgamma, indicator_block_update, rng_stream, slice_sample)
from tests.conftest import make_dataset


def _normal():
    return LogDensity(lambda x: -0.5 * x * x)


def _slice_chain(ld, x0, size, thin=1, seed=1):
    rng = rng_stream(seed)
    draws, x = np.empty(size), x0
    for k in range(size):
        for _ in range(thin):
            x = slice_sample(ld, x, width=1.0, rng=rng)
        draws[k] = x
    return draws


def _arms_chain(ld, x0, size, seed=1, scale=1.0):
    rng = rng_stream(seed)
    draws, x = np.empty(size), x0
    for k in range(size):
        x = arms_sample(ld, arms_abscissae(x, scale), rng=rng, current=x)
        draws[k] = x
    return draws


class TestRngStream(object):

    def test_same_key_same_sequence(self):
        assert np.array_equal(rng_stream(42, 1, 3).uniform(size=5), rng_stream(42, 1, 3).uniform(size=5))

    def test_different_keys_differ(self):
        base = rng_stream(42, 0, 0).uniform(size=5)
        assert not np.array_equal(base, rng_stream(42, 1, 0).uniform(size=5))
        assert not np.array_equal(base, rng_stream(42, 0, 1).uniform(size=5))
        assert not np.array_equal(base, rng_stream(43, 0, 0).uniform(size=5))


class TestSlice(object):

    def test_normal_moments(self):
        draws = _slice_chain(_normal(), 0.0, 8000)
        assert abs(draws.mean()) < 0.1
        assert draws.std() == pytest.approx(1.0, abs=0.08)

    def test_gamma_on_half_line(self):
        ld = LogDensity(lambda x: 2.0 * np.log(x) - x, lower=0.0)
        draws = _slice_chain(ld, 1.0, 8000)
        assert draws.min() > 0.0
        assert draws.mean() == pytest.approx(3.0, abs=0.15)

    def test_start_outside_support_raises(self):
        ld = LogDensity(lambda x: -x, lower=0.0)
        with pytest.raises(ContractError):
            slice_sample(ld, -1.0, rng=rng_stream(1))

    def test_diagnostics_count_proposals(self):
        diagnostics = SamplerDiagnostics()
        _ = [slice_sample(_normal(), 0.0, rng=rng_stream(1, 0, k), diagnostics=diagnostics, block="xi")
             for k in range(7)]
        assert diagnostics.get("xi", "proposals") == 7
        assert diagnostics.acceptance_rate("xi") == 1.0
        assert diagnostics.acceptance_rate("kappa") is None

    @pytest.mark.slow
    def test_normal_distribution(self):
        draws = _slice_chain(_normal(), 0.0, 50000, thin=5)
        assert stats.kstest(draws, "norm").statistic < 0.01


class TestArms(object):

    def test_normal_moments(self):
        draws = _arms_chain(_normal(), 0.0, 4000)
        assert abs(draws.mean()) < 0.1
        assert draws.std() == pytest.approx(1.0, abs=0.1)

    @pytest.mark.slow
    def test_normal_distribution(self):
        draws = _arms_chain(_normal(), 0.0, 50000, seed=3)
        assert stats.kstest(draws, "norm").statistic < 0.01

    @pytest.mark.slow
    def test_exact_on_piecewise_linear_density(self):
        draws = _arms_chain(LogDensity(lambda x: -abs(x)), 0.0, 50000, seed=6)
        assert abs(draws.mean()) < 0.03
        assert draws.var() == pytest.approx(2.0, abs=0.1)

    def test_bimodal_target(self):
        ld = LogDensity(lambda x: logsumexp([-0.5 * (x + 2.0) ** 2, -0.5 * (x - 2.0) ** 2]))
        rng = rng_stream(9)
        draws, x = np.empty(4000), 0.0
        for k in range(draws.size):
            x = arms_sample(ld, [-4.0, -2.0, 0.0, 2.0, 4.0], rng=rng, current=x)
            draws[k] = x
        assert np.mean(draws > 0) == pytest.approx(0.5, abs=0.06)
        assert np.mean(np.abs(draws)) == pytest.approx(2.0, abs=0.15)

    def test_bounded_support(self):
        ld = LogDensity(lambda x: 3.0 * np.log(x) + 1.0 * np.log1p(-x), lower=0.0, upper=1.0)
        rng = rng_stream(4)
        draws, x = np.empty(3000), 0.5
        for k in range(draws.size):
            x = arms_sample(ld, [0.2, 0.4, 0.6, 0.8], rng=rng, current=x)
            draws[k] = x
        assert np.all((draws > 0) & (draws < 1))
        assert draws.mean() == pytest.approx(4.0 / 6.0, abs=0.03)

    def test_degenerate_envelope_raises(self):
        ld = LogDensity(lambda x: 0.0 if abs(x) < 1e-3 else -np.inf)
        with pytest.raises(SamplerError):
            arms_sample(ld, [-2.0, -1.0, 0.0, 1.0, 2.0], rng=rng_stream(1), current=0.0)

    def test_nan_density_raises(self):
        ld = LogDensity(lambda x: np.nan if x > 0.5 else -0.5 * x * x)
        with pytest.raises(SamplerError):
            arms_sample(ld, [-2.0, -1.0, 0.0, 1.0, 2.0], rng=rng_stream(1), current=0.0)

    def test_abscissae_layout(self):
        assert np.allclose(arms_abscissae(1.0, 0.5), [0.0, 0.5, 1.0, 1.5, 2.0])
        assert np.allclose(arms_abscissae(0.0, 0.0), [-2.0, -1.0, 0.0, 1.0, 2.0])


class TestConjugateDraws(object):

    def test_beta_moments(self):
        rng = rng_stream(2)
        draws = np.array([gibbs_draw_beta(2.0, 30.0, rng) for _ in range(20000)])
        assert draws.mean() == pytest.approx(2.0 / 32.0, abs=0.002)

    def test_beta_vectorised(self):
        draws = gibbs_draw_beta(np.array([1.0, 2.0, 3.0]), np.array([3.0, 3.0, 3.0]), rng_stream(2))
        assert draws.shape == (3,)
        assert np.all((draws > 0) & (draws < 1))

    def test_invgamma_moments(self):
        rng = rng_stream(3)
        draws = np.array([gibbs_draw_invgamma(5.0, 20.0, rng) for _ in range(20000)])
        assert draws.mean() == pytest.approx(5.0, abs=0.1)

    @pytest.mark.parametrize("args", [(0.0, 1.0), (1.0, -2.0)])
    def test_invalid_parameters_raise(self, args):
        with pytest.raises(DomainError):
            gibbs_draw_invgamma(*args, rng_stream(1))
        with pytest.raises(DomainError):
            gibbs_draw_beta(*args, rng_stream(1))


def _path_graph(dimension, edges, a, b):
    weights = np.zeros((dimension, dimension))
    for i, j in edges:
        weights[i, j] = weights[j, i] = 1.0
    return MrfGraph(weights, a, b)


def _log_marginal(data, state, config, grid):
    """
    固定 theta/kappa/tau2 时 log f(D | gamma), 激活的系数在网格上做数值积分
    """
    kappa = state.kappa
    shift = gammaln(1.0 + 1.0 / kappa)
    theta = np.exp(state.xi0 + data.clinical @ state.xi)
    log_t = np.log(data.time)
    log_p = np.log(data.proportions)
    event = data.event.astype(bool)
    blocks, start = [], 0
    for l, p in enumerate(data.p_sizes):
        active = np.flatnonzero(config[start:start + p])
        start += p
        log_w = stats.norm.logpdf(grid, scale=np.sqrt(state.tau2[l])) + np.log(grid[1] - grid[0])
        if active.size:
            mesh = np.array(list(itertools.product(range(grid.size), repeat=active.size)))
            eta = grid[mesh] @ data.cell_covariates[l][:, active].T
            weight = log_w[mesh].sum(axis=1)
        else:
            eta, weight = np.zeros((1, data.n)), np.zeros(1)
        log_lambda = eta - shift
        z = np.exp(kappa * (log_t - log_lambda))
        blocks.append((weight, log_lambda, z))
    (w1, ll1, z1), (w2, ll2, z2) = blocks
    pieces = []
    for a in range(w1.size):
        one_minus_mix = np.exp(log_p[:, 0]) * -np.expm1(-z1[a]) + np.exp(log_p[:, 1]) * -np.expm1(-z2)
        dens = np.logaddexp(log_p[:, 0] - kappa * ll1[a] - z1[a], log_p[:, 1] - kappa * ll2 - z2)
        event_part = np.log(theta) + np.log(kappa) + (kappa - 1.0) * log_t + dens
        loglik = np.sum(-theta * one_minus_mix + np.where(event, event_part, 0.0), axis=1)
        pieces.append(w1[a] + w2 + loglik)
    return logsumexp(np.concatenate(pieces))


class TestIndicatorUpdate(object):

    @staticmethod
    def _prior_chain(spec, state, moves=40000, seed=5):
        # 第二个细胞类型只有一个协变量且不更新, 第一个块的4个指示变量在先验下游走
        data = make_dataset(n=10, d=1, p_sizes=(4, 1))
        workspace = LikelihoodWorkspace(data, measurement_error=False, prior_only=True)
        derived = linear_predictors(state, data, measurement_error=False)
        rng = rng_stream(seed)
        visits = np.zeros((moves, 4))
        for k in range(moves):
            move = indicator_block_update(0, "gamma", state, data, spec, rng, workspace, derived)
            if move.accepted:
                state.gamma[0], state.beta[0] = move.indicators, move.coefficients
            visits[k] = state.gamma[0]
        return visits

    def test_mrf_prior_matches_enumeration(self):
        graph = _path_graph(5, ((0, 1), (1, 2), (2, 3)), -1.0, 0.6)
        spec = ModelSpec("MRF1", HyperParams(), graph_beta=graph)
        configs = np.array(list(itertools.product((0, 1), repeat=4)), dtype=float)
        log_mass = np.array([mrf_log_prior(np.append(c, 0.0), graph) for c in configs])
        expected = np.exp(log_mass - logsumexp(log_mass)) @ configs

        visits = self._prior_chain(spec, ParameterState.zeros(1, [4, 1], active=0))
        assert np.allclose(visits.mean(axis=0), expected, atol=0.03)

    def test_mrf_without_smoothing_is_independent_bernoulli(self):
        graph = _path_graph(5, ((0, 1), (1, 2), (2, 3)), np.log(0.1 / 0.9), 0.0)
        spec = ModelSpec("MRF1", HyperParams(), graph_beta=graph)
        visits = self._prior_chain(spec, ParameterState.zeros(1, [4, 1], active=0), moves=100000, seed=8)
        assert np.allclose(visits.mean(axis=0), 0.1, atol=0.01)

    def test_bernoulli_prior_frequency(self):
        state = ParameterState.zeros(1, [4, 1], active=0, prob=0.3)
        visits = self._prior_chain(ModelSpec("Ber1"), state)
        assert np.allclose(visits.mean(axis=0), 0.3, atol=0.03)
        assert np.all(state.beta[0][state.gamma[0] == 0] == 0.0)

    def test_rejection_keeps_state(self):
        data = make_dataset(n=10, d=1, p_sizes=(4, 1))
        state = ParameterState.zeros(1, [4, 1], active=0, prob=1e-9)
        workspace = LikelihoodWorkspace(data, measurement_error=False)
        derived = linear_predictors(state, data, measurement_error=False)
        move = indicator_block_update(0, "gamma", state, data, ModelSpec("Ber1"), rng_stream(2), workspace, derived)
        assert not move.accepted
        assert move.indicators is state.gamma[0] and move.coefficients is state.beta[0]

    def test_unknown_block_raises(self):
        data = make_dataset(n=10, d=1, p_sizes=(4, 1))
        state = ParameterState.zeros(1, [4, 1])
        workspace = LikelihoodWorkspace(data, measurement_error=False)
        derived = linear_predictors(state, data, measurement_error=False)
        with pytest.raises(ContractError):
            indicator_block_update(0, "delta", state, data, ModelSpec("Ber1"), rng_stream(1), workspace, derived)

    @pytest.mark.slow
    def test_posterior_matches_enumeration(self):
        data = make_dataset(n=20, d=1, p_sizes=(2, 2), seed=21)
        graph = _path_graph(4, ((0, 1), (2, 3)), -0.5, 0.5)
        spec = ModelSpec("MRF1", HyperParams(), graph_beta=graph)
        state = ParameterState.zeros(1, [2, 2], kappa=1.3, variance=1.0, active=0)
        state.xi0 = 0.5

        grid = np.linspace(-5.0, 5.0, 41)
        configs = np.array(list(itertools.product((0, 1), repeat=4)), dtype=float)
        log_post = np.array([mrf_log_prior(c, graph) + _log_marginal(data, state, c, grid) for c in configs])
        expected = np.exp(log_post - logsumexp(log_post)) @ configs

        # kappa / tau2 / theta 固定, 交替做指示变量翻转和激活系数的切片更新
        workspace = LikelihoodWorkspace(data, measurement_error=False)
        rng = rng_stream(17)
        iterations, burn = 40000, 1000
        visits = np.zeros((iterations, 4))
        for it in range(iterations + burn):
            for l in range(data.L):
                derived = linear_predictors(state, data, measurement_error=False)
                move = indicator_block_update(l, "gamma", state, data, spec, rng, workspace, derived)
                if move.accepted:
                    state.gamma[l], state.beta[l] = move.indicators, move.coefficients
                for j in np.flatnonzero(state.gamma[l]):
                    derived = linear_predictors(state, data, measurement_error=False)
                    target = LogDensity(workspace.beta_target(l, int(j), state, derived))
                    state.beta[l][j] = slice_sample(target, state.beta[l][j], width=1.0, rng=rng)
            if it >= burn:
                visits[it - burn] = state.flat("gamma")
        state.validate()
        assert np.allclose(visits.mean(axis=0), expected, atol=0.03)


class TestDetailedBalance(object):

    @pytest.mark.slow
    @pytest.mark.parametrize("sampler", ["slice", "arms"])
    def test_dispersed_starts_agree(self, sampler):
        burn, size = 1000, 30000
        if sampler == "slice":
            low = _slice_chain(_normal(), -6.0, burn + size, thin=3, seed=31)
            high = _slice_chain(_normal(), 6.0, burn + size, thin=3, seed=32)
        else:
            low = _arms_chain(_normal(), -6.0, burn + size, seed=31)
            high = _arms_chain(_normal(), 6.0, burn + size, seed=32)
        assert stats.ks_2samp(low[burn:], high[burn:]).statistic < 0.02
