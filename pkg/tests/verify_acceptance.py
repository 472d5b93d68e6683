#!/usr/bin/env python3
# coding=utf-8

"""
@author: guoyanfeng
@software: PyCharm
@time: 19-8-16 下午3:40

完整长度的模拟研究: 低维恢复、预测排序、模型误设和高维选择, 全部标记为slow
"""
import numpy as np
import pytest

from gptcm.domain import HyperParams, ModelSpec, Variant
from gptcm.evaluation import (brier_score, credible_interval_covers, default_time_grid, integrated_brier_score,
                              kaplan_meier_curve, predict_survival, summarize, variant_metrics)
from gptcm.mcmc_engine import RunConfig, run_fit
from gptcm.simulation import (SimConfig, build_covariance, build_mrf_graph_from_precision, pseudo_mrf_graph,
                              simulate, simulate_validation)

pytestmark = pytest.mark.slow


def _fit(variant, data, graph, iterations, warmup, seed=1):
    kind = Variant.from_name(variant)
    graph_beta = graph if kind.selection == "mrf" else None
    graph_zeta = graph if kind.selection == "mrf" and kind.has_measurement_error else None
    spec = ModelSpec(kind, HyperParams(), graph_beta, graph_zeta).check_dimensions(data)
    return run_fit(spec, data, RunConfig(n_iterations=iterations, n_warmup=warmup, seed=seed, log_every=0))


def _simulated(preset, **overrides):
    cfg = SimConfig.from_preset(preset, seed=1, **overrides)
    data, truth = simulate(cfg)
    return cfg, data, truth


@pytest.fixture(scope="module")
def low_dim():
    cfg, data, truth = _simulated("low-dim")
    graph = build_mrf_graph_from_precision(build_covariance(cfg.p, cfg.L, cfg.rho, cfg.rho_blocks), cfg.L)
    fits = {name: _fit(name, data, graph, 25000, 5000) for name in ("MRF1", "MRF2")}
    return cfg, truth, fits


class TestLowDimensional(object):

    def test_recovery(self, low_dim):
        _, truth, fits = low_dim
        row = variant_metrics(summarize(fits["MRF2"]), truth)
        assert row["rmse_beta"] <= 0.15
        assert row["rmse_zeta"] <= 0.15
        for indicator in ("gamma", "eta"):
            for field in ("accuracy", "sensitivity", "specificity"):
                assert row["{}_{}".format(field, indicator)] >= 0.95

    def test_prediction_ordering(self, low_dim):
        cfg, _, fits = low_dim
        validation, _ = simulate_validation(cfg, n=200)
        grid = default_time_grid(validation.time, 0.8, 50)
        km = integrated_brier_score(brier_score(
            kaplan_meier_curve(validation.time, validation.event, grid, validation.n), validation, grid))
        ibs = {name: integrated_brier_score(brier_score(predict_survival(fit, validation, grid), validation, grid))
               for name, fit in fits.items()}
        assert ibs["MRF2"] <= ibs["MRF1"] <= km


class TestMisspecification(object):

    def test_cox_weibull_generator(self):
        cfg, data, truth = _simulated("cox-misspec")
        graph = pseudo_mrf_graph(cfg.p, cfg.L)
        for name in ("MRF1", "MRF2"):
            summary = summarize(_fit(name, data, graph, 25000, 5000))
            assert not summary.mpm["gamma"].any()
            assert variant_metrics(summary, truth)["specificity_gamma"] == 1.0
            covers, excludes = credible_interval_covers(summary, "xi", truth.xi)
            assert covers.all() and excludes.all()


class TestHighDimensional(object):

    def test_selection(self):
        cfg, data, truth = _simulated("high-dim")
        graph = build_mrf_graph_from_precision(build_covariance(cfg.p, cfg.L, cfg.rho, cfg.rho_blocks), cfg.L)
        rows = {name: variant_metrics(summarize(_fit(name, data, graph, 100000, 40000)), truth)
                for name in ("MRF2", "Ber2")}
        assert rows["MRF2"]["sensitivity_gamma"] >= 0.9
        assert rows["MRF2"]["specificity_gamma"] >= 0.99
        assert rows["MRF2"]["sensitivity_gamma"] >= rows["Ber2"]["sensitivity_gamma"]
        assert np.isfinite(rows["MRF2"]["rmse_beta"])
