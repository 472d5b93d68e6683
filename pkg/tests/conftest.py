#!/usr/bin/env python3
# coding=utf-8

"""
@author: guoyanfeng
@software: PyCharm
@time: 19-8-12 上午9:30
"""
import numpy as np
import pytest

from gptcm.domain import HyperParams, ModelSpec, MrfGraph, ParameterState, SurvivalDataset, Variant


def make_dataset(n=20, d=2, p_sizes=(2, 3), seed=7):
    """
    小数据集: 指数时间、约30%删失、Dirichlet比例
    """
    rng = np.random.default_rng(seed)
    L = len(p_sizes)
    time = rng.exponential(1.0, size=n) + 0.05
    event = (rng.uniform(size=n) < 0.7).astype(np.int8)
    clinical = rng.normal(size=(n, d))
    blocks = [rng.normal(size=(n, p)) for p in p_sizes]
    props = rng.dirichlet(np.full(L, 2.0), size=n)
    return SurvivalDataset.checked(time, event, clinical, blocks, props)


def make_state(data, seed=11, active=1):
    """
    随机但取值温和的参数状态
    """
    rng = np.random.default_rng(seed)
    state = ParameterState.zeros(data.d, data.p_sizes, kappa=1.3, active=active)
    state.xi0 = 0.2
    state.xi = rng.normal(0.0, 0.3, size=data.d)
    state.beta0 = rng.normal(0.0, 0.3, size=data.L)
    state.zeta0 = rng.normal(0.0, 0.3, size=data.L)
    for l, p in enumerate(data.p_sizes):
        if active:
            state.beta[l] = rng.normal(0.0, 0.3, size=p)
            state.zeta[l] = rng.normal(0.0, 0.3, size=p)
    return state.validate()


def chain_graph(dimension, a=-2.0, b=0.5):
    """相邻下标之间权重为1的链状图"""
    weights = np.zeros((dimension, dimension))
    index = np.arange(dimension - 1)
    weights[index, index + 1] = 1.0
    weights[index + 1, index] = 1.0
    return MrfGraph(weights, a, b)


def make_spec(variant, data):
    """按变体构造ModelSpec, MRF变体使用链状图"""
    kind = Variant.from_name(variant)
    if kind.selection != "mrf":
        return ModelSpec(kind, HyperParams())
    total = int(sum(data.p_sizes))
    graph_zeta = chain_graph(total) if kind.has_measurement_error else None
    return ModelSpec(kind, HyperParams(), chain_graph(total), graph_zeta)


@pytest.fixture
def dataset():
    return make_dataset()


@pytest.fixture
def state(dataset):
    return make_state(dataset)
