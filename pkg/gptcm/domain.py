#!/usr/bin/env python3
# coding=utf-8

"""
@author: guoyanfeng
@software: PyCharm
@time: 19-8-3 上午10:12

GPTCM的领域类型: 数据集、模型设定、超参数、MRF图、参数状态和派生量
"""
import enum

import numpy as np
from scipy import sparse
from scipy.special import logit

from .exceptions import DatasetError, FuncArgsError, SpecError, StateError

__all__ = ("Variant", "HyperParams", "MrfGraph", "ModelSpec", "SurvivalDataset", "ParameterState",
           "DerivedQuantities", "SIMPLEX_TOL")

# 比例行和与1的最大偏差
SIMPLEX_TOL = 1e-8


class Variant(enum.Enum):
    """
    六个贝叶斯GPTCM变体
    """
    NOBVS1 = "noBVS1"
    NOBVS2 = "noBVS2"
    BER1 = "Ber1"
    BER2 = "Ber2"
    MRF1 = "MRF1"
    MRF2 = "MRF2"

    @classmethod
    def from_name(cls, name):
        """
        接受 mrf2 / MRF2 / GPTCM-MRF2 这几种写法
        Args:
            name: 变体名称
        Returns:
            Variant
        """
        if isinstance(name, cls):
            return name
        key = str(name).strip().lower()
        if key.startswith("gptcm-"):
            key = key[len("gptcm-"):]
        for member in cls:
            if member.value.lower() == key:
                return member
        raise SpecError("Unknown variant '{}', expected one of {}".format(name, [m.value for m in cls]))

    @property
    def has_measurement_error(self):
        """带Dirichlet测量误差回归的变体, 即 *2"""
        return self.value.endswith("2")

    @property
    def selection(self):
        """变量选择先验: none / bernoulli / mrf"""
        if self in (Variant.NOBVS1, Variant.NOBVS2):
            return "none"
        if self in (Variant.BER1, Variant.BER2):
            return "bernoulli"
        return "mrf"

    @property
    def has_selection(self):
        return self.selection != "none"


class HyperParams(object):
    """
    固定的超参数, 默认值: kappa ~ Gamma(1, 1), 所有方差 IGamma(5, 20), pi/rho ~ Beta(1, c*p), a = logit(s)
    """
    __slots__ = ["a_kappa", "b_kappa", "a_v", "b_v", "a_v0", "b_v0", "a_tau", "b_tau", "a_tau0", "b_tau0",
                 "a_w", "b_w", "a_w0", "b_w0", "a_pi", "b_pi", "a_rho", "b_rho", "c", "s"]

    def __init__(self, *, a_kappa=1.0, b_kappa=1.0, a_v=5.0, b_v=20.0, a_v0=5.0, b_v0=20.0, a_tau=5.0, b_tau=20.0,
                 a_tau0=5.0, b_tau0=20.0, a_w=5.0, b_w=20.0, a_w0=5.0, b_w0=20.0, a_pi=1.0, b_pi=None, a_rho=1.0,
                 b_rho=None, c=1.0, s=0.1):
        self.a_kappa = float(a_kappa)
        self.b_kappa = float(b_kappa)
        self.a_v = float(a_v)
        self.b_v = float(b_v)
        self.a_v0 = float(a_v0)
        self.b_v0 = float(b_v0)
        self.a_tau = float(a_tau)
        self.b_tau = float(b_tau)
        self.a_tau0 = float(a_tau0)
        self.b_tau0 = float(b_tau0)
        self.a_w = float(a_w)
        self.b_w = float(b_w)
        self.a_w0 = float(a_w0)
        self.b_w0 = float(b_w0)
        self.a_pi = float(a_pi)
        # None 表示 b = c * p, 在 resolve 时按协变量个数确定
        self.b_pi = None if b_pi is None else float(b_pi)
        self.a_rho = float(a_rho)
        self.b_rho = None if b_rho is None else float(b_rho)
        self.c = float(c)
        self.s = float(s)

    @classmethod
    def default_for(cls, p, **overrides):
        """
        按协变量个数p生成默认超参数
        Args:
            p: 每个细胞类型的协变量个数
            overrides: 需要覆盖的键
        Returns:
            HyperParams
        """
        hyper = cls(**overrides)
        return hyper.resolve(p)

    def resolve(self, p):
        """
        把 b_pi / b_rho 的缺省值 c*p 固定下来
        """
        values = self.to_dict()
        if values["b_pi"] is None:
            values["b_pi"] = self.c * p
        if values["b_rho"] is None:
            values["b_rho"] = self.c * p
        return HyperParams(**values)

    def inclusion_prior(self, name, p):
        """
        Beta超先验的参数对, b缺省时取 c*p
        Args:
            name: "pi" 或 "rho"
            p: 该细胞类型的协变量个数
        Returns:
            (a, b)
        """
        a, b = (self.a_pi, self.b_pi) if name == "pi" else (self.a_rho, self.b_rho)
        return a, (self.c * p if b is None else b)

    @property
    def mrf_a(self):
        """MRF稀疏参数 a = logit(s)"""
        return float(logit(self.s))

    def to_dict(self):
        return {name: getattr(self, name) for name in self.__slots__}

    @classmethod
    def from_dict(cls, values):
        unknown = set(values) - set(cls.__slots__)
        if unknown:
            raise SpecError("Unknown hyperparameter(s): {}".format(sorted(unknown)))
        return cls(**values)

    def validate(self):
        """
        所有形状/率参数严格为正, s在(0,1)内, c>0
        """
        problems = []
        for name in self.__slots__:
            value = getattr(self, name)
            if name == "s":
                if not 0.0 < value < 1.0:
                    problems.append("s={} must lie in (0, 1)".format(value))
            elif value is not None and not (np.isfinite(value) and value > 0):
                problems.append("{}={} must be strictly positive".format(name, value))
        if problems:
            raise SpecError("; ".join(problems))
        return self


class MrfGraph(object):
    """
    MRF先验的图: 对称稀疏权重矩阵(零对角, 权重在[0,1]), 稀疏参数a和平滑强度b>=0
    向量顺序为 vec[(gamma_1, ..., gamma_L)], 第l个细胞类型的第j个系数下标为 offset_l + j
    """
    __slots__ = ["weights", "a", "b"]

    def __init__(self, weights, a, b):
        self.weights = sparse.csr_matrix(weights, dtype=float)
        self.weights.sort_indices()
        self.a = float(a)
        self.b = float(b)
        self.validate()

    @property
    def dimension(self):
        return self.weights.shape[0]

    def validate(self):
        weights = self.weights
        if weights.shape[0] != weights.shape[1]:
            raise SpecError("MRF weight matrix must be square, got {}".format(weights.shape))
        if weights.nnz and abs(weights - weights.T).max() > 1e-12:
            raise SpecError("MRF weight matrix must be symmetric")
        if weights.nnz and np.any(weights.diagonal() != 0):
            raise SpecError("MRF weight matrix must have a zero diagonal")
        if weights.nnz and (weights.data.min() < 0 or weights.data.max() > 1):
            raise SpecError("MRF weights must lie in [0, 1]")
        if not np.isfinite(self.a):
            raise SpecError("MRF sparsity a must be finite")
        if not (np.isfinite(self.b) and self.b >= 0):
            raise SpecError("MRF smoothing b={} must be >= 0".format(self.b))
        return self

    def neighbours(self, k):
        """
        第k个变量的邻居下标和权重
        """
        start, end = self.weights.indptr[k], self.weights.indptr[k + 1]
        return self.weights.indices[start:end], self.weights.data[start:end]


class ModelSpec(object):
    """
    变体 + 超参数 + 可选的MRF图
    """
    __slots__ = ["variant", "hyper", "graph_beta", "graph_zeta"]

    def __init__(self, variant, hyper=None, graph_beta=None, graph_zeta=None):
        self.variant = Variant.from_name(variant)
        self.hyper = hyper if hyper is not None else HyperParams()
        self.graph_beta = graph_beta
        self.graph_zeta = graph_zeta
        self.validate()

    def validate(self):
        self.hyper.validate()
        variant = self.variant
        if variant.selection == "mrf":
            if self.graph_beta is None:
                raise SpecError("{} requires an MRF graph for gamma".format(variant.value))
            if variant.has_measurement_error and self.graph_zeta is None:
                raise SpecError("{} requires an MRF graph for eta".format(variant.value))
            if not variant.has_measurement_error and self.graph_zeta is not None:
                raise SpecError("{} has no proportion regression, graph for eta is not allowed".format(
                    variant.value))
        elif self.graph_beta is not None or self.graph_zeta is not None:
            raise SpecError("{} does not use MRF graphs".format(variant.value))
        return self

    @property
    def has_measurement_error(self):
        return self.variant.has_measurement_error

    def check_dimensions(self, data):
        """
        检查模型设定与数据的维度是否一致
        """
        total = int(sum(data.p_sizes))
        for name, graph in (("gamma", self.graph_beta), ("eta", self.graph_zeta)):
            if graph is not None and graph.dimension != total:
                raise FuncArgsError("MRF graph for {} has dimension {}, data has pL={}".format(
                    name, graph.dimension, total))
        return self


class SurvivalDataset(object):
    """
    观测数据: 观测时间、删失指示、临床协变量X0、L个细胞类型协变量矩阵、观测比例
    """
    __slots__ = ["time", "event", "clinical", "cell_covariates", "proportions"]

    def __init__(self, time, event, clinical, cell_covariates, proportions):
        self.time = np.asarray(time, dtype=float)
        self.event = np.asarray(event, dtype=np.int8)
        clinical = np.asarray(clinical, dtype=float)
        self.clinical = clinical.reshape(-1, 1) if clinical.ndim == 1 else clinical
        self.cell_covariates = [np.asarray(x, dtype=float) for x in cell_covariates]
        self.proportions = np.asarray(proportions, dtype=float)

    @classmethod
    def checked(cls, time, event, clinical, cell_covariates, proportions):
        """
        构造并校验, 有问题时抛出DatasetError, 列出所有问题
        """
        dataset = cls(time, event, clinical, cell_covariates, proportions)
        dataset.check()
        return dataset

    @property
    def n(self):
        return self.time.shape[0]

    @property
    def d(self):
        return self.clinical.shape[1]

    @property
    def L(self):
        return len(self.cell_covariates)

    @property
    def p_sizes(self):
        return [x.shape[1] if x.ndim == 2 else 0 for x in self.cell_covariates]

    @property
    def offsets(self):
        return np.concatenate([[0], np.cumsum(self.p_sizes)]).astype(int)

    def validate(self):
        """
        校验数据集不变量
        Returns:
            问题列表, 为空表示通过
        """
        problems = []
        n = self.time.shape[0]
        if self.time.ndim != 1:
            problems.append("time must be one-dimensional")
        if not np.all(np.isfinite(self.time)):
            for i in np.flatnonzero(~np.isfinite(self.time)):
                problems.append("time row {} is not finite".format(i))
        else:
            for i in np.flatnonzero(self.time <= 0):
                problems.append("time row {} = {} is not strictly positive".format(i, self.time[i]))
        if self.event.shape != (n,):
            problems.append("event has {} rows, expected {}".format(self.event.shape[0], n))
        else:
            for i in np.flatnonzero((self.event != 0) & (self.event != 1)):
                problems.append("event row {} = {} is not 0 or 1".format(i, self.event[i]))
        if self.clinical.ndim != 2 or self.clinical.shape[0] != n:
            problems.append("clinical has {} rows, expected {}".format(self.clinical.shape[0], n))
        for i, k in zip(*np.nonzero(~np.isfinite(self.clinical))):
            problems.append("clinical row {} column {} is not finite".format(i, k))
        if not self.cell_covariates:
            problems.append("at least one cell-type covariate block is required")
        for l, block in enumerate(self.cell_covariates):
            name = "X{}".format(l + 1)
            if block.ndim != 2:
                problems.append("{} must be a matrix".format(name))
                continue
            if block.shape[0] != n:
                problems.append("{} has {} rows, expected {}".format(name, block.shape[0], n))
            for i, k in zip(*np.nonzero(~np.isfinite(block))):
                problems.append("{} row {} column {} is not finite".format(name, i, k))
        props = self.proportions
        if props.ndim != 2 or props.shape != (n, len(self.cell_covariates)):
            problems.append("proportions has shape {}, expected ({}, {})".format(
                props.shape, n, len(self.cell_covariates)))
        else:
            finite = np.isfinite(props).all(axis=1)
            for i in np.flatnonzero(~finite):
                problems.append("proportions row {} is not finite".format(i))
            interior = ((props > 0) & (props < 1)).all(axis=1)
            for i in np.flatnonzero(finite & ~interior):
                problems.append("proportions row {} has an entry outside (0, 1)".format(i))
            row_sum = props.sum(axis=1)
            for i in np.flatnonzero(finite & (np.abs(row_sum - 1.0) > SIMPLEX_TOL)):
                problems.append("proportions row {} sums to {!r}, expected 1".format(i, float(row_sum[i])))
        return problems

    def check(self):
        problems = self.validate()
        if problems:
            raise DatasetError(problems)
        return self


class ParameterState(object):
    """
    参数空间中的一个点

    beta/gamma/zeta/eta/pi/rho 都是长度为L的列表, 第l项是长度p_l的数组
    """
    __slots__ = ["xi0", "xi", "v2", "v02", "kappa", "beta0", "beta", "gamma", "tau2", "tau02", "zeta0", "zeta",
                 "eta", "w2", "w02", "pi", "rho"]

    def __init__(self, *, xi0, xi, v2, v02, kappa, beta0, beta, gamma, tau2, tau02, zeta0, zeta, eta, w2, w02, pi,
                 rho):
        self.xi0 = float(xi0)
        self.xi = np.asarray(xi, dtype=float)
        self.v2 = float(v2)
        self.v02 = float(v02)
        self.kappa = float(kappa)
        self.beta0 = np.asarray(beta0, dtype=float)
        self.beta = [np.asarray(b, dtype=float) for b in beta]
        self.gamma = [np.asarray(g, dtype=np.int8) for g in gamma]
        self.tau2 = np.asarray(tau2, dtype=float)
        self.tau02 = float(tau02)
        self.zeta0 = np.asarray(zeta0, dtype=float)
        self.zeta = [np.asarray(z, dtype=float) for z in zeta]
        self.eta = [np.asarray(e, dtype=np.int8) for e in eta]
        self.w2 = np.asarray(w2, dtype=float)
        self.w02 = float(w02)
        self.pi = [np.asarray(x, dtype=float) for x in pi]
        self.rho = [np.asarray(x, dtype=float) for x in rho]

    @classmethod
    def zeros(cls, d, p_sizes, *, kappa=1.0, variance=1.0, active=1, prob=0.5):
        """
        所有系数为0的状态, 主要用于测试和初始化
        """
        L = len(p_sizes)
        return cls(xi0=0.0, xi=np.zeros(d), v2=variance, v02=variance, kappa=kappa, beta0=np.zeros(L),
                   beta=[np.zeros(p) for p in p_sizes], gamma=[np.full(p, active) for p in p_sizes],
                   tau2=np.full(L, variance), tau02=variance, zeta0=np.zeros(L),
                   zeta=[np.zeros(p) for p in p_sizes], eta=[np.full(p, active) for p in p_sizes],
                   w2=np.full(L, variance), w02=variance, pi=[np.full(p, prob) for p in p_sizes],
                   rho=[np.full(p, prob) for p in p_sizes])

    def copy(self):
        return ParameterState(xi0=self.xi0, xi=self.xi.copy(), v2=self.v2, v02=self.v02, kappa=self.kappa,
                              beta0=self.beta0.copy(), beta=[b.copy() for b in self.beta],
                              gamma=[g.copy() for g in self.gamma], tau2=self.tau2.copy(), tau02=self.tau02,
                              zeta0=self.zeta0.copy(), zeta=[z.copy() for z in self.zeta],
                              eta=[e.copy() for e in self.eta], w2=self.w2.copy(), w02=self.w02,
                              pi=[x.copy() for x in self.pi], rho=[x.copy() for x in self.rho])

    @property
    def L(self):
        return self.beta0.shape[0]

    def flat(self, name):
        """
        把按细胞类型分块的参数拼成一个向量 vec[(x_1, ..., x_L)]
        """
        value = getattr(self, name)
        if isinstance(value, list):
            return np.concatenate(value) if value else np.zeros(0)
        return np.atleast_1d(np.asarray(value, dtype=float))

    def validate(self):
        """
        校验: gamma=0 => beta=0, eta=0 => zeta=0, 方差和kappa严格为正, 概率在(0,1)内
        """
        problems = []
        if not (np.isfinite(self.kappa) and self.kappa > 0):
            problems.append("kappa={} must be positive".format(self.kappa))
        scalars = {"v2": self.v2, "v02": self.v02, "tau02": self.tau02, "w02": self.w02}
        for name, value in scalars.items():
            if not (np.isfinite(value) and value > 0):
                problems.append("{}={} must be positive".format(name, value))
        for name in ("tau2", "w2"):
            value = getattr(self, name)
            if not np.all(np.isfinite(value) & (value > 0)):
                problems.append("{} entries must be positive".format(name))
        for coef_name, ind_name in (("beta", "gamma"), ("zeta", "eta")):
            for l, (coef, ind) in enumerate(zip(getattr(self, coef_name), getattr(self, ind_name))):
                if coef.shape != ind.shape:
                    problems.append("{}[{}] and {}[{}] differ in length".format(coef_name, l, ind_name, l))
                    continue
                if np.any((ind != 0) & (ind != 1)):
                    problems.append("{}[{}] must be binary".format(ind_name, l))
                for j in np.flatnonzero((ind == 0) & (coef != 0)):
                    problems.append("{}[{}][{}]=0 but {} is {}".format(ind_name, l, j, coef_name, coef[j]))
                if not np.all(np.isfinite(coef)):
                    problems.append("{}[{}] is not finite".format(coef_name, l))
        for name in ("pi", "rho"):
            for l, prob in enumerate(getattr(self, name)):
                if np.any((prob <= 0) | (prob >= 1)):
                    problems.append("{}[{}] entries must lie in (0, 1)".format(name, l))
        for name in ("xi0", "xi", "beta0", "zeta0"):
            if not np.all(np.isfinite(getattr(self, name))):
                problems.append("{} is not finite".format(name))
        if problems:
            raise StateError("; ".join(problems))
        return self

    def check_dimensions(self, data):
        """
        检查状态与数据维度一致
        """
        if self.xi.shape[0] != data.d:
            raise FuncArgsError("xi has length {}, clinical has {} columns".format(self.xi.shape[0], data.d))
        if self.L != data.L:
            raise FuncArgsError("state has L={}, data has L={}".format(self.L, data.L))
        for l, p in enumerate(data.p_sizes):
            for name in ("beta", "gamma", "zeta", "eta", "pi", "rho"):
                if getattr(self, name)[l].shape[0] != p:
                    raise FuncArgsError("{}[{}] has length {}, X{} has {} columns".format(
                        name, l, getattr(self, name)[l].shape[0], l + 1, p))
        return self


class DerivedQuantities(object):
    """
    由参数状态和数据得到的派生量

    theta: (n,), mu/lambda/alpha/props/log_surv: (n, L), log_surv 为 log S_l(t_i)
    """
    __slots__ = ["log_theta", "log_mu", "log_lambda", "log_alpha", "props", "log_surv", "clamp_count"]

    def __init__(self, log_theta, log_mu, log_lambda, log_alpha, props, log_surv, clamp_count=0):
        self.log_theta = log_theta
        self.log_mu = log_mu
        self.log_lambda = log_lambda
        self.log_alpha = log_alpha
        self.props = props
        self.log_surv = log_surv
        self.clamp_count = int(clamp_count)

    @property
    def theta(self):
        return np.exp(self.log_theta)

    @property
    def mu(self):
        return np.exp(self.log_mu)

    @property
    def lam(self):
        return np.exp(self.log_lambda)

    @property
    def alpha(self):
        return None if self.log_alpha is None else np.exp(self.log_alpha)

    @property
    def surv(self):
        return np.exp(self.log_surv)
