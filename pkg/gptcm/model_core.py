#!/usr/bin/env python3
# coding=utf-8

"""
@author: guoyanfeng
@software: PyCharm
@time: 19-8-3 下午4:20

GPTCM的似然、先验、全条件密度和共轭后验, 都是参数状态和数据集的纯函数

约定:
    S_pop(t) = exp(-theta * (1 - sum_l p_l S_l(t))), S_l(t) = exp(-(t / lambda_l)^kappa)
    f_pop(t) = S_pop(t) * theta * kappa * t^(kappa-1) * sum_l p_l lambda_l^(-kappa) S_l(t)
    MRF先验的二次型 gamma' G gamma 中每条边计算两次
"""
from collections import namedtuple

import numpy as np
from scipy.special import gammaln, logsumexp

from .domain import SIMPLEX_TOL, DerivedQuantities, ParameterState
from .exceptions import ContractError, DomainError, FuncArgsError

__all__ = ("EXP_CLAMP", "ConjugatePair", "weibull_survival", "weibull_scale_from_mean", "population_survival",
           "population_log_density", "dirichlet_log_density", "linear_predictors", "pointwise_log_likelihood",
           "log_likelihood", "mrf_log_prior", "indicator_log_prior", "logcond_beta", "logcond_beta0", "logcond_xi",
           "logcond_xi0", "logcond_zeta", "logcond_zeta0", "logcond_kappa", "conjugate_posteriors",
           "LikelihoodWorkspace")

# exp的参数截断在 [-EXP_CLAMP, EXP_CLAMP]
EXP_CLAMP = 500.0
# sum_l p_l S_l 的下界
MIX_FLOOR = 1e-300
_LOG_2PI = np.log(2.0 * np.pi)

ConjugatePair = namedtuple("ConjugatePair", ["family", "a", "b"])


def _require_positive(**values):
    for name, value in values.items():
        value = np.asarray(value, dtype=float)
        if not np.all(np.isfinite(value) & (value > 0)):
            raise DomainError("{} must be strictly positive, got {}".format(name, value.tolist()))


def _require_simplex(name, props, interior=False):
    props = np.asarray(props, dtype=float)
    if np.any(~np.isfinite(props)) or np.any(props < 0):
        raise DomainError("{} must be a composition, got {}".format(name, props.tolist()))
    if interior and np.any((props <= 0) | (props >= 1)):
        raise DomainError("{} must lie strictly inside the simplex, got {}".format(name, props.tolist()))
    if np.any(np.abs(props.sum(axis=-1) - 1.0) > SIMPLEX_TOL):
        raise DomainError("{} must sum to 1 within {}, got {}".format(name, SIMPLEX_TOL, props.sum(axis=-1)))
    return props


def _clamp(x):
    """
    截断exp的参数
    Returns:
        (截断后的数组, 被截断的元素个数)
    """
    x = np.asarray(x, dtype=float)
    count = int(np.count_nonzero(np.abs(x) > EXP_CLAMP))
    if count:
        x = np.clip(x, -EXP_CLAMP, EXP_CLAMP)
    return x, count


def _normal_logpdf(x, var):
    return -0.5 * (_LOG_2PI + np.log(var)) - 0.5 * np.square(x) / var


def weibull_survival(t, lam, kappa):
    """
    Weibull生存函数 exp(-(t/lambda)^kappa)
    Args:
        t: 时间, 正数或者数组
        lam: 尺度参数
        kappa: 形状参数
    Returns:
        生存概率
    """
    _require_positive(t=t, lam=lam, kappa=kappa)
    return np.exp(-np.power(np.asarray(t, dtype=float) / lam, kappa))


def weibull_scale_from_mean(mu, kappa):
    """
    由Weibull均值得到尺度参数 lambda = mu / Gamma(1 + 1/kappa)
    """
    _require_positive(mu=mu, kappa=kappa)
    return np.asarray(mu, dtype=float) / np.exp(gammaln(1.0 + 1.0 / np.asarray(kappa, dtype=float)))


def population_survival(t, theta, props, surv):
    """
    人群生存函数 exp(-theta * (1 - sum_l p_l S_l(t)))
    Args:
        t: 时间, 只做定义域校验
        theta: Poisson率
        props: 长度L的比例
        surv: 长度L的S_l(t)
    Returns:
        生存概率, 取值在 (exp(-theta), 1]
    """
    _require_positive(t=t, theta=theta)
    props = _require_simplex("props", props)
    surv = np.asarray(surv, dtype=float)
    if np.any((surv < 0) | (surv > 1)):
        raise DomainError("surv entries must lie in [0, 1], got {}".format(surv.tolist()))
    mix = max(float(np.dot(props, surv)), MIX_FLOOR)
    return float(np.exp(-theta * (1.0 - min(mix, 1.0))))


def population_log_density(t, theta, props, lambdas, kappa):
    """
    人群密度 f_pop = -dS_pop/dt 的对数
    """
    _require_positive(t=t, theta=theta, lambdas=lambdas, kappa=kappa)
    props = _require_simplex("props", props)
    log_lambda = np.log(np.asarray(lambdas, dtype=float))
    z = np.exp(kappa * (np.log(t) - log_lambda))
    # 1 - sum p_l S_l = sum p_l (1 - S_l)
    one_minus_mix = float(np.dot(props, -np.expm1(-z)))
    with np.errstate(divide="ignore"):
        log_terms = np.log(props) - kappa * log_lambda - z
    return float(-theta * one_minus_mix + np.log(theta) + np.log(kappa) + (kappa - 1.0) * np.log(t)
                 + logsumexp(log_terms))


def dirichlet_log_density(ptilde, alpha):
    """
    Dirichlet(alpha) 的对数密度, 支持按行计算
    Args:
        ptilde: 长度L的组成或者 (n, L) 矩阵, 必须严格在单纯形内部
        alpha: 与ptilde同形状的正数
    Returns:
        对数密度, 标量或长度n的数组
    """
    _require_positive(alpha=alpha)
    ptilde = _require_simplex("ptilde", ptilde, interior=True)
    alpha = np.asarray(alpha, dtype=float)
    return _dirichlet_terms(np.log(ptilde), np.log(alpha))


def _dirichlet_terms(log_ptilde, log_alpha):
    alpha = np.exp(log_alpha)
    values = (gammaln(alpha.sum(axis=-1)) - gammaln(alpha).sum(axis=-1)
              + ((alpha - 1.0) * log_ptilde).sum(axis=-1))
    return float(values) if np.ndim(values) == 0 else values


def linear_predictors(state: ParameterState, data, measurement_error=True):
    """
    计算派生量 theta, mu, lambda, alpha, p 和 S_l(t_i)
    Args:
        state: 参数状态
        data: 数据集
        measurement_error: False 时直接使用观测比例作为 p (变体 *1)
    Returns:
        DerivedQuantities, 其中clamp_count为被截断的exp参数个数
    """
    state.check_dimensions(data)
    log_theta, c0 = _clamp(state.xi0 + data.clinical @ state.xi)
    log_mu, c1 = _clamp(np.column_stack([
        state.beta0[l] + data.cell_covariates[l] @ state.beta[l] for l in range(data.L)]))
    log_lambda = log_mu - gammaln(1.0 + 1.0 / state.kappa)
    clamp_count = c0 + c1
    if measurement_error:
        log_alpha, c2 = _clamp(np.column_stack([
            state.zeta0[l] + data.cell_covariates[l] @ state.zeta[l] for l in range(data.L)]))
        clamp_count += c2
        props = np.exp(log_alpha - logsumexp(log_alpha, axis=1, keepdims=True))
    else:
        log_alpha = None
        props = data.proportions.copy()
    log_z, c3 = _clamp(state.kappa * (np.log(data.time)[:, None] - log_lambda))
    return DerivedQuantities(log_theta, log_mu, log_lambda, log_alpha, props, -np.exp(log_z),
                             clamp_count=clamp_count + c3)


class LikelihoodWorkspace(object):
    """
    似然计算的工作区, 缓存与参数无关的数据变换

    mcmc引擎在每个坐标更新时只替换派生量的一列, 纯函数形式的logcond_*也通过它计算,
    这样两者使用同一套公式
    """

    def __init__(self, data, measurement_error=True, prior_only=False):
        self.data = data
        self.measurement_error = measurement_error
        self.prior_only = prior_only
        self.log_t = np.log(data.time)
        self.event = data.event.astype(bool)
        self.log_ptilde = np.log(data.proportions)

    def survival_terms(self, log_theta, log_lambda, log_props, kappa):
        """
        每个个体的生存部分对数似然 delta*log f_pop + (1-delta)*log S_pop
        Args:
            log_theta: (n,)
            log_lambda: (n, L)
            log_props: (n, L)
            kappa: 形状参数
        Returns:
            (n,) 数组
        """
        log_z = np.minimum(kappa * (self.log_t[:, None] - log_lambda), EXP_CLAMP)
        z = np.exp(log_z)
        props = np.exp(log_props)
        one_minus_mix = np.sum(props * -np.expm1(-z), axis=1)
        log_spop = -np.exp(log_theta) * one_minus_mix
        dens = logsumexp(log_props - kappa * log_lambda - z, axis=1)
        event_part = log_theta + np.log(kappa) + (kappa - 1.0) * self.log_t + dens
        return log_spop + np.where(self.event, event_part, 0.0)

    def dirichlet_terms(self, log_alpha):
        """每个个体的 log f(p~_i | alpha_i)"""
        return _dirichlet_terms(self.log_ptilde, log_alpha)

    def pointwise(self, log_theta, log_lambda, log_alpha, kappa):
        """
        每个个体的完整对数似然, log_alpha为None时不含Dirichlet项, 比例取观测值
        """
        if self.prior_only:
            return np.zeros(self.data.n)
        if log_alpha is None:
            return self.survival_terms(log_theta, log_lambda, self.log_ptilde, kappa)
        log_props = log_alpha - logsumexp(log_alpha, axis=1, keepdims=True)
        values = self.survival_terms(log_theta, log_lambda, log_props, kappa)
        if self.measurement_error:
            values = values + self.dirichlet_terms(log_alpha)
        return values

    def total(self, log_theta, log_lambda, log_alpha, kappa):
        if self.prior_only:
            return 0.0
        return float(np.sum(self.pointwise(log_theta, log_lambda, log_alpha, kappa)))

    def derived_pointwise(self, derived: DerivedQuantities, kappa):
        return self.pointwise(derived.log_theta, derived.log_lambda, derived.log_alpha, kappa)

    # 以下为单坐标条件密度的构造器, 返回 x -> 对数似然 + 坐标的对数先验

    def beta_target(self, l, j, state, derived):
        """
        beta_jl 的条件密度, j为None时表示截距 beta_0l
        """
        column = self.data.cell_covariates[l][:, j] if j is not None else None
        current = state.beta[l][j] if j is not None else state.beta0[l]
        var = state.tau2[l] if j is not None else state.tau02
        base = derived.log_mu[:, l] - (column * current if column is not None else current)
        shift = gammaln(1.0 + 1.0 / state.kappa)
        log_lambda = derived.log_lambda.copy()
        log_theta, log_alpha, kappa = derived.log_theta, derived.log_alpha, state.kappa

        def target(x):
            eta = base + (column * x if column is not None else x)
            log_lambda[:, l] = np.clip(eta, -EXP_CLAMP, EXP_CLAMP) - shift
            return self.total(log_theta, log_lambda, log_alpha, kappa) + _normal_logpdf(x, var)

        return target

    def zeta_target(self, l, j, state, derived):
        """
        zeta_jl 的条件密度, j为None时表示截距 zeta_0l
        """
        if derived.log_alpha is None:
            raise ContractError("zeta conditionals exist only for variants with the proportion regression")
        column = self.data.cell_covariates[l][:, j] if j is not None else None
        current = state.zeta[l][j] if j is not None else state.zeta0[l]
        var = state.w2[l] if j is not None else state.w02
        base = derived.log_alpha[:, l] - (column * current if column is not None else current)
        log_alpha = derived.log_alpha.copy()
        log_theta, log_lambda, kappa = derived.log_theta, derived.log_lambda, state.kappa

        def target(x):
            eta = base + (column * x if column is not None else x)
            log_alpha[:, l] = np.clip(eta, -EXP_CLAMP, EXP_CLAMP)
            return self.total(log_theta, log_lambda, log_alpha, kappa) + _normal_logpdf(x, var)

        return target

    def xi_target(self, k, state, derived):
        """
        xi_k 的条件密度, k为None时表示截距 xi_0
        """
        column = self.data.clinical[:, k] if k is not None else None
        current = state.xi[k] if k is not None else state.xi0
        var = state.v2 if k is not None else state.v02
        base = derived.log_theta - (column * current if column is not None else current)
        log_lambda, log_alpha, kappa = derived.log_lambda, derived.log_alpha, state.kappa

        def target(x):
            log_theta = np.clip(base + (column * x if column is not None else x), -EXP_CLAMP, EXP_CLAMP)
            return self.total(log_theta, log_lambda, log_alpha, kappa) + _normal_logpdf(x, var)

        return target

    def kappa_target(self, state, derived, a_kappa, b_kappa):
        """
        kappa 的条件密度, lambda 随 kappa 变化, Gamma(a, b) 先验 (b为率参数)
        """
        log_mu, log_theta, log_alpha = derived.log_mu, derived.log_theta, derived.log_alpha

        def target(x):
            if not x > 0:
                return -np.inf
            log_lambda = log_mu - gammaln(1.0 + 1.0 / x)
            prior = a_kappa * np.log(b_kappa) - gammaln(a_kappa) + (a_kappa - 1.0) * np.log(x) - b_kappa * x
            return self.total(log_theta, log_lambda, log_alpha, x) + prior

        return target


def pointwise_log_likelihood(state, data, spec, derived=None):
    """
    每个个体的对数似然, 用于导出给elpd类工具
    """
    me = spec.has_measurement_error
    derived = derived if derived is not None else linear_predictors(state, data, me)
    return LikelihoodWorkspace(data, me).derived_pointwise(derived, state.kappa)


def log_likelihood(state, data, spec):
    """
    完整对数似然: 生存部分 + (变体 *2) Dirichlet测量误差部分
    Args:
        state: 参数状态
        data: 数据集
        spec: 模型设定
    Returns:
        float
    """
    return float(np.sum(pointwise_log_likelihood(state, data, spec)))


def mrf_log_prior(gamma, graph):
    """
    MRF先验的未归一化对数质量 a*sum(gamma) + b*gamma'G gamma
    """
    gamma = np.asarray(gamma, dtype=float)
    if gamma.shape != (graph.dimension,):
        raise FuncArgsError("gamma has length {}, graph has dimension {}".format(gamma.shape[0], graph.dimension))
    return float(graph.a * gamma.sum() + graph.b * gamma @ (graph.weights @ gamma))


def mrf_flip_delta(gamma, k, graph):
    """
    翻转第k个指示变量时MRF对数先验的变化量
    """
    index, weight = graph.neighbours(k)
    linked = float(np.dot(weight, np.asarray(gamma, dtype=float)[index]))
    sign = 1.0 - 2.0 * gamma[k]
    return sign * (graph.a + 2.0 * graph.b * linked)


def indicator_log_prior(indicators, probs):
    """
    独立Bernoulli(pi_jl)先验的对数质量
    """
    indicators = np.asarray(indicators, dtype=float)
    probs = np.asarray(probs, dtype=float)
    return float(np.sum(indicators * np.log(probs) + (1.0 - indicators) * np.log1p(-probs)))


def _require_active(name, indicator, l, j):
    if indicator == 0:
        raise ContractError("{}[{}][{}] is inactive, its conditional is a point mass".format(name, l, j))


def _workspace(state, data, spec):
    me = spec.has_measurement_error
    return LikelihoodWorkspace(data, me), linear_predictors(state, data, me)


def logcond_beta(j, l, value, state, data, spec):
    """
    beta_jl | gamma_jl = 1 的对数全条件密度 (差一个常数)
    """
    _require_active("gamma", state.gamma[l][j], l, j)
    workspace, derived = _workspace(state, data, spec)
    return workspace.beta_target(l, j, state, derived)(value)


def logcond_beta0(l, value, state, data, spec):
    workspace, derived = _workspace(state, data, spec)
    return workspace.beta_target(l, None, state, derived)(value)


def logcond_xi(k, value, state, data, spec):
    workspace, derived = _workspace(state, data, spec)
    return workspace.xi_target(k, state, derived)(value)


def logcond_xi0(value, state, data, spec):
    workspace, derived = _workspace(state, data, spec)
    return workspace.xi_target(None, state, derived)(value)


def logcond_zeta(j, l, value, state, data, spec):
    """
    zeta_jl | eta_jl = 1 的对数全条件密度, 仅用于带比例回归的变体
    """
    if not spec.has_measurement_error:
        raise ContractError("{} has no zeta coefficients".format(spec.variant.value))
    _require_active("eta", state.eta[l][j], l, j)
    workspace, derived = _workspace(state, data, spec)
    return workspace.zeta_target(l, j, state, derived)(value)


def logcond_zeta0(l, value, state, data, spec):
    if not spec.has_measurement_error:
        raise ContractError("{} has no zeta intercepts".format(spec.variant.value))
    workspace, derived = _workspace(state, data, spec)
    return workspace.zeta_target(l, None, state, derived)(value)


def logcond_kappa(value, state, data, spec):
    workspace, derived = _workspace(state, data, spec)
    hyper = spec.hyper
    return workspace.kappa_target(state, derived, hyper.a_kappa, hyper.b_kappa)(value)


def conjugate_posteriors(state, data, spec):
    """
    所有共轭块的后验分布参数

    逆Gamma为 (shape, rate), Beta为 (a, b); tau2/w2/pi/rho 按细胞类型给出列表
    Args:
        state: 参数状态
        data: 数据集
        spec: 模型设定, 使用其中的超参数
    Returns:
        dict, 键为参数名
    """
    hyper = spec.hyper
    posts = {
        "v02": ConjugatePair("invgamma", hyper.a_v0 + 0.5, hyper.b_v0 + 0.5 * state.xi0 ** 2),
        "v2": ConjugatePair("invgamma", hyper.a_v + 0.5 * data.d, hyper.b_v + 0.5 * float(np.sum(state.xi ** 2))),
        "tau2": [ConjugatePair("invgamma", hyper.a_tau + 0.5 * float(np.sum(g)),
                               hyper.b_tau + 0.5 * float(np.sum(b ** 2)))
                 for g, b in zip(state.gamma, state.beta)],
        "tau02": ConjugatePair("invgamma", hyper.a_tau0 + 0.5 * data.L,
                               hyper.b_tau0 + 0.5 * float(np.sum(state.beta0 ** 2))),
    }
    if spec.variant.selection == "bernoulli":
        posts["pi"] = []
        for g in state.gamma:
            a, b = hyper.inclusion_prior("pi", g.shape[0])
            posts["pi"].append(ConjugatePair("beta", a + g, b + g.shape[0] - g))
    if spec.has_measurement_error:
        posts["w2"] = [ConjugatePair("invgamma", hyper.a_w + 0.5 * float(np.sum(e)),
                                     hyper.b_w + 0.5 * float(np.sum(z ** 2)))
                       for e, z in zip(state.eta, state.zeta)]
        posts["w02"] = ConjugatePair("invgamma", hyper.a_w0 + 0.5 * data.L,
                                     hyper.b_w0 + 0.5 * float(np.sum(state.zeta0 ** 2)))
        if spec.variant.selection == "bernoulli":
            posts["rho"] = []
            for e in state.eta:
                a, b = hyper.inclusion_prior("rho", e.shape[0])
                posts["rho"].append(ConjugatePair("beta", a + e, b + e.shape[0] - e))
    return posts
