#!/usr/bin/env python3
# coding=utf-8

"""
@author: guoyanfeng
@software: PyCharm
@time: 19-8-5 上午10:30

MCMC扫描: 每次迭代按固定顺序更新所有参数块, 以及预热、稀疏化、多链和收敛诊断
"""
import time

import aelog
import numpy as np
from scipy.special import gammaln, logsumexp

from .domain import ParameterState
from .exceptions import ConfigError, ConvergenceError, FitError, SamplerError
from .model_core import EXP_CLAMP, LikelihoodWorkspace, conjugate_posteriors, linear_predictors
from .samplers import (LogDensity, SamplerDiagnostics, arms_abscissae, arms_sample, gibbs_draw_beta,
                       gibbs_draw_invgamma, indicator_block_update, rng_stream, slice_sample)
from .tinylibs.blinker import sweep_step
from .tinylibs.convergence import effective_sample_size, split_rhat
from .utils import run_ordered

__all__ = ("RunConfig", "ChainOutput", "FitResult", "initialize_state", "run_chain", "run_fit", "BLOCK_NAMES",
           "recorded_blocks")

# 所有可记录的参数块, 顺序即输出顺序
BLOCK_NAMES = ("xi0", "xi", "v02", "v2", "kappa", "beta0", "beta", "gamma", "tau2", "tau02", "pi", "zeta0", "zeta",
               "eta", "w2", "w02", "rho")
# 每个参数块使用独立的随机数子流
_STREAMS = {"choice": 0, "hyper": 1, "xi": 2, "zeta": 3, "kappa": 4, "beta": 5, "init": 6}
_INDICATOR_BLOCKS = ("gamma", "eta")
HEAD_SAMPLE = 100
MAX_INCIDENTS = 100
DEBUG_TOL = 1e-10


class RunConfig(object):
    """
    MCMC运行配置
    """
    __slots__ = ["n_iterations", "n_warmup", "thin", "n_chains", "seed", "record", "pointwise_loglik", "prior_only",
                 "debug_check", "threads", "independent_streams", "log_every", "max_incidents"]

    def __init__(self, n_iterations=25000, n_warmup=5000, thin=1, n_chains=1, seed=1, record=None,
                 pointwise_loglik=False, prior_only=False, debug_check=False, threads=1, independent_streams=True,
                 log_every=1000, max_incidents=MAX_INCIDENTS):
        self.n_iterations = int(n_iterations)
        self.n_warmup = int(n_warmup)
        self.thin = int(thin)
        self.n_chains = int(n_chains)
        self.seed = int(seed)
        self.record = None if record is None else tuple(record)
        self.pointwise_loglik = bool(pointwise_loglik)
        self.prior_only = bool(prior_only)
        self.debug_check = bool(debug_check)
        self.threads = int(threads)
        # False 时所有链共用0号链的随机数流, 得到完全相同的链
        self.independent_streams = bool(independent_streams)
        self.log_every = int(log_every)
        self.max_incidents = int(max_incidents)
        self.validate()

    def validate(self):
        if not 0 <= self.n_warmup < self.n_iterations:
            raise ConfigError("need 0 <= warmup < iterations, got warmup={} iterations={}".format(
                self.n_warmup, self.n_iterations))
        if self.thin < 1:
            raise ConfigError("thin must be >= 1, got {}".format(self.thin))
        if self.n_chains < 1:
            raise ConfigError("chains must be >= 1, got {}".format(self.n_chains))
        if self.threads < 1:
            raise ConfigError("threads must be >= 1, got {}".format(self.threads))
        if self.seed < 0:
            raise ConfigError("seed must be non-negative, got {}".format(self.seed))
        if self.record is not None:
            unknown = set(self.record) - set(BLOCK_NAMES)
            if unknown:
                raise ConfigError("unknown record block(s) {}".format(sorted(unknown)))
        return self

    @property
    def n_recorded(self):
        return (self.n_iterations - self.n_warmup) // self.thin

    def to_dict(self):
        values = {name: getattr(self, name) for name in self.__slots__}
        values["record"] = None if self.record is None else list(self.record)
        return values


def recorded_blocks(spec, record=None):
    """
    当前变体中存在的参数块, 与record取交集
    """
    variant = spec.variant
    blocks = []
    for name in BLOCK_NAMES:
        if name in ("zeta0", "zeta", "eta", "w2", "w02", "rho") and not variant.has_measurement_error:
            continue
        if name in ("pi", "rho") and variant.selection != "bernoulli":
            continue
        if record is None or name in record:
            blocks.append(name)
    return tuple(blocks)


class ChainOutput(object):
    """
    单条链的输出: 稀疏化后的预热后样本, 对数似然, 诊断计数和耗时

    draws[name] 为 (n_draws, dim) 数组, 按细胞类型分块的参数按 vec[(x_1, ..., x_L)] 展开
    """

    def __init__(self, chain_id, blocks, draws, loglik, pointwise=None, diagnostics=None, incidents=None,
                 clamp_count=0, elapsed=0.0, warmup_head=None, p_sizes=None, d=None):
        self.chain_id = chain_id
        self.blocks = tuple(blocks)
        self.draws = draws
        self.loglik = loglik
        self.pointwise = pointwise
        self.diagnostics = diagnostics or SamplerDiagnostics()
        self.incidents = incidents or []
        self.clamp_count = int(clamp_count)
        self.elapsed = float(elapsed)
        self.warmup_head = warmup_head or {}
        self.p_sizes = list(p_sizes or [])
        self.d = d

    @property
    def n_draws(self):
        return self.loglik.shape[0]

    def block(self, name):
        return self.draws[name]

    def split_block(self, name, k):
        """
        第k个样本的分块参数拆成按细胞类型的列表
        """
        offsets = np.concatenate([[0], np.cumsum(self.p_sizes)]).astype(int)
        row = self.draws[name][k]
        return [row[offsets[l]:offsets[l + 1]] for l in range(len(self.p_sizes))]

    def state_at(self, k):
        """
        由第k个样本重建ParameterState, 未记录的块取中性值
        """
        L = len(self.p_sizes)

        def scalar(name, default):
            return float(self.draws[name][k, 0]) if name in self.draws else default

        def vector(name, default):
            return self.draws[name][k] if name in self.draws else np.full(L, default)

        def blocks(name, default):
            if name in self.draws:
                return self.split_block(name, k)
            return [np.full(p, default) for p in self.p_sizes]

        return ParameterState(
            xi0=scalar("xi0", 0.0), xi=self.draws["xi"][k] if "xi" in self.draws else np.zeros(self.d),
            v2=scalar("v2", 1.0), v02=scalar("v02", 1.0), kappa=scalar("kappa", 1.0),
            beta0=vector("beta0", 0.0), beta=blocks("beta", 0.0), gamma=blocks("gamma", 1),
            tau2=vector("tau2", 1.0), tau02=scalar("tau02", 1.0), zeta0=vector("zeta0", 0.0),
            zeta=blocks("zeta", 0.0), eta=blocks("eta", 1), w2=vector("w2", 1.0), w02=scalar("w02", 1.0),
            pi=blocks("pi", 0.5), rho=blocks("rho", 0.5))


class FitResult(object):
    """
    多链拟合结果
    """

    def __init__(self, spec, cfg, chains, failed=None, rhat=None, ess=None, identical_chains=False):
        self.spec = spec
        self.cfg = cfg
        self.chains = chains
        self.failed = failed or []
        self.rhat = rhat or {}
        self.ess = ess or {}
        self.identical_chains = identical_chains

    @property
    def converged(self):
        """有链失败时结果被标记为未收敛"""
        return not self.failed

    @property
    def blocks(self):
        return self.chains[0].blocks if self.chains else ()

    @property
    def p_sizes(self):
        return self.chains[0].p_sizes if self.chains else []

    @property
    def n_draws(self):
        return sum(chain.n_draws for chain in self.chains)

    def stacked(self, name):
        """所有成功链的样本按链号顺序拼接"""
        return np.concatenate([chain.draws[name] for chain in self.chains], axis=0)

    def chain_array(self, name):
        """(n_chain, n_draw, dim)"""
        return np.stack([chain.draws[name] for chain in self.chains], axis=0)

    @property
    def clamp_count(self):
        return sum(chain.clamp_count for chain in self.chains)

    @property
    def incident_count(self):
        return sum(len(chain.incidents) for chain in self.chains)

    def max_rhat(self):
        values = [v for v in self.rhat.values() if np.isfinite(v)]
        return max(values) if values else np.nan

    def check(self):
        """
        有失败的链时抛出ConvergenceError
        """
        if self.failed:
            raise ConvergenceError("{} of {} chains failed: {}".format(
                len(self.failed), len(self.failed) + len(self.chains),
                "; ".join("chain {}: {}".format(cid, msg) for cid, msg in self.failed)))
        return self


def _prior_mean_invgamma(a, b):
    return b / (a - 1.0) if a > 1.0 else b / a


def initialize_state(spec, data, rng):
    """
    初始状态: xi0 = log(事件数 / sum(t)), 其他系数为0, kappa = 1,
    指示变量独立以0.5的概率激活(noBVS变体全部激活), 方差取先验均值
    """
    hyper = spec.hyper
    L, p_sizes = data.L, data.p_sizes
    selection = spec.variant.has_selection
    me = spec.has_measurement_error

    def indicators():
        if not selection:
            return [np.ones(p, dtype=np.int8) for p in p_sizes]
        return [(rng.uniform(size=p) < 0.5).astype(np.int8) for p in p_sizes]

    gamma = indicators()
    eta = indicators() if me else [np.zeros(p, dtype=np.int8) for p in p_sizes]
    events = max(float(np.sum(data.event)), 0.5)
    pis, rhos = [], []
    for p in p_sizes:
        a, b = hyper.inclusion_prior("pi", p)
        pis.append(np.full(p, a / (a + b)))
        a, b = hyper.inclusion_prior("rho", p)
        rhos.append(np.full(p, a / (a + b)))
    return ParameterState(
        xi0=np.log(events / float(np.sum(data.time))), xi=np.zeros(data.d),
        v2=_prior_mean_invgamma(hyper.a_v, hyper.b_v), v02=_prior_mean_invgamma(hyper.a_v0, hyper.b_v0),
        kappa=1.0, beta0=np.zeros(L), beta=[np.zeros(p) for p in p_sizes], gamma=gamma,
        tau2=np.full(L, _prior_mean_invgamma(hyper.a_tau, hyper.b_tau)),
        tau02=_prior_mean_invgamma(hyper.a_tau0, hyper.b_tau0), zeta0=np.zeros(L),
        zeta=[np.zeros(p) for p in p_sizes], eta=eta, w2=np.full(L, _prior_mean_invgamma(hyper.a_w, hyper.b_w)),
        w02=_prior_mean_invgamma(hyper.a_w0, hyper.b_w0), pi=pis, rho=rhos)


class _NonFiniteLikelihood(Exception):
    pass


class _ChainCache(object):
    """
    线性预测子的增量缓存, 保存未截断的线性预测子, 派生量由截断后的值得到
    """

    def __init__(self, state, data, measurement_error):
        self.data = data
        self.measurement_error = measurement_error
        self.log_t = np.log(data.time)
        self.recompute(state)

    def recompute(self, state):
        data = self.data
        self.lin_theta = state.xi0 + data.clinical @ state.xi
        self.lin_mu = np.column_stack([state.beta0[l] + data.cell_covariates[l] @ state.beta[l]
                                       for l in range(data.L)])
        if self.measurement_error:
            self.lin_alpha = np.column_stack([state.zeta0[l] + data.cell_covariates[l] @ state.zeta[l]
                                              for l in range(data.L)])
        else:
            self.lin_alpha = None
        self.derived = linear_predictors(state, data, self.measurement_error)

    def copy(self):
        other = _ChainCache.__new__(_ChainCache)
        other.data = self.data
        other.measurement_error = self.measurement_error
        other.log_t = self.log_t
        other.lin_theta = self.lin_theta.copy()
        other.lin_mu = self.lin_mu.copy()
        other.lin_alpha = None if self.lin_alpha is None else self.lin_alpha.copy()
        derived = self.derived
        other.derived = type(derived)(derived.log_theta.copy(), derived.log_mu.copy(), derived.log_lambda.copy(),
                                      None if derived.log_alpha is None else derived.log_alpha.copy(),
                                      derived.props.copy(), derived.log_surv.copy(), derived.clamp_count)
        return other

    def shift_theta(self, column, delta):
        self.lin_theta += delta if column is None else column * delta
        self.derived.log_theta = np.clip(self.lin_theta, -EXP_CLAMP, EXP_CLAMP)

    def shift_mu(self, l, column, delta, kappa):
        self.lin_mu[:, l] += delta if column is None else column * delta
        self.derived.log_mu[:, l] = np.clip(self.lin_mu[:, l], -EXP_CLAMP, EXP_CLAMP)
        self.derived.log_lambda[:, l] = self.derived.log_mu[:, l] - gammaln(1.0 + 1.0 / kappa)

    def shift_alpha(self, l, column, delta):
        self.lin_alpha[:, l] += delta if column is None else column * delta
        self.derived.log_alpha[:, l] = np.clip(self.lin_alpha[:, l], -EXP_CLAMP, EXP_CLAMP)

    def set_kappa(self, kappa):
        self.derived.log_lambda = self.derived.log_mu - gammaln(1.0 + 1.0 / kappa)
        self.refresh_surv(kappa)

    def refresh_theta(self):
        return int(np.count_nonzero(np.abs(self.lin_theta) > EXP_CLAMP))

    def refresh_props(self):
        log_alpha = self.derived.log_alpha
        self.derived.props = np.exp(log_alpha - logsumexp(log_alpha, axis=1, keepdims=True))
        return int(np.count_nonzero(np.abs(self.lin_alpha) > EXP_CLAMP))

    def refresh_surv(self, kappa):
        log_z = np.clip(kappa * (self.log_t[:, None] - self.derived.log_lambda), -EXP_CLAMP, EXP_CLAMP)
        self.derived.log_surv = -np.exp(log_z)

    def refresh_mu(self, kappa):
        self.refresh_surv(kappa)
        return int(np.count_nonzero(np.abs(self.lin_mu) > EXP_CLAMP))


class _ChainRunner(object):
    """
    单条链的顺序执行上下文
    """

    def __init__(self, spec, data, cfg, chain_id):
        self.spec = spec
        self.data = data
        self.cfg = cfg
        self.chain_id = chain_id
        self.me = spec.has_measurement_error
        self.selection = spec.variant.selection
        stream_chain = chain_id if cfg.independent_streams else 0
        self.rngs = {name: rng_stream(cfg.seed, stream_chain, block) for name, block in _STREAMS.items()}
        self.workspace = LikelihoodWorkspace(data, self.me, prior_only=cfg.prior_only)
        self.state = initialize_state(spec, data, self.rngs["init"])
        self.cache = _ChainCache(self.state, data, self.me)
        self.diagnostics = SamplerDiagnostics()
        self.incidents = []
        self.clamp_count = self.cache.derived.clamp_count
        self.iteration = 0
        self.loglik = self._loglik()
        if not np.isfinite(self.loglik):
            raise FitError("initial state has log-likelihood {}".format(self.loglik), chain_id=chain_id)

    def _loglik(self):
        derived = self.cache.derived
        return self.workspace.total(derived.log_theta, derived.log_lambda, derived.log_alpha, self.state.kappa)

    def _emit(self, step, l=None):
        if sweep_step.has_receivers:
            sweep_step.send(step=step, chain_id=self.chain_id, iteration=self.iteration, l=l)

    def _step(self, name, func, *args, l=None):
        """
        执行一个参数块的更新, 似然非有限时回滚该块并记录incident
        """
        state_backup, cache_backup = self.state.copy(), self.cache.copy()
        try:
            with np.errstate(over="ignore", under="ignore"):
                func(*args)
                loglik = self._loglik()
            if not np.isfinite(loglik):
                raise _NonFiniteLikelihood("log-likelihood is {}".format(loglik))
            self.loglik = loglik
        except (SamplerError, _NonFiniteLikelihood, FloatingPointError) as err:
            self.state, self.cache = state_backup, cache_backup
            incident = {"iteration": self.iteration, "step": name, "l": l, "reason": str(err)}
            self.incidents.append(incident)
            aelog.warning("chain {} iteration {} step {} reverted: {}".format(
                self.chain_id, self.iteration, name, err))
            if len(self.incidents) > self.cfg.max_incidents:
                raise FitError("more than {} incidents, last: {}".format(self.cfg.max_incidents, incident),
                               chain_id=self.chain_id, incidents=self.incidents)
        self._emit(name, l)

    # ---- 各参数块的更新 ----

    def _gibbs_xi_variances(self):
        posts = conjugate_posteriors(self.state, self.data, self.spec)
        rng = self.rngs["hyper"]
        self.state.v02 = gibbs_draw_invgamma(posts["v02"].a, posts["v02"].b, rng)
        self.state.v2 = gibbs_draw_invgamma(posts["v2"].a, posts["v2"].b, rng)

    def _slice_xi(self):
        rng = self.rngs["xi"]
        state, cache = self.state, self.cache
        new = slice_sample(LogDensity(self.workspace.xi_target(None, state, cache.derived)), state.xi0,
                           rng=rng, diagnostics=self.diagnostics, block="xi0")
        cache.shift_theta(None, new - state.xi0)
        state.xi0 = new
        for k in range(self.data.d):
            column = self.data.clinical[:, k]
            new = slice_sample(LogDensity(self.workspace.xi_target(k, state, cache.derived)), state.xi[k],
                               rng=rng, diagnostics=self.diagnostics, block="xi")
            cache.shift_theta(column, new - state.xi[k])
            state.xi[k] = new

    def _refresh_theta(self):
        self.clamp_count += self.cache.refresh_theta()

    def _indicator(self, l, which):
        move = indicator_block_update(l, which, self.state, self.data, self.spec,
                                      self.rngs["beta" if which == "gamma" else "zeta"], self.workspace,
                                      self.cache.derived, self.diagnostics)
        if not move.accepted:
            return
        column = self.data.cell_covariates[l][:, move.index]
        if which == "gamma":
            delta = move.coefficients[move.index] - self.state.beta[l][move.index]
            self.state.gamma[l], self.state.beta[l] = move.indicators, move.coefficients
            self.cache.shift_mu(l, column, delta, self.state.kappa)
        else:
            delta = move.coefficients[move.index] - self.state.zeta[l][move.index]
            self.state.eta[l], self.state.zeta[l] = move.indicators, move.coefficients
            self.cache.shift_alpha(l, column, delta)

    def _gibbs_inclusion(self, l, name):
        posts = conjugate_posteriors(self.state, self.data, self.spec)
        pair = posts[name][l]
        getattr(self.state, name)[l] = gibbs_draw_beta(pair.a, pair.b, self.rngs["hyper"])

    def _gibbs_variances(self, which):
        """
        所有细胞类型的 tau2_l (或 w2_l) 以及 tau02 (或 w02), 每次扫描都更新
        """
        posts = conjugate_posteriors(self.state, self.data, self.spec)
        rng = self.rngs["hyper"]
        if which == "beta":
            for l, pair in enumerate(posts["tau2"]):
                self.state.tau2[l] = gibbs_draw_invgamma(pair.a, pair.b, rng)
            self.state.tau02 = gibbs_draw_invgamma(posts["tau02"].a, posts["tau02"].b, rng)
        else:
            for l, pair in enumerate(posts["w2"]):
                self.state.w2[l] = gibbs_draw_invgamma(pair.a, pair.b, rng)
            self.state.w02 = gibbs_draw_invgamma(posts["w02"].a, posts["w02"].b, rng)

    def _arms_coefficient(self, which, l, j):
        """
        ARMS更新一个系数, j为None时更新截距
        """
        state, cache = self.state, self.cache
        if which == "beta":
            current = state.beta0[l] if j is None else state.beta[l][j]
            scale = np.sqrt(state.tau02 if j is None else state.tau2[l])
            target = self.workspace.beta_target(l, j, state, cache.derived)
            rng = self.rngs["beta"]
        else:
            current = state.zeta0[l] if j is None else state.zeta[l][j]
            scale = np.sqrt(state.w02 if j is None else state.w2[l])
            target = self.workspace.zeta_target(l, j, state, cache.derived)
            rng = self.rngs["zeta"]
        block = which + ("0" if j is None else "")
        new = arms_sample(LogDensity(target), arms_abscissae(current, scale), rng=rng, current=current,
                          diagnostics=self.diagnostics, block=block)
        column = None if j is None else self.data.cell_covariates[l][:, j]
        if which == "beta":
            cache.shift_mu(l, column, new - current, state.kappa)
            if j is None:
                state.beta0[l] = new
            else:
                state.beta[l][j] = new
        else:
            cache.shift_alpha(l, column, new - current)
            if j is None:
                state.zeta0[l] = new
            else:
                state.zeta[l][j] = new

    def _arms_block(self, which, l, intercept):
        indicators = self.state.gamma[l] if which == "beta" else self.state.eta[l]
        for j in np.flatnonzero(indicators):
            self._arms_coefficient(which, l, int(j))
        if intercept:
            self._arms_coefficient(which, l, None)

    def _arms_all(self, which):
        for l in range(self.data.L):
            self._arms_block(which, l, intercept=False)

    def _refresh_props(self):
        self.clamp_count += self.cache.refresh_props()

    def _slice_kappa(self):
        state, cache = self.state, self.cache
        hyper = self.spec.hyper
        target = self.workspace.kappa_target(state, cache.derived, hyper.a_kappa, hyper.b_kappa)
        new = slice_sample(LogDensity(target, lower=0.0), state.kappa, rng=self.rngs["kappa"],
                           diagnostics=self.diagnostics, block="kappa")
        state.kappa = new
        cache.set_kappa(new)

    def _refresh_mu(self):
        self.clamp_count += self.cache.refresh_mu(self.state.kappa)

    def sweep(self):
        """
        一次完整的扫描
        """
        self.iteration += 1
        L = self.data.L
        self._step("v2", self._gibbs_xi_variances)
        self._step("xi", self._slice_xi)
        self._step("theta", self._refresh_theta)
        if self.me:
            l = int(self.rngs["choice"].integers(L))
            if self.selection != "none":
                self._step("eta", self._indicator, l, "eta", l=l)
                if self.selection == "bernoulli":
                    self._step("rho", self._gibbs_inclusion, l, "rho", l=l)
            self._step("w2", self._gibbs_variances, "zeta")
            self._step("zeta_block", self._arms_block, "zeta", l, True, l=l)
            self._step("zeta_all", self._arms_all, "zeta")
            self._step("props", self._refresh_props)
        self._step("kappa", self._slice_kappa)
        l = int(self.rngs["choice"].integers(L))
        if self.selection != "none":
            self._step("gamma", self._indicator, l, "gamma", l=l)
            if self.selection == "bernoulli":
                self._step("pi", self._gibbs_inclusion, l, "pi", l=l)
        self._step("tau2", self._gibbs_variances, "beta")
        self._step("beta_block", self._arms_block, "beta", l, True, l=l)
        self._step("beta_all", self._arms_all, "beta")
        self._step("mu", self._refresh_mu)
        if self.cfg.debug_check:
            self.check_cache()

    def check_cache(self):
        """
        调试模式: 增量缓存与完整重算比较
        """
        fresh = linear_predictors(self.state, self.data, self.me)
        derived = self.cache.derived
        pairs = [("log_theta", fresh.log_theta, derived.log_theta), ("log_mu", fresh.log_mu, derived.log_mu),
                 ("log_lambda", fresh.log_lambda, derived.log_lambda)]
        if self.me:
            pairs.append(("log_alpha", fresh.log_alpha, derived.log_alpha))
        for name, expected, cached in pairs:
            gap = float(np.max(np.abs(expected - cached)))
            if gap > DEBUG_TOL:
                raise FitError("cached {} drifted by {} at iteration {}".format(name, gap, self.iteration),
                               chain_id=self.chain_id, incidents=self.incidents)

    def snapshot(self, blocks):
        state = self.state
        return {name: state.flat(name) for name in blocks}


def run_chain(spec, data, cfg, chain_id=0):
    """
    运行一条链
    Args:
        spec: ModelSpec
        data: 已校验的SurvivalDataset
        cfg: RunConfig
        chain_id: 链编号, 决定随机数子流
    Returns:
        ChainOutput
    """
    spec.check_dimensions(data)
    blocks = recorded_blocks(spec, cfg.record)
    start = time.perf_counter()
    runner = _ChainRunner(spec, data, cfg, chain_id)
    aelog.info("chain {} started: variant={} iterations={} warmup={} thin={}".format(
        chain_id, spec.variant.value, cfg.n_iterations, cfg.n_warmup, cfg.thin))

    n_draws = cfg.n_recorded
    first = runner.snapshot(blocks)
    draws = {name: np.empty((n_draws, first[name].shape[0]),
                            dtype=np.int8 if name in _INDICATOR_BLOCKS else float) for name in blocks}
    loglik = np.empty(n_draws)
    pointwise = np.empty((n_draws, data.n)) if cfg.pointwise_loglik else None
    head_size = min(HEAD_SAMPLE, cfg.n_warmup)
    warmup_head = {name: np.empty((head_size, first[name].shape[0])) for name in blocks}
    warmup_head["loglik"] = np.empty((head_size, 1))

    k = 0
    for it in range(1, cfg.n_iterations + 1):
        runner.sweep()
        if it <= head_size:
            for name, value in runner.snapshot(blocks).items():
                warmup_head[name][it - 1] = value
            warmup_head["loglik"][it - 1] = runner.loglik
        post = it - cfg.n_warmup
        if post > 0 and post % cfg.thin == 0:
            for name, value in runner.snapshot(blocks).items():
                draws[name][k] = value
            loglik[k] = runner.loglik
            if pointwise is not None:
                pointwise[k] = runner.workspace.derived_pointwise(runner.cache.derived, runner.state.kappa)
            k += 1
        if cfg.log_every and it % cfg.log_every == 0:
            aelog.debug("chain {} iteration {}/{} loglik={:.6g} kappa={:.4g} incidents={}".format(
                chain_id, it, cfg.n_iterations, runner.loglik, runner.state.kappa, len(runner.incidents)))

    elapsed = time.perf_counter() - start
    if runner.clamp_count:
        aelog.warning("chain {} clamped {} linear predictor entries at +/-{}".format(
            chain_id, runner.clamp_count, EXP_CLAMP))
    runner.diagnostics.add("linear_predictor", clamp_events=runner.clamp_count)
    aelog.info("chain {} finished in {:.1f}s, {} draws, {} incidents".format(
        chain_id, elapsed, n_draws, len(runner.incidents)))
    return ChainOutput(chain_id, blocks, draws, loglik, pointwise=pointwise, diagnostics=runner.diagnostics,
                       incidents=runner.incidents, clamp_count=runner.clamp_count, elapsed=elapsed,
                       warmup_head=warmup_head, p_sizes=data.p_sizes, d=data.d)


def _scalar_columns(fit):
    """
    需要做收敛诊断的标量列, 指示变量块除外
    """
    for name in fit.blocks:
        if name in _INDICATOR_BLOCKS:
            continue
        array = fit.chain_array(name)
        for column in range(array.shape[2]):
            label = name if array.shape[2] == 1 and name not in ("beta0", "zeta0", "tau2", "w2", "xi") else \
                "{}[{}]".format(name, column)
            yield label, array[:, :, column]


def run_fit(spec, data, cfg):
    """
    运行多条链并合并, 计算split R-hat和有效样本量
    Args:
        spec: ModelSpec
        data: SurvivalDataset
        cfg: RunConfig
    Returns:
        FitResult, 有链失败时 converged 为False
    """
    data.check()
    spec.check_dimensions(data)
    outcomes = run_ordered(run_chain, [(spec, data, cfg, cid) for cid in range(cfg.n_chains)], cfg.threads)
    chains, failed = [], []
    for cid, (output, err) in enumerate(outcomes):
        if err is None:
            chains.append(output)
            continue
        if not isinstance(err, (FitError, SamplerError)):
            raise err
        aelog.error("chain {} failed: {}".format(cid, err))
        failed.append((cid, err.message))
    if not chains:
        raise FitError("all {} chains failed: {}".format(cfg.n_chains, failed[0][1]), chain_id=failed[0][0])

    fit = FitResult(spec, cfg, chains, failed=failed)
    if cfg.n_recorded >= 4:
        fit.identical_chains = len(chains) > 1 and all(
            np.array_equal(chains[0].draws[name], chain.draws[name]) for chain in chains[1:] for name in fit.blocks)
        for label, values in _scalar_columns(fit):
            fit.rhat[label] = np.nan if fit.identical_chains or len(chains) < 2 else split_rhat(values)
            fit.ess[label] = effective_sample_size(values)
    if fit.identical_chains:
        aelog.warning("all chains are identical, R-hat is undefined")
    if failed:
        aelog.warning("fit is flagged non-converged: {} chain(s) failed".format(len(failed)))
    return fit
