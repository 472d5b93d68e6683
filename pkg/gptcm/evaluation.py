#!/usr/bin/env python3
# coding=utf-8

"""
@author: guoyanfeng
@software: PyCharm
@time: 19-8-8 上午10:12

后验汇总、生存预测和评价指标: mPIP/MPM、scaled RMSE、选择准确率、Kaplan-Meier、IPCW Brier score
"""
from collections import namedtuple

import aelog
import numpy as np
import pandas as pd
from lifelines import KaplanMeierFitter
from scipy.special import gammaln, logsumexp
from sksurv import metrics as surv_metrics
from sksurv.util import Surv

from .exceptions import ContractError, DomainError, FuncArgsError

__all__ = ("PosteriorSummary", "PredictionCurve", "SelectionMetrics", "KaplanMeier", "BrierScores", "summarize",
           "summarize_draws", "selection_metrics", "scaled_rmse", "kaplan_meier", "kaplan_meier_curve",
           "brier_score", "integrated_brier_score", "predict_survival", "credible_interval_covers",
           "variant_metrics", "default_time_grid", "MIN_DRAWS", "MPM_THRESHOLD")

MIN_DRAWS = 100
MPM_THRESHOLD = 0.5
# 曲线单调性检查的容差
MONOTONE_TOL = 1e-12

# 指示变量块和对应的系数块
_SELECTION_PAIRS = {"gamma": "beta", "eta": "zeta"}
_CELL_BLOCKS = ("beta", "gamma", "zeta", "eta", "pi", "rho")
_TYPE_BLOCKS = ("beta0", "tau2", "zeta0", "w2")

SelectionMetrics = namedtuple("SelectionMetrics", ["accuracy", "sensitivity", "specificity"])


class PosteriorSummary(object):
    """
    后验汇总

    mean/sd/lower/upper 为块名到数组的映射, mpip/mpm 以指示变量块名为键, mpm_coef 以系数块名为键
    """

    def __init__(self, blocks, p_sizes, n_draws, mean, sd, lower, upper, mpip, mpm, mpm_coef, skewed,
                 level=0.95, threshold=MPM_THRESHOLD, variant=None, clamp_count=0, incident_count=0, rhat=None,
                 ess=None, converged=True):
        self.blocks = tuple(blocks)
        self.p_sizes = list(p_sizes)
        self.n_draws = int(n_draws)
        self.mean = mean
        self.sd = sd
        self.lower = lower
        self.upper = upper
        self.mpip = mpip
        self.mpm = mpm
        self.mpm_coef = mpm_coef
        self.skewed = skewed
        self.level = level
        self.threshold = threshold
        self.variant = variant
        self.clamp_count = int(clamp_count)
        self.incident_count = int(incident_count)
        self.rhat = rhat or {}
        self.ess = ess or {}
        self.converged = converged

    def split(self, values):
        """按细胞类型拆分 vec[(x_1, ..., x_L)]"""
        offsets = np.concatenate([[0], np.cumsum(self.p_sizes)]).astype(int)
        return [values[offsets[l]:offsets[l + 1]] for l in range(len(self.p_sizes))]

    def estimate(self, name, mode="mpm"):
        """
        系数点估计: mpm模式下为MPM掩码乘以激活时的均值, noBVS模式下为后验均值
        """
        if mode == "mpm" and name in self.mpm_coef:
            indicator = {value: key for key, value in _SELECTION_PAIRS.items()}[name]
            mask = self.mpm.get(indicator)
            coef = self.mpm_coef[name]
            return coef * mask if mask is not None else coef
        if mode not in ("mpm", "noBVS"):
            raise ContractError("unknown estimate mode '{}', expected mpm or noBVS".format(mode))
        return self.mean[name]

    def _labels(self, name, size):
        if name in _CELL_BLOCKS:
            return [(l, j) for l, p in enumerate(self.p_sizes) for j in range(p)]
        if name in _TYPE_BLOCKS:
            return [(l, None) for l in range(size)]
        if name == "xi":
            return [(None, k) for k in range(size)]
        return [(None, None)]

    def coefficient_table(self):
        """
        每个参数一行的表格, 指示变量块附带mPIP, 系数块附带MPM估计
        """
        rows = []
        for name in self.blocks:
            mean = self.mean[name]
            indicator = {value: key for key, value in _SELECTION_PAIRS.items()}.get(name)
            for k, (l, j) in enumerate(self._labels(name, mean.shape[0])):
                row = {"block": name, "l": l, "j": j, "mean": mean[k], "sd": self.sd[name][k],
                       "lower": self.lower[name][k], "upper": self.upper[name][k],
                       "skewed": bool(self.skewed[name][k]), "mpip": None, "mpm": None, "mpm_estimate": None}
                if name in self.mpip:
                    row["mpip"] = self.mpip[name][k]
                    row["mpm"] = int(self.mpm[name][k])
                if name in self.mpm_coef:
                    row["mpm_estimate"] = self.estimate(name)[k]
                    if indicator in self.mpm:
                        row["mpm"] = int(self.mpm[indicator][k])
                rows.append(row)
        return pd.DataFrame(rows, columns=["block", "l", "j", "mean", "sd", "lower", "upper", "skewed", "mpip",
                                           "mpm", "mpm_estimate"])

    def to_dict(self):
        def tolist(mapping):
            return {key: np.asarray(value).tolist() for key, value in mapping.items()}

        return {
            "variant": self.variant, "n_draws": self.n_draws, "p_sizes": self.p_sizes, "level": self.level,
            "threshold": self.threshold, "mean": tolist(self.mean), "sd": tolist(self.sd),
            "lower": tolist(self.lower), "upper": tolist(self.upper), "mpip": tolist(self.mpip),
            "mpm": tolist(self.mpm), "mpm_coef": tolist(self.mpm_coef), "clamp_count": self.clamp_count,
            "incident_count": self.incident_count, "converged": self.converged,
            "rhat": {key: None if not np.isfinite(val) else float(val) for key, val in self.rhat.items()},
            "ess": {key: None if not np.isfinite(val) else float(val) for key, val in self.ess.items()},
        }


def summarize_draws(draws, p_sizes, level=0.95, threshold=MPM_THRESHOLD):
    """
    对一组样本做汇总, draws为块名到 (n_draws, dim) 数组的映射
    Returns:
        PosteriorSummary
    """
    blocks = tuple(draws)
    n_draws = next(iter(draws.values())).shape[0] if draws else 0
    if n_draws == 0:
        raise ContractError("cannot summarize an empty chain")
    if n_draws < MIN_DRAWS:
        aelog.warning("summarizing only {} draws, at least {} are expected".format(n_draws, MIN_DRAWS))
    tail = (1.0 - level) / 2.0
    mean, sd, lower, upper, skewed = {}, {}, {}, {}, {}
    mpip, mpm, mpm_coef = {}, {}, {}
    for name in blocks:
        values = np.asarray(draws[name], dtype=float)
        mean[name] = values.mean(axis=0)
        sd[name] = values.std(axis=0)
        lower[name], upper[name] = np.quantile(values, [tail, 1.0 - tail], axis=0)
        skewed[name] = (mean[name] < lower[name]) | (mean[name] > upper[name])
        if name in _SELECTION_PAIRS:
            mpip[name] = mean[name]
            mpm[name] = (mean[name] >= threshold).astype(np.int8)
    for indicator, coef_name in _SELECTION_PAIRS.items():
        if coef_name not in draws:
            continue
        coef = np.asarray(draws[coef_name], dtype=float)
        if indicator not in draws:
            mpm_coef[coef_name] = coef.mean(axis=0)
            continue
        active = np.asarray(draws[indicator]) == 1
        count = active.sum(axis=0)
        total = np.where(active, coef, 0.0).sum(axis=0)
        mpm_coef[coef_name] = np.divide(total, count, out=np.zeros_like(total), where=count > 0)
    return PosteriorSummary(blocks, p_sizes, n_draws, mean, sd, lower, upper, mpip, mpm, mpm_coef, skewed,
                            level=level, threshold=threshold)


def summarize(fit, level=0.95, threshold=MPM_THRESHOLD):
    """
    拟合结果的后验汇总
    Args:
        fit: FitResult
        level: 等尾可信区间的水平
        threshold: MPM的mPIP阈值, 包含等号
    Returns:
        PosteriorSummary
    """
    if not fit.chains or fit.n_draws == 0:
        raise ContractError("cannot summarize an empty chain")
    summary = summarize_draws({name: fit.stacked(name) for name in fit.blocks}, fit.p_sizes, level=level,
                              threshold=threshold)
    summary.variant = fit.spec.variant.value
    summary.clamp_count = fit.clamp_count
    summary.incident_count = fit.incident_count
    summary.rhat, summary.ess = dict(fit.rhat), dict(fit.ess)
    summary.converged = fit.converged
    return summary


def selection_metrics(mask, truth):
    """
    选择准确率、灵敏度、特异度, 真值全为0或全为1时无定义的比率为None
    """
    mask = np.asarray(mask).astype(bool)
    truth = np.asarray(truth).astype(bool)
    if mask.shape != truth.shape:
        raise FuncArgsError("mask has length {}, truth has length {}".format(mask.shape[0], truth.shape[0]))
    if mask.size == 0:
        raise FuncArgsError("selection metrics need at least one coefficient")
    positives, negatives = truth.sum(), (~truth).sum()
    accuracy = float(np.mean(mask == truth))
    sensitivity = float(np.sum(mask & truth) / positives) if positives else None
    specificity = float(np.sum(~mask & ~truth) / negatives) if negatives else None
    if sensitivity is None or specificity is None:
        aelog.warning("selection truth is degenerate ({} positives of {}), undefined rates reported as None".format(
            int(positives), truth.size))
    return SelectionMetrics(accuracy, sensitivity, specificity)


def scaled_rmse(estimate, truth):
    """
    ||estimate - truth||_2 / sqrt(pL)
    """
    estimate = np.asarray(estimate, dtype=float)
    truth = np.asarray(truth, dtype=float)
    if estimate.shape != truth.shape:
        raise FuncArgsError("estimate has length {}, truth has length {}".format(estimate.size, truth.size))
    return float(np.linalg.norm(estimate - truth) / np.sqrt(truth.size))


class KaplanMeier(object):
    """
    lifelines乘积极限估计的包装, 右连续阶梯函数
    """

    def __init__(self, fitter):
        self.fitter = fitter

    def __call__(self, t):
        """S(t), t处的跳跃已计入"""
        t = np.atleast_1d(np.asarray(t, dtype=float))
        return self.fitter.survival_function_at_times(t).to_numpy()

    @property
    def median(self):
        return float(self.fitter.median_survival_time_)


def kaplan_meier(time, event):
    """
    Kaplan-Meier估计
    Args:
        time: 观测时间
        event: 事件指示, 1为事件
    Returns:
        KaplanMeier
    """
    fitter = KaplanMeierFitter()
    fitter.fit(np.asarray(time, dtype=float), event_observed=np.asarray(event).astype(bool))
    return KaplanMeier(fitter)


class PredictionCurve(object):
    """
    每个个体在时间网格上的生存曲线

    aggregation: plugin-mpm, plugin-mean, curve-mean 或 kaplan-meier
    """

    def __init__(self, grid, values, aggregation):
        self.grid = np.asarray(grid, dtype=float)
        self.values = np.atleast_2d(np.asarray(values, dtype=float))
        self.aggregation = aggregation
        self.check()

    def check(self):
        if self.values.shape[1] != self.grid.shape[0]:
            raise FuncArgsError("curve has {} columns, grid has {} points".format(
                self.values.shape[1], self.grid.shape[0]))
        if np.any(np.diff(self.grid) <= 0):
            raise DomainError("prediction grid must be strictly increasing")
        if np.any(self.values > 1.0) or np.any(self.values < 0.0) or np.isnan(self.values).any():
            raise DomainError("survival predictions must lie in [0, 1]")
        if np.any(np.diff(self.values, axis=1) > MONOTONE_TOL):
            raise DomainError("survival predictions must be non-increasing in t")
        return self

    @property
    def n_subjects(self):
        return self.values.shape[0]

    def at(self, t_grid):
        """线性插值到t_grid, t_grid需要落在预测网格内"""
        t_grid = np.asarray(t_grid, dtype=float)
        if t_grid.min() < self.grid[0] or t_grid.max() > self.grid[-1]:
            raise ContractError("prediction grid [{}, {}] does not cover [{}, {}]".format(
                self.grid[0], self.grid[-1], t_grid.min(), t_grid.max()))
        return np.vstack([np.interp(t_grid, self.grid, row) for row in self.values])

    def to_frame(self):
        frame = pd.DataFrame(self.values.T, columns=["subject_{}".format(i) for i in range(self.n_subjects)])
        frame.insert(0, "time", self.grid)
        return frame


def kaplan_meier_curve(time, event, t_grid, n_subjects):
    """KM参照曲线, 每个个体都取相同的值"""
    km = kaplan_meier(time, event)
    row = km(t_grid)
    return PredictionCurve(t_grid, np.tile(row, (n_subjects, 1)), "kaplan-meier")


class BrierScores(object):
    """
    时间网格上的Brier score, unreliable标记落在验证集随访区间[min T, max T)之外的点, 这些点的score为nan
    """

    def __init__(self, times, scores, unreliable, integrated=None):
        self.times = times
        self.scores = scores
        self.unreliable = unreliable
        # 可靠点不足两个时为None
        self.integrated = integrated

    def to_frame(self):
        return pd.DataFrame({"time": self.times, "brier": self.scores, "unreliable": self.unreliable})


def brier_score(pred, validation, t_grid):
    """
    IPCW Brier score, 用scikit-survival计算, 删失分布由验证集的KM估计
    BS(t) = 1/n sum_i w_i(t) (1{T_i > t} - S_i(t))^2
    Args:
        pred: PredictionCurve, 行与验证集个体一一对应
        validation: SurvivalDataset
        t_grid: 评价时间点
    Returns:
        BrierScores
    """
    t_grid = np.asarray(t_grid, dtype=float)
    if pred.n_subjects != validation.n:
        raise FuncArgsError("prediction has {} subjects, validation set has {}".format(pred.n_subjects,
                                                                                    validation.n))
    time, event = validation.time, validation.event.astype(bool)
    unreliable = (t_grid < time.min()) | (t_grid >= time.max())
    if not event.any():
        unreliable[:] = True
    scores = np.full(t_grid.shape[0], np.nan)
    integrated = None
    keep = ~unreliable
    if keep.any():
        outcome = Surv.from_arrays(event=event, time=time)
        estimate = pred.at(t_grid[keep])
        _, scores[keep] = surv_metrics.brier_score(outcome, outcome, estimate, t_grid[keep])
        if keep.sum() >= 2:
            integrated = float(surv_metrics.integrated_brier_score(outcome, outcome, estimate, t_grid[keep]))
    if unreliable.any():
        aelog.warning("{} Brier grid point(s) lie outside the validation follow-up and are unreliable".format(
            int(unreliable.sum())))
    return BrierScores(t_grid, scores, unreliable, integrated)


def integrated_brier_score(scores):
    """
    可靠点上的积分Brier score, 梯形积分除以跨度
    """
    if scores.integrated is None:
        raise ContractError("integrated Brier score needs at least two reliable grid points")
    return scores.integrated


def default_time_grid(time, quantile=0.8, size=50):
    """
    从最小观测时间到给定分位数的等距网格
    """
    time = np.asarray(time, dtype=float)
    return np.linspace(time.min(), np.quantile(time, quantile), size)


def _survival_grid(log_theta, log_lambda, props, kappa, t_grid):
    """
    S_pop(t) = exp(-theta * sum_l p_l (1 - S_l(t))) 在网格上的值, (n, G)
    """
    log_t = np.log(t_grid)
    z = np.exp(np.minimum(kappa * (log_t[None, :, None] - log_lambda[:, None, :]), 500.0))
    one_minus_mix = np.sum(props[:, None, :] * -np.expm1(-z), axis=2)
    return np.exp(-np.exp(log_theta)[:, None] * one_minus_mix)


def _check_subjects(subjects, p_sizes, d, measurement_error):
    if subjects.clinical.shape[1] != d:
        raise FuncArgsError("new subjects have {} clinical columns, the fit has {}".format(
            subjects.clinical.shape[1], d))
    if len(subjects.cell_covariates) != len(p_sizes):
        missing = ", ".join("X{}".format(l + 1) for l in range(len(subjects.cell_covariates), len(p_sizes)))
        raise FuncArgsError("new subjects are missing covariate block(s) {}".format(missing or "<extra blocks>"))
    for l, (block, p) in enumerate(zip(subjects.cell_covariates, p_sizes)):
        if block.shape[1] != p:
            raise FuncArgsError("covariate block X{} has {} columns, the fit has {}".format(l + 1, block.shape[1], p))
    if not measurement_error and getattr(subjects, "proportions", None) is None:
        raise FuncArgsError("variants without the proportion regression need observed proportions")


def _curve_parts(params, subjects, measurement_error):
    xi0, xi, kappa, beta0, beta, zeta0, zeta = params
    log_theta = xi0 + subjects.clinical @ xi
    log_mu = np.column_stack([beta0[l] + subjects.cell_covariates[l] @ beta[l] for l in range(len(beta))])
    log_lambda = log_mu - gammaln(1.0 + 1.0 / kappa)
    if measurement_error:
        log_alpha = np.column_stack([zeta0[l] + subjects.cell_covariates[l] @ zeta[l] for l in range(len(zeta))])
        props = np.exp(log_alpha - logsumexp(log_alpha, axis=1, keepdims=True))
    else:
        props = np.asarray(subjects.proportions, dtype=float)
    return log_theta, log_lambda, props, kappa


def predict_survival(fit, subjects, t_grid, mode="mpm", drawwise=False, summary=None):
    """
    新个体的人群生存曲线
    Args:
        fit: FitResult
        subjects: 带有clinical、cell_covariates(和proportions)的数据
        t_grid: 正的递增时间网格
        mode: mpm 使用MPM系数和其他参数的后验均值, noBVS 使用所有参数的后验均值
        drawwise: True时对每个样本计算曲线后取平均
        summary: 已有的PosteriorSummary, 缺省时重新汇总
    Returns:
        PredictionCurve
    """
    if mode not in ("mpm", "noBVS"):
        raise ContractError("unknown prediction mode '{}', expected mpm or noBVS".format(mode))
    t_grid = np.asarray(t_grid, dtype=float)
    if np.any(t_grid <= 0):
        raise DomainError("prediction grid must be positive")
    me = fit.spec.has_measurement_error
    d = fit.chains[0].d
    _check_subjects(subjects, fit.p_sizes, d, me)
    missing = {"xi0", "xi", "kappa", "beta0", "beta"} - set(fit.blocks)
    if me:
        missing |= {"zeta0", "zeta"} - set(fit.blocks)
    if missing:
        raise ContractError("prediction needs the recorded block(s) {}".format(sorted(missing)))

    if drawwise:
        total = np.zeros((subjects.clinical.shape[0], t_grid.shape[0]))
        for chain in fit.chains:
            for k in range(chain.n_draws):
                state = chain.state_at(k)
                params = (state.xi0, state.xi, state.kappa, state.beta0, state.beta, state.zeta0, state.zeta)
                total += _survival_grid(*_curve_parts(params, subjects, me), t_grid)
        return PredictionCurve(t_grid, np.minimum(total / fit.n_draws, 1.0), "curve-mean")

    summary = summary if summary is not None else summarize(fit)
    L = len(fit.p_sizes)
    zeta0 = summary.mean["zeta0"] if me else np.zeros(L)
    zeta = summary.split(summary.estimate("zeta", mode)) if me else [np.zeros(p) for p in fit.p_sizes]
    params = (float(summary.mean["xi0"][0]), summary.mean["xi"], float(summary.mean["kappa"][0]),
              summary.mean["beta0"], summary.split(summary.estimate("beta", mode)), zeta0, zeta)
    values = _survival_grid(*_curve_parts(params, subjects, me), t_grid)
    return PredictionCurve(t_grid, values, "plugin-mpm" if mode == "mpm" else "plugin-mean")


def credible_interval_covers(summary, name, truth):
    """
    可信区间是否覆盖真值以及是否排除0
    Returns:
        (covers, excludes_zero) 两个布尔数组
    """
    truth = np.asarray(truth, dtype=float)
    lower, upper = summary.lower[name], summary.upper[name]
    if truth.shape != lower.shape:
        raise FuncArgsError("{} has {} entries, truth has {}".format(name, lower.shape[0], truth.shape[0]))
    return (lower <= truth) & (truth <= upper), (lower > 0) | (upper < 0)


def variant_metrics(summary, truth, mode="mpm"):
    """
    一行评价指标: beta/zeta 的scaled RMSE, gamma/eta 的准确率、灵敏度、特异度
    不存在的块(例如变体*1的zeta)为None
    """
    row = {"variant": summary.variant}
    for indicator, coef_name in _SELECTION_PAIRS.items():
        row["rmse_" + coef_name] = None
        for field in SelectionMetrics._fields:
            row["{}_{}".format(field, indicator)] = None
        if coef_name in summary.mpm_coef:
            row["rmse_" + coef_name] = scaled_rmse(summary.estimate(coef_name, mode), truth.flat(coef_name))
        if indicator in summary.mpm:
            metrics = selection_metrics(summary.mpm[indicator], truth.active(coef_name))
            for field, value in metrics._asdict().items():
                row["{}_{}".format(field, indicator)] = value
    return row
