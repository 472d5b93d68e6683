#!/usr/bin/env python3
# coding=utf-8

"""
@author: guoyanfeng
@software: PyCharm
@time: 19-8-4 上午9:47

通用单变量抽样器(切片抽样, ARMS), 共轭Gibbs抽样, 指示变量的Metropolis更新和随机数流
"""
from collections import namedtuple

import aelog
import numpy as np
from scipy.special import logsumexp

from .exceptions import ContractError, DomainError, SamplerError
from .model_core import indicator_log_prior, mrf_flip_delta

__all__ = ("LogDensity", "SamplerDiagnostics", "IndicatorMove", "rng_stream", "slice_sample", "arms_sample",
           "arms_abscissae", "gibbs_draw_invgamma", "gibbs_draw_beta", "indicator_block_update")

IndicatorMove = namedtuple("IndicatorMove", ["indicators", "coefficients", "accepted", "index"])

# 无穷边界外推时, 截断点的对数密度比最大值低这么多
ARMS_TAIL_DROP = 25.0
ARMS_MAX_TRIES = 200
ARMS_MAX_ABSCISSAE = 60
SLICE_MAX_SHRINK = 500


def rng_stream(seed, chain_id=0, block_id=0):
    """
    基于计数器的Philox4x64随机数流, (seed, chain_id, block_id) 相同则序列相同
    Args:
        seed: 非负整数种子
        chain_id: 链编号
        block_id: 参数块编号
    Returns:
        numpy.random.Generator
    """
    sequence = np.random.SeedSequence(int(seed), spawn_key=(int(chain_id), int(block_id)))
    return np.random.Generator(np.random.Philox(sequence))


class LogDensity(object):
    """
    一元对数密度(差一个常数)和它的支撑 [lower, upper]
    """
    __slots__ = ["func", "lower", "upper"]

    def __init__(self, func, lower=-np.inf, upper=np.inf):
        if not lower < upper:
            raise ContractError("support lower={} must be below upper={}".format(lower, upper))
        self.func = func
        self.lower = float(lower)
        self.upper = float(upper)

    def __call__(self, x):
        if not self.lower < x < self.upper:
            return -np.inf
        return float(self.func(x))

    def contains(self, x):
        return self.lower < x < self.upper


class SamplerDiagnostics(object):
    """
    按参数块统计的计数器
    """
    FIELDS = ("proposals", "acceptances", "slice_expansions", "slice_shrinks", "arms_rebuilds", "clamp_events")

    def __init__(self):
        self.blocks = {}

    def add(self, block, **counts):
        entry = self.blocks.setdefault(block, dict.fromkeys(self.FIELDS, 0))
        for field, count in counts.items():
            if field not in entry:
                raise KeyError("unknown diagnostics field {}".format(field))
            entry[field] += int(count)
        return self

    def get(self, block, field):
        return self.blocks.get(block, {}).get(field, 0)

    def acceptance_rate(self, block):
        proposals = self.get(block, "proposals")
        return self.get(block, "acceptances") / proposals if proposals else None

    def merge(self, other):
        for block, entry in other.blocks.items():
            self.add(block, **entry)
        return self

    def to_dict(self):
        return {block: dict(entry) for block, entry in sorted(self.blocks.items())}

    @classmethod
    def from_dict(cls, values):
        diagnostics = cls()
        for block, entry in values.items():
            diagnostics.add(block, **entry)
        return diagnostics


def slice_sample(ld, x0, width=1.0, max_steps=50, rng=None, diagnostics=None, block="slice"):
    """
    stepping-out + shrinkage 切片抽样, 一次返回一个样本
    Args:
        ld: LogDensity
        x0: 当前点
        width: 初始区间宽度
        max_steps: stepping-out最多扩展的次数, 用完后直接在当前区间上收缩
        rng: numpy Generator
        diagnostics: 可选的SamplerDiagnostics
        block: 统计时使用的块名
    Returns:
        新的样本点
    """
    lx0 = ld(x0)
    if not np.isfinite(lx0):
        raise ContractError("slice sampler started at x0={} with log density {}".format(x0, lx0))
    level = lx0 - rng.exponential()
    left = x0 - width * rng.uniform()
    right = left + width
    j = int(np.floor(max_steps * rng.uniform()))
    k = max_steps - 1 - j
    expansions = 0
    while j > 0 and ld(left) > level:
        left -= width
        j -= 1
        expansions += 1
    while k > 0 and ld(right) > level:
        right += width
        k -= 1
        expansions += 1

    for shrinks in range(SLICE_MAX_SHRINK):
        x1 = left + (right - left) * rng.uniform()
        if ld(x1) > level:
            if diagnostics is not None:
                diagnostics.add(block, proposals=1, acceptances=1, slice_expansions=expansions,
                                slice_shrinks=shrinks)
            return x1
        if x1 < x0:
            left = x1
        else:
            right = x1
    raise SamplerError("slice sampler did not find a point on the slice after {} shrinks at x0={}".format(
        SLICE_MAX_SHRINK, x0))


class _Hull(object):
    """
    ARMS的割线包络 h(x) = max(L_{i,i+1}, min(L_{i-1,i}, L_{i+1,i+2}))

    每段在交点之间是线性的, 相邻横坐标区间之间允许不连续
    """

    def __init__(self, xs, hs, lower, upper):
        self.xs = xs
        self.hs = hs
        self.slopes = np.diff(hs) / np.diff(xs)
        k = len(xs)
        pieces = [(lower, xs[0], (0,))]
        for i in range(k - 1):
            pieces.append((xs[i], xs[i + 1], (i, i - 1, i + 1)))
        pieces.append((xs[-1], upper, (k - 2,)))
        segments = []
        for start, end, lines in pieces:
            lines = tuple(m for m in lines if 0 <= m < k - 1)
            points = {start, end}
            for a in range(len(lines)):
                for b in range(a + 1, len(lines)):
                    cross = self._intersection(lines[a], lines[b])
                    if cross is not None and start < cross < end:
                        points.add(cross)
            points = sorted(points)
            for a, b in zip(points[:-1], points[1:]):
                segments.append((a, b, self._piece_value(a, lines), self._piece_value(b, lines)))
        self.starts, self.ends, self.g_lo, self.g_hi = (np.asarray(column) for column in zip(*segments))
        self.log_mass = _log_segment_mass(self.g_lo, self.g_hi, self.ends - self.starts)

    def _line(self, m, x):
        return self.hs[m] + self.slopes[m] * (x - self.xs[m])

    def _intersection(self, a, b):
        ds = self.slopes[a] - self.slopes[b]
        if ds == 0:
            return None
        return self.xs[a] + (self._line(b, self.xs[a]) - self.hs[a]) / ds

    def _piece_value(self, x, lines):
        own = self._line(lines[0], x)
        others = [self._line(m, x) for m in lines[1:]]
        return max(own, min(others)) if others else own

    def __call__(self, x):
        seg = int(np.clip(np.searchsorted(self.starts, x, side="right") - 1, 0, self.starts.size - 1))
        frac = (x - self.starts[seg]) / (self.ends[seg] - self.starts[seg])
        return float(self.g_lo[seg] + frac * (self.g_hi[seg] - self.g_lo[seg]))

    def sample(self, rng):
        probs = np.exp(self.log_mass - logsumexp(self.log_mass))
        seg = int(rng.choice(probs.size, p=probs / probs.sum()))
        z_a, z_b = self.starts[seg], self.ends[seg]
        width = z_b - z_a
        slope = (self.g_hi[seg] - self.g_lo[seg]) / width
        u = rng.uniform()
        rate = abs(slope)
        if rate * width < 1e-10:
            return z_a + u * width
        # 从密度较高的一端做截断指数分布的逆变换
        offset = -np.log1p(u * np.expm1(-rate * width)) / rate
        return z_b - offset if slope > 0 else z_a + offset


def _log_segment_mass(g_a, g_b, widths):
    """
    exp(线性函数) 在每段上的积分的对数
    """
    top = np.maximum(g_a, g_b)
    gap = np.abs(g_b - g_a)
    with np.errstate(divide="ignore", invalid="ignore"):
        shape = np.where(gap > 1e-10, np.log(-np.expm1(-gap)) - np.log(gap), -0.5 * gap)
    return np.log(widths) + top + shape


def arms_abscissae(center, scale):
    """
    ARMS的初始横坐标: 当前点 +/- {2, 1, 0} 倍先验标准差
    """
    scale = scale if scale > 0 and np.isfinite(scale) else 1.0
    return center + scale * np.array([-2.0, -1.0, 0.0, 1.0, 2.0])


def _arms_support(ld, xs, hs, lower, upper):
    """
    把无穷边界替换为有限的截断点, 外推直到对数密度比最大值低 ARMS_TAIL_DROP
    """
    xs, hs = list(xs), list(hs)
    bounds = []
    for side, bound in ((-1, lower), (1, upper)):
        if np.isfinite(bound):
            bounds.append(bound)
            continue
        step = max(xs[-1] - xs[0], 1.0)
        edge = xs[0] if side < 0 else xs[-1]
        for _ in range(60):
            point = edge + side * step
            value = ld(point)
            if np.isnan(value) or value == np.inf:
                raise SamplerError("log density is {} at x={}".format(value, point))
            if value < max(hs) - ARMS_TAIL_DROP:
                bounds.append(point)
                break
            if len(xs) < ARMS_MAX_ABSCISSAE:
                index = 0 if side < 0 else len(xs)
                xs.insert(index, point)
                hs.insert(index, value)
            edge = point
            step *= 2.0
        else:
            raise SamplerError("could not bound the ARMS support on the {} side".format(
                "lower" if side < 0 else "upper"))
    return np.asarray(xs), np.asarray(hs), bounds[0], bounds[1]


def arms_sample(ld, init_abscissae, bounds=None, rng=None, current=None, diagnostics=None, block="arms"):
    """
    自适应拒绝Metropolis抽样(ARMS)

    分段线性的割线包络 + 拒绝步, 被接受的候选点再做一次Metropolis校正, 所以目标密度不是严格
    log-concave 时也保持不变分布
    Args:
        ld: LogDensity
        init_abscissae: 至少3个初始横坐标
        bounds: (lower, upper), 缺省取ld的支撑
        rng: numpy Generator
        current: 链的当前点, 缺省为初始横坐标的中位数
        diagnostics: 可选的SamplerDiagnostics
        block: 统计时使用的块名
    Returns:
        新的样本点
    """
    lower, upper = bounds if bounds is not None else (ld.lower, ld.upper)
    lower, upper = max(lower, ld.lower), min(upper, ld.upper)
    xs = np.unique(np.asarray(init_abscissae, dtype=float))
    xs = xs[(xs > lower) & (xs < upper)]
    if current is None:
        current = float(np.median(xs)) if xs.size else None
    if current is None or not lower < current < upper:
        raise ContractError("ARMS current point {} is outside ({}, {})".format(current, lower, upper))
    if current not in xs:
        xs = np.sort(np.append(xs, current))
    hs = np.array([ld(x) for x in xs])
    if np.any(np.isnan(hs)) or np.any(hs == np.inf):
        raise SamplerError("log density is not finite at abscissae {}".format(xs[np.isnan(hs) | (hs == np.inf)]))
    finite = np.isfinite(hs)
    xs, hs = xs[finite], hs[finite]
    if xs.size < 3:
        raise SamplerError("ARMS envelope is degenerate: only {} abscissae with finite log density".format(xs.size))
    h_current = ld(current)
    if not np.isfinite(h_current):
        raise ContractError("ARMS current point {} has log density {}".format(current, h_current))
    xs, hs, lower, upper = _arms_support(ld, xs, hs, lower, upper)

    hull = _Hull(xs, hs, lower, upper)
    rebuilds = 0
    for tries in range(1, ARMS_MAX_TRIES + 1):
        proposal = hull.sample(rng)
        h_proposal = ld(proposal)
        if np.isnan(h_proposal):
            raise SamplerError("log density is NaN at x={}".format(proposal))
        g_proposal = hull(proposal)
        if np.log(rng.uniform()) > h_proposal - g_proposal:
            # 拒绝点加入横坐标, 包络变紧
            if np.isfinite(h_proposal) and xs.size < ARMS_MAX_ABSCISSAE:
                index = np.searchsorted(xs, proposal)
                if index >= xs.size or xs[index] != proposal:
                    xs, hs = np.insert(xs, index, proposal), np.insert(hs, index, h_proposal)
                    hull = _Hull(xs, hs, lower, upper)
                    rebuilds += 1
            continue
        log_ratio = (h_proposal + min(h_current, hull(current))) - (h_current + min(h_proposal, g_proposal))
        accepted = np.log(rng.uniform()) <= log_ratio
        if diagnostics is not None:
            diagnostics.add(block, proposals=1, acceptances=int(accepted), arms_rebuilds=rebuilds)
        return proposal if accepted else current
    raise SamplerError("ARMS rejected {} envelope proposals in a row".format(ARMS_MAX_TRIES))


def gibbs_draw_invgamma(shape, rate, rng):
    """
    逆Gamma(shape, rate) 抽样
    """
    if not (shape > 0 and rate > 0):
        raise DomainError("inverse gamma needs positive shape and rate, got ({}, {})".format(shape, rate))
    return float(rate / rng.gamma(shape, 1.0))


def gibbs_draw_beta(a, b, rng):
    """
    Beta(a, b) 抽样, a/b 可以是数组
    """
    a, b = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
    if np.any(a <= 0) or np.any(b <= 0):
        raise DomainError("beta needs positive parameters, got ({}, {})".format(a.tolist(), b.tolist()))
    # 端点上的抽样会让 log(pi) 发散
    return np.clip(rng.beta(a, b), 1e-12, 1.0 - 1e-12)


def indicator_block_update(l, which, state, data, spec, rng, workspace, derived, diagnostics=None):
    """
    第l个细胞类型的指示变量块的MC3更新

    在块内均匀选一个坐标翻转; 0->1 时系数从slab先验 N(0, var) 中抽取, 1->0 时系数置0,
    所以接受率为先验比乘以似然比. Bernoulli变体的先验为独立Bernoulli(pi_jl), MRF变体为MRF先验
    Args:
        l: 细胞类型下标
        which: "gamma" (beta块) 或 "eta" (zeta块)
        state: 当前参数状态, 不会被修改
        data: 数据集
        spec: 模型设定
        rng: numpy Generator
        workspace: LikelihoodWorkspace
        derived: 与state一致的DerivedQuantities
        diagnostics: 可选的SamplerDiagnostics
    Returns:
        IndicatorMove(第l块的指示变量, 第l块的系数, 是否接受, 翻转的坐标)
    """
    if which == "gamma":
        indicators, coefs, var = state.gamma[l], state.beta[l], state.tau2[l]
        probs, graph, target_factory = state.pi[l], spec.graph_beta, workspace.beta_target
    elif which == "eta":
        indicators, coefs, var = state.eta[l], state.zeta[l], state.w2[l]
        probs, graph, target_factory = state.rho[l], spec.graph_zeta, workspace.zeta_target
    else:
        raise ContractError("indicator block must be 'gamma' or 'eta', got {}".format(which))
    size = indicators.shape[0]
    if size == 0:
        return IndicatorMove(indicators, coefs, False, None)

    j = int(rng.integers(size))
    new_indicators, new_coefs = indicators.copy(), coefs.copy()
    new_indicators[j] = 1 - indicators[j]
    new_coefs[j] = rng.normal(0.0, np.sqrt(var)) if new_indicators[j] == 1 else 0.0

    if spec.variant.selection == "mrf":
        offset = int(sum(data.p_sizes[:l]))
        flat = state.flat(which)
        log_prior_ratio = mrf_flip_delta(flat, offset + j, graph)
    else:
        log_prior_ratio = (indicator_log_prior(new_indicators[j], probs[j])
                           - indicator_log_prior(indicators[j], probs[j]))

    target = target_factory(l, j, state, derived)
    slab = -0.5 * np.log(2.0 * np.pi * var)
    log_lik_new = target(new_coefs[j]) - (slab - 0.5 * new_coefs[j] ** 2 / var)
    log_lik_old = target(coefs[j]) - (slab - 0.5 * coefs[j] ** 2 / var)
    log_ratio = log_prior_ratio + log_lik_new - log_lik_old
    if np.isnan(log_ratio):
        aelog.warning("indicator move {}[{}][{}] produced a NaN acceptance ratio, rejected".format(which, l, j))
        log_ratio = -np.inf
    accepted = bool(np.log(rng.uniform()) < log_ratio)
    if diagnostics is not None:
        diagnostics.add(which, proposals=1, acceptances=int(accepted))
    if accepted:
        return IndicatorMove(new_indicators, new_coefs, True, j)
    return IndicatorMove(indicators, coefs, False, j)
