#!/usr/bin/env python3
# coding=utf-8

"""
@author: guoyanfeng
@software: PyCharm
@time: 19-8-7 下午2:15

多链收敛诊断: split R-hat 和有效样本量, 基于arviz

输入都是 (n_chain, n_draw) 的二维数组
"""
import arviz as az
import numpy as np

__all__ = ("split_rhat", "effective_sample_size")


def _undefined(ary):
    """draw太少, 含nan, 取值为常数, 或者多条链完全相同时诊断量无定义"""
    if ary.shape[1] < 4 or not np.isfinite(ary).all():
        return True
    if np.all(ary == ary.flat[0]):
        return True
    return ary.shape[0] > 1 and bool(np.all(ary == ary[:1]))


def split_rhat(ary):
    """
    split R-hat

    所有链完全相同或者链内方差为0时返回nan, 表示R-hat无定义
    Args:
        ary: (n_chain, n_draw)
    Returns:
        float
    """
    ary = np.atleast_2d(np.asarray(ary, dtype=float))
    if _undefined(ary):
        return np.nan
    return float(az.rhat(ary, method="split"))


def effective_sample_size(ary):
    """
    bulk有效样本量
    """
    ary = np.atleast_2d(np.asarray(ary, dtype=float))
    if _undefined(ary):
        return np.nan
    return float(az.ess(ary, method="bulk"))
