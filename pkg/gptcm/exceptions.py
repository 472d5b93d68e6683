#!/usr/bin/env python3
# coding=utf-8

"""
@author: guoyanfeng
@software: PyCharm
@time: 19-8-2 下午2:08
"""

__all__ = ("Error", "DomainError", "ContractError", "FuncArgsError", "DatasetError", "StateError", "SpecError",
           "SamplerError", "FitError", "ConvergenceError", "ConfigError")


class Error(Exception):
    """
    异常基类
    """

    def __init__(self, message=None):
        self.message = message
        super().__init__(message)

    def __str__(self):
        return "Error: message='{}'".format(self.message)

    def __repr__(self):
        return "<{} '{}'>".format(self.__class__.__name__, self.message)


class DomainError(Error):
    """
    数值参数超出定义域, 例如非正的Weibull参数、不在单纯形上的比例
    """

    pass


class ContractError(Error):
    """
    调用方违反了前置条件
    """

    pass


class FuncArgsError(ContractError):
    """
    处理函数参数不匹配引发的error, 主要是维度不一致
    """

    pass


class DatasetError(Error):
    """
    数据集校验错误, problems中列出所有的问题而不是第一个
    """

    def __init__(self, problems, *, message=None):
        self.problems = list(problems)
        message = message or "; ".join(self.problems)
        super().__init__(message)

    def __str__(self):
        return "Error: {} problem(s): {}".format(len(self.problems), "; ".join(self.problems))

    def __repr__(self):
        return "<{} '{} problem(s)'>".format(self.__class__.__name__, len(self.problems))


class StateError(Error):
    """
    参数状态不满足不变量, 例如 gamma=0 但 beta!=0
    """

    pass


class SpecError(Error):
    """
    模型设定或超参数错误
    """

    pass


class SamplerError(Error):
    """
    抽样器失败, 例如ARMS包络退化
    """

    pass


class FitError(Error):
    """
    拟合失败, 例如单条链的incident超过上限
    """

    def __init__(self, message=None, *, chain_id=None, incidents=None):
        self.chain_id = chain_id
        self.incidents = incidents or []
        super().__init__(message)

    def __str__(self):
        return "Error: chain={}, message='{}'".format(self.chain_id, self.message)


class ConvergenceError(Error):
    """
    多链拟合中部分链失败, 结果被标记为未收敛
    """

    pass


class ConfigError(Error):
    """
    主要处理config error
    """

    pass
