#!/usr/bin/env python3
# coding=utf-8

"""
@author: guoyanfeng
@software: PyCharm
@time: 19-8-6 下午11:35

实现简单的同步信号，用于MCMC扫描步骤的埋点, 与采样逻辑解耦
"""

from gptcm.utils import Cached

__all__ = ("Signal", "sweep_step")


class Signal(Cached):
    """
    同步信号实现, 同名信号只有一个实例
    """

    def __init__(self, signal_name):
        """
            同步信号实现
        Args:
            signal_name: 信号名称

        """
        self.signal_name = signal_name
        self.receiver = []

    def connect(self, receiver):
        """
        连接信号的订阅者
        Args:
            receiver: 信号订阅者
        Returns:

        """
        self.receiver.append(receiver)

    def disconnect(self, receiver):
        """
        取消连接信号的订阅者
        Args:
            receiver: 信号订阅者
        Returns:

        """
        self.receiver.remove(receiver)

    @property
    def has_receivers(self):
        return bool(self.receiver)

    def send(self, **kwargs):
        """
        发出信号到信号的订阅者，订阅者执行各自的功能
        Args:
            kwargs: 订阅者执行需要的参数
        Returns:

        """
        for func in list(self.receiver):
            func(**kwargs)
        return kwargs


# 每一个扫描步骤完成后发送 step=..., chain_id=..., iteration=..., l=...
sweep_step = Signal("sweep_step")
