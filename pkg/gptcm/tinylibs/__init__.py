#!/usr/bin/env python3
# coding=utf-8

"""
@author: guoyanfeng
@software: PyCharm
@time: 19-8-7 下午2:10
"""

from .blinker import *
from .convergence import *
