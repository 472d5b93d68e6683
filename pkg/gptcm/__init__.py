#!/usr/bin/env python3
# coding=utf-8

"""
@author: guoyanfeng
@software: PyCharm
@time: 19-8-2 下午2:00
"""
from .exceptions import *
from .domain import *
from .model_core import *
from .samplers import *
from .mcmc_engine import *
from .simulation import *
from .evaluation import *
from .data_io import *
from .decorators import *

__version__ = "1.0.0b2"
