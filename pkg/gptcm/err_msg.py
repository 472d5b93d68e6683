#!/usr/bin/env python3
# coding=utf-8

"""
@author: guoyanfeng
@software: PyCharm
@time: 19-8-2 下午2:42
可配置消息模块, msg_code 同时是CLI输出的机器可解析错误码
"""

__all__ = ("input_msg", "runtime_msg", "schema_msg", "cli_msg")

# 输入错误 从1到100, CLI退出码2
input_msg = {
    1: {"msg_code": 1, "msg_zh": "数据集校验失败.", "msg_en": "Dataset validation failed.",
        "description": "读取数据集时发现一个或多个schema错误"},
    2: {"msg_code": 2, "msg_zh": "参数超出定义域.", "msg_en": "Argument outside its domain.",
        "description": "数值参数非正或者比例不在单纯形上"},
    3: {"msg_code": 3, "msg_zh": "调用前置条件不满足.", "msg_en": "Precondition violated.",
        "description": "维度不一致或者对未激活的系数求条件密度"},
    4: {"msg_code": 4, "msg_zh": "模型设定错误.", "msg_en": "Model specification error.",
        "description": "变体与MRF图不匹配或超参数非法"},
    5: {"msg_code": 5, "msg_zh": "配置文件错误.", "msg_en": "Configuration error.",
        "description": "配置文件无法解析或者键值非法"},
    6: {"msg_code": 6, "msg_zh": "参数状态不合法.", "msg_en": "Parameter state invalid.",
        "description": "gamma=0但beta非零, 或方差非正"},
}

# 运行错误 从100到200, CLI退出码3
runtime_msg = {
    100: {"msg_code": 100, "msg_zh": "抽样器失败.", "msg_en": "Sampler failed.",
          "description": "ARMS包络退化或者二分法区间溢出"},
    101: {"msg_code": 101, "msg_zh": "MCMC拟合失败.", "msg_en": "MCMC fit failed.",
          "description": "单条链的incident超过上限"},
    102: {"msg_code": 102, "msg_zh": "链未收敛或部分链失败.", "msg_en": "Fit did not converge or a chain failed.",
          "description": "多链拟合中部分链失败"},
    103: {"msg_code": 103, "msg_zh": "未知运行错误.", "msg_en": "Unknown runtime error.",
          "description": "未归类的运行错误"},
}

schema_msg = {
    # schema valication message
    201: {"msg_code": 201, "msg_zh": "配置数据有误，请重新检查.", "msg_en": "Config validation error, please check!",
          "description": "marmallow校验配置错误时的提示"},
    202: {"msg_code": 202, "msg_zh": "配置数据未知错误，请重新检查.",
          "msg_en": "Config validation unknow error, please check!",
          "description": "marmallow校验配置未知错误时的提示"},
}

cli_msg = {
    300: {"msg_code": 300, "msg_zh": "命令执行成功.", "msg_en": "Command finished.",
          "description": "CLI命令成功结束时的日志"},
}
