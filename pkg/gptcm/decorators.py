#!/usr/bin/env python3
# coding=utf-8

"""
@author: guoyanfeng
@software: PyCharm
@time: 19-8-9 下午3:20
"""
from collections.abc import MutableMapping
from functools import wraps

import aelog
from marshmallow import RAISE, Schema, ValidationError

from .err_msg import schema_msg
from .exceptions import ConfigError, FuncArgsError
from .utils import verify_message

__all__ = ("schema_validate",)


def schema_validate(schema_obj, required: (tuple, list) = tuple(), is_extends=True, excluded: (tuple, list) = tuple(),
                    use_zh=False, message=None):
    """
    校验命令配置的格式和类型是否正确, 被装饰函数的第一个参数是配置字典, 校验后替换为load的结果
    Args:
        schema_obj: 定义的schema对象
        required: 需要标记require的字段
        excluded: 排除不需要的字段
        is_extends: 是否继承schemea本身其他字段的require属性， 默认继承
        use_zh: 消息提示是否使用中文，默认英文
        message: 提示消息
    Returns:
    """

    if not issubclass(schema_obj, Schema):
        raise FuncArgsError(message="schema_obj type error!")
    if not isinstance(required, (tuple, list)):
        raise FuncArgsError(message="required type error!")
    if not isinstance(excluded, (tuple, list)):
        raise FuncArgsError(message="excluded type error!")

    msg_key = "msg_zh" if use_zh else "msg_en"
    # 此处的功能保证，如果调用了多个校验装饰器，则其中一个更改了，所有的都会更改
    if not getattr(schema_validate, "message", None):
        setattr(schema_validate, "message", verify_message(schema_msg, message or {}))

    def _validated(func):
        """
        校验配置的格式和类型是否正确
        """

        @wraps(func)
        def _wrapper(config, *args, **kwargs):
            """
            校验配置的格式和类型是否正确
            """
            schema_message = getattr(schema_validate, "message", None)

            if not isinstance(config, MutableMapping):
                raise ConfigError(schema_message[201][msg_key] + " config must be a mapping")
            new_schema_obj = schema_obj(unknown=RAISE)
            if required:
                for key, val in new_schema_obj.fields.items():
                    if key in required:  # 反序列化期间，把特别需要的字段标记为required
                        setattr(new_schema_obj.fields[key], "required", True)
                        setattr(new_schema_obj.fields[key], "dump_only", False)
                    elif not is_extends:
                        setattr(new_schema_obj.fields[key], "required", False)
            try:
                valid_data = new_schema_obj.load(dict(config))
                # 把load后不需要的字段过滤掉
                for val in excluded:
                    valid_data.pop(val, None)
            except ValidationError as err:
                aelog.exception("{} config validation error, please check! error={}".format(
                    func.__name__, err.messages))
                raise ConfigError("{} {}".format(schema_message[201][msg_key], _flatten(err.messages)))
            except Exception as err:
                aelog.exception("{} config validation unknow error, please check! error={}".format(
                    func.__name__, str(err)))
                raise ConfigError("{} {}".format(schema_message[202][msg_key], str(err)))
            return func(valid_data, *args, **kwargs)

        return _wrapper

    return _validated


def _flatten(messages, prefix=""):
    """
    把marshmallow的嵌套错误信息压成一行, 例如 hyper.a_v: Must be greater than 0.
    """
    parts = []
    for key, val in sorted(messages.items(), key=lambda item: str(item[0])):
        name = "{}.{}".format(prefix, key) if prefix else str(key)
        if isinstance(val, MutableMapping):
            parts.append(_flatten(val, name))
        else:
            parts.append("{}: {}".format(name, " ".join(str(v) for v in val)))
    return "; ".join(parts)
