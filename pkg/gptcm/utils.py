#!/usr/bin/env python3
# coding=utf-8

"""
@author: guoyanfeng
@software: PyCharm
@time: 19-8-2 下午3:32
"""
import hashlib
import weakref
from collections.abc import MutableMapping, MutableSequence
from concurrent.futures import ThreadPoolExecutor
from contextlib import contextmanager

import ujson
import yaml

from .exceptions import ConfigError

try:
    from yaml import CSafeLoader as Loader
except ImportError:
    from yaml import SafeLoader as Loader

__all__ = ("ignore_error", "verify_message", "analysis_yaml", "canonical_digest", "file_digest", "run_ordered",
           "Cached")


@contextmanager
def ignore_error(error=Exception):
    """
    个别情况下会忽略遇到的错误
    Args:

    Returns:

    """
    # noinspection PyBroadException
    try:
        yield
    except error:
        pass


def verify_message(src_message: dict, message: list or dict):
    """
    对用户提供的message进行校验
    Args:
        src_message: 默认提供的消息内容
        message: 指定的消息内容
    Returns:

    """
    src_message = {key: dict(val) for key, val in src_message.items()}
    message = message if isinstance(message, MutableSequence) else [message]
    required_field = {"msg_code", "msg_zh", "msg_en"}

    for msg in message:
        if isinstance(msg, MutableMapping):
            if set(msg.keys()).intersection(required_field) == required_field and msg["msg_code"] in src_message:
                src_message[msg["msg_code"]].update(msg)
    return src_message


def analysis_yaml(full_conf_path):
    """
    解析配置文件, JSON是YAML的子集, 所以JSON配置也走这里
    Args:
        full_conf_path: 配置文件路径
    Returns:
        dict
    """
    try:
        with open(full_conf_path, 'rt', encoding="utf8") as f:
            conf = yaml.load(f, Loader=Loader)
    except OSError as e:
        raise ConfigError("Config file cannot be read, {}".format(e))
    except yaml.YAMLError as e:
        raise ConfigError("Config file parse error, {}".format(e))
    if conf is None:
        return {}
    if not isinstance(conf, MutableMapping):
        raise ConfigError("Config file must contain a mapping at top level, got {}".format(type(conf).__name__))
    return dict(conf)


def canonical_digest(obj) -> str:
    """
    对配置对象做规范化的sha256摘要, 键排序后序列化
    Args:
        obj: 可以被ujson序列化的对象
    Returns:
        十六进制摘要
    """
    payload = ujson.dumps(obj, sort_keys=True, escape_forward_slashes=False)
    return hashlib.sha256(payload.encode("utf8")).hexdigest()


def file_digest(path, chunk_size=1 << 16) -> str:
    """
    文件的sha256摘要
    Args:
        path: 文件路径
        chunk_size: 每次读取的字节数
    Returns:

    """
    sha = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(chunk_size), b""):
            sha.update(chunk)
    return sha.hexdigest()


def run_ordered(func, args_list, threads=1):
    """
    在线程池中执行任务, 结果按照提交顺序返回, 因此输出与线程数无关
    Args:
        func: 任务函数
        args_list: 每个任务的参数元组
        threads: 线程数
    Returns:
        list of (result, exception)
    """
    outcomes = []
    if threads <= 1:
        for args in args_list:
            try:
                outcomes.append((func(*args), None))
            except Exception as e:
                outcomes.append((None, e))
        return outcomes

    with ThreadPoolExecutor(max_workers=threads) as pool:
        futures = [pool.submit(func, *args) for args in args_list]
        for future in futures:
            exc = future.exception()
            outcomes.append((None, exc) if exc is not None else (future.result(), None))
    return outcomes


class _Cached(type):
    def __init__(cls, *args, **kwargs):
        super().__init__(*args, **kwargs)
        cls.__cache = weakref.WeakValueDictionary()

    def __call__(cls, *args, **kwargs):
        cached_name = f"{args}{kwargs}"
        if cached_name in cls.__cache:
            return cls.__cache[cached_name]
        else:
            obj = super().__call__(*args, **kwargs)
            cls.__cache[cached_name] = obj  # 这里是弱引用不能直接赋值，否则会被垃圾回收期回收
            return obj


class Cached(metaclass=_Cached):
    pass
