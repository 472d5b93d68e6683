#!/usr/bin/env python3
# coding=utf-8

"""
@author: guoyanfeng
@software: PyCharm
@time: 19-8-9 上午9:40

文件格式: 数据集目录、MRF图、真值记录、链存储、运行清单和结果表

数据集目录:
    dataset.json      {"format_version": 1, "n", "d", "L", "p_sizes", "clinical_columns"}
    survival.csv      time, event, 临床协变量列
    X1.csv .. XL.csv  细胞类型协变量, 列名 x1..xp
    proportions.csv   p1..pL
链存储目录:
    store.json        见 ChainStoreSchema
    csv模式: <block>.csv, 列为 chain, iteration, <block>[0] ...; loglik.csv; pointwise_loglik.csv(可选);
             warmup_<block>.csv 为预热期前100次迭代
    npy模式: chain<k>_<block>.npy, NPY 1.0格式, float64为'<f8', 指示变量为'|i1'
    graph_gamma.csv / graph_eta.csv  MRF变体的权重矩阵
所有浮点数以17位有效数字写出, 读入时逐位还原
"""
import os
import time

import aelog
import numpy as np
import pandas as pd
import ujson
from marshmallow import ValidationError

from .domain import HyperParams, ModelSpec, MrfGraph, SurvivalDataset
from .exceptions import ConfigError, DatasetError
from .mcmc_engine import ChainOutput, FitResult, RunConfig
from .samplers import SamplerDiagnostics
from .schemas import ChainStoreSchema, DatasetSidecarSchema, TruthSchema
from .simulation import SimulationTruth
from .utils import canonical_digest, file_digest, ignore_error

__all__ = ("FLOAT_FORMAT", "write_json", "read_json", "write_table", "read_table", "write_dataset", "read_dataset",
           "write_graph", "read_graph", "write_truth", "read_truth", "write_chain_store", "read_chain_store",
           "RunManifest", "write_manifest", "read_manifest", "verify_manifest")

FLOAT_FORMAT = "%.17g"
SIDECAR = "dataset.json"
STORE = "store.json"
MANIFEST = "manifest.json"
STORE_VERSION = 1
_INDICATOR_BLOCKS = ("gamma", "eta")


def write_json(obj, path):
    """键排序、缩进2的JSON"""
    with open(path, "w", encoding="utf8") as f:
        f.write(ujson.dumps(obj, sort_keys=True, indent=2, escape_forward_slashes=False))
        f.write("\n")
    aelog.debug("wrote {}".format(path))
    return path


def read_json(path):
    try:
        with open(path, "r", encoding="utf8") as f:
            return ujson.loads(f.read())
    except OSError as e:
        raise ConfigError("cannot read {}: {}".format(path, e))
    except ValueError as e:
        raise ConfigError("{} is not valid JSON: {}".format(path, e))


def write_table(frame, path):
    frame.to_csv(path, index=False, float_format=FLOAT_FORMAT, lineterminator="\n")
    aelog.debug("wrote {}".format(path))
    return path


def read_table(path, header="infer"):
    return pd.read_csv(path, float_precision="round_trip", header=header)


def write_dataset(dataset, path, clinical_columns=None):
    """
    把数据集写成一个目录
    Args:
        dataset: SurvivalDataset
        path: 目录, 不存在时创建
        clinical_columns: 临床协变量列名, 缺省为 x0_1..x0_d
    Returns:
        path
    """
    os.makedirs(path, exist_ok=True)
    clinical_columns = list(clinical_columns or ["x0_{}".format(k + 1) for k in range(dataset.d)])
    survival = pd.DataFrame(dataset.clinical, columns=clinical_columns)
    survival.insert(0, "event", dataset.event.astype(int))
    survival.insert(0, "time", dataset.time)
    write_table(survival, os.path.join(path, "survival.csv"))
    for l, block in enumerate(dataset.cell_covariates):
        columns = ["x{}".format(j + 1) for j in range(block.shape[1])]
        write_table(pd.DataFrame(block, columns=columns), os.path.join(path, "X{}.csv".format(l + 1)))
    columns = ["p{}".format(l + 1) for l in range(dataset.L)]
    write_table(pd.DataFrame(dataset.proportions, columns=columns), os.path.join(path, "proportions.csv"))
    write_json({"format_version": 1, "n": dataset.n, "d": dataset.d, "L": dataset.L,
                "p_sizes": [int(p) for p in dataset.p_sizes], "clinical_columns": clinical_columns},
               os.path.join(path, SIDECAR))
    aelog.info("wrote dataset n={} d={} L={} to {}".format(dataset.n, dataset.d, dataset.L, path))
    return path


def _numeric(frame, name, problems):
    """非数值列记入problems, 返回float数组或None"""
    bad = [column for column in frame.columns if not pd.api.types.is_numeric_dtype(frame[column])]
    for column in bad:
        problems.append("{} column {} is not numeric".format(name, column))
    return None if bad else frame.to_numpy(dtype=float)


def _read_part(path, name, problems):
    if not os.path.isfile(path):
        problems.append("missing {} file {}".format(name, path))
        return None
    try:
        return read_table(path)
    except (ValueError, pd.errors.ParserError) as e:
        problems.append("{} cannot be parsed: {}".format(name, e))
        return None


def read_dataset(path):
    """
    读取并校验数据集目录, 所有问题一次性列出
    Args:
        path: write_dataset写出的目录
    Returns:
        SurvivalDataset
    """
    problems = []
    sidecar = read_json(os.path.join(path, SIDECAR)) if os.path.isfile(os.path.join(path, SIDECAR)) else None
    if sidecar is None:
        raise DatasetError(["missing sidecar {}".format(os.path.join(path, SIDECAR))])
    try:
        sidecar = DatasetSidecarSchema().load(sidecar)
    except ValidationError as err:
        raise DatasetError(["{} {}: {}".format(SIDECAR, key, val) for key, val in sorted(err.messages.items())])
    n, d, L, p_sizes = sidecar["n"], sidecar["d"], sidecar["L"], sidecar["p_sizes"]

    survival = _read_part(os.path.join(path, "survival.csv"), "survival.csv", problems)
    time_, event, clinical = None, None, None
    if survival is not None:
        expected = ["time", "event"] + sidecar["clinical_columns"]
        if list(survival.columns) != expected:
            missing = [c for c in expected if c not in survival.columns]
            extra = [c for c in survival.columns if c not in expected]
            problems.append("survival.csv columns {} do not match {} (missing {}, unexpected {})".format(
                list(survival.columns), expected, missing, extra))
        else:
            values = _numeric(survival, "survival.csv", problems)
            if values is not None:
                time_, event, clinical = values[:, 0], values[:, 1], values[:, 2:]
                if survival.shape[0] != n:
                    problems.append("survival.csv has {} rows, dataset.json declares n={}".format(
                        survival.shape[0], n))
    blocks = []
    for l in range(L):
        name = "X{}.csv".format(l + 1)
        frame = _read_part(os.path.join(path, name), "covariate block X{}".format(l + 1), problems)
        if frame is None:
            continue
        if frame.shape[1] != p_sizes[l]:
            problems.append("{} has {} columns, dataset.json declares p_{}={}".format(
                name, frame.shape[1], l + 1, p_sizes[l]))
            continue
        values = _numeric(frame, name, problems)
        if values is not None:
            blocks.append(values)
    props = _read_part(os.path.join(path, "proportions.csv"), "proportions.csv", problems)
    if props is not None:
        if props.shape[1] != L:
            problems.append("proportions.csv has {} columns, dataset.json declares L={}".format(props.shape[1], L))
            props = None
        else:
            props = _numeric(props, "proportions.csv", problems)
    if clinical is not None and clinical.shape[1] != d:
        problems.append("survival.csv has {} clinical columns, dataset.json declares d={}".format(
            clinical.shape[1], d))
    if problems:
        raise DatasetError(problems)

    dataset = SurvivalDataset(time_, event, clinical, blocks, props)
    if np.any((event != 0) & (event != 1)):
        problems.extend("event row {} = {} is not 0 or 1".format(i, event[i])
                        for i in np.flatnonzero((event != 0) & (event != 1)))
    problems.extend(dataset.validate())
    if problems:
        raise DatasetError(problems)
    aelog.info("read dataset n={} d={} L={} from {}".format(dataset.n, dataset.d, dataset.L, path))
    return dataset


def write_graph(graph, path):
    """稠密的权重矩阵, 无表头"""
    frame = pd.DataFrame(graph.weights.toarray())
    frame.to_csv(path, index=False, header=False, float_format=FLOAT_FORMAT, lineterminator="\n")
    aelog.debug("wrote {}".format(path))
    return path


def read_graph(path, a, b):
    """
    读取权重矩阵
    Args:
        path: write_graph写出的CSV
        a: 稀疏参数
        b: 平滑强度
    Returns:
        MrfGraph
    """
    if not os.path.isfile(path):
        raise ConfigError("MRF graph file {} does not exist".format(path))
    weights = read_table(path, header=None).to_numpy(dtype=float)
    return MrfGraph(weights, a, b)


def write_truth(truth, path):
    return write_json(truth.to_dict(), path)


def read_truth(path):
    try:
        values = TruthSchema().load(read_json(path))
    except ValidationError as err:
        raise ConfigError("truth file {} is invalid: {}".format(path, err.messages))
    return SimulationTruth.from_dict(values)


def _labels(name, dim):
    return ["{}[{}]".format(name, k) for k in range(dim)]


def _finite_or_none(mapping):
    return {key: float(val) if np.isfinite(val) else None for key, val in sorted(mapping.items())}


def _block_frame(name, ids, arrays, iterations):
    frames = []
    for chain_id, values, its in zip(ids, arrays, iterations):
        frame = pd.DataFrame(values, columns=_labels(name, values.shape[1]))
        frame.insert(0, "iteration", its)
        frame.insert(0, "chain", chain_id)
        frames.append(frame)
    return pd.concat(frames, ignore_index=True)


def write_chain_store(fit, path, storage="csv"):
    """
    写出多链拟合结果, 同一(配置, 种子)写出的文件逐字节相同
    Args:
        fit: FitResult
        path: 输出目录
        storage: csv 或 npy
    Returns:
        写出的文件列表
    """
    if storage not in ("csv", "npy"):
        raise ConfigError("unknown storage '{}', expected csv or npy".format(storage))
    os.makedirs(path, exist_ok=True)
    cfg, spec = fit.cfg, fit.spec
    written = []
    iterations = [cfg.n_warmup + cfg.thin * (np.arange(chain.n_draws) + 1) for chain in fit.chains]
    head_iterations = [np.arange(1, chain.warmup_head["loglik"].shape[0] + 1) for chain in fit.chains]
    ids = [chain.chain_id for chain in fit.chains]

    def arrays(getter):
        return [(cid, getter(chain)) for cid, chain in zip(ids, fit.chains)]

    series = {name: arrays(lambda chain, name=name: chain.draws[name]) for name in fit.blocks}
    series["loglik"] = arrays(lambda chain: chain.loglik.reshape(-1, 1))
    if cfg.pointwise_loglik:
        series["pointwise_loglik"] = arrays(lambda chain: chain.pointwise)
    for name in fit.blocks + ("loglik",):
        series["warmup_" + name] = arrays(lambda chain, name=name: chain.warmup_head[name])

    for name, pairs in series.items():
        its = head_iterations if name.startswith("warmup_") else iterations
        if storage == "csv":
            frame = _block_frame(name.replace("warmup_", ""), ids, [values for _, values in pairs], its)
            written.append(write_table(frame, os.path.join(path, "{}.csv".format(name))))
        else:
            for cid, values in pairs:
                dtype = "|i1" if name in _INDICATOR_BLOCKS else "<f8"
                target = os.path.join(path, "chain{}_{}.npy".format(cid, name))
                np.save(target, np.ascontiguousarray(values, dtype=dtype), allow_pickle=False)
                written.append(target)

    mrf = {}
    for key, graph in (("gamma", spec.graph_beta), ("eta", spec.graph_zeta)):
        if graph is not None:
            mrf[key] = {"a": graph.a, "b": graph.b}
            written.append(write_graph(graph, os.path.join(path, "graph_{}.csv".format(key))))
    # 线程数不影响样本, 不写入
    run = cfg.to_dict()
    run.pop("threads")
    store = {
        "format": storage, "version": STORE_VERSION, "variant": spec.variant.value, "blocks": list(fit.blocks),
        "chains": ids, "failed": [[cid, msg] for cid, msg in fit.failed],
        "p_sizes": [int(p) for p in fit.p_sizes], "d": int(fit.chains[0].d), "hyper": spec.hyper.to_dict(),
        "run": run, "mrf": mrf,
        "diagnostics": {str(chain.chain_id): chain.diagnostics.to_dict() for chain in fit.chains},
        "rhat": _finite_or_none(fit.rhat), "ess": _finite_or_none(fit.ess),
        "identical_chains": bool(fit.identical_chains),
        "clamp_count": [chain.clamp_count for chain in fit.chains],
        "incidents": [chain.incidents for chain in fit.chains],
    }
    written.append(write_json(store, os.path.join(path, STORE)))
    aelog.info("wrote {} chain(s) of {} draws to {} ({})".format(len(fit.chains), fit.chains[0].n_draws, path,
                                                                  storage))
    return written


def _read_series(path, storage, name, ids):
    """按链号返回数组列表"""
    if storage == "csv":
        frame = read_table(os.path.join(path, "{}.csv".format(name)))
        values = frame.drop(columns=["chain", "iteration"])
        return [values[frame["chain"] == cid].to_numpy(dtype=np.int8 if name in _INDICATOR_BLOCKS else float)
                for cid in ids]
    return [np.load(os.path.join(path, "chain{}_{}.npy".format(cid, name)), allow_pickle=False) for cid in ids]


def read_chain_store(path):
    """
    读取write_chain_store写出的目录
    Returns:
        FitResult
    """
    try:
        store = ChainStoreSchema().load(read_json(os.path.join(path, STORE)))
    except ValidationError as err:
        raise ConfigError("chain store {} is invalid: {}".format(path, err.messages))
    storage, ids, blocks = store["format"], store["chains"], store["blocks"]
    graphs = {key: read_graph(os.path.join(path, "graph_{}.csv".format(key)), val["a"], val["b"])
              for key, val in store["mrf"].items()}
    spec = ModelSpec(store["variant"], HyperParams.from_dict(store["hyper"]), graphs.get("gamma"),
                     graphs.get("eta"))
    run = dict(store["run"])
    cfg = RunConfig(**run)

    draws = {name: _read_series(path, storage, name, ids) for name in blocks}
    heads = {name: _read_series(path, storage, "warmup_" + name, ids) for name in blocks + ["loglik"]}
    loglik = _read_series(path, storage, "loglik", ids)
    pointwise = _read_series(path, storage, "pointwise_loglik", ids) if cfg.pointwise_loglik else [None] * len(ids)
    chains = []
    for k, cid in enumerate(ids):
        diagnostics = SamplerDiagnostics.from_dict(store["diagnostics"].get(str(cid), {}))
        chains.append(ChainOutput(
            cid, blocks, {name: draws[name][k] for name in blocks}, loglik[k][:, 0], pointwise=pointwise[k],
            diagnostics=diagnostics, incidents=store["incidents"][k] if store["incidents"] else [],
            clamp_count=store["clamp_count"][k] if store["clamp_count"] else 0,
            warmup_head={name: heads[name][k] for name in heads}, p_sizes=store["p_sizes"], d=store["d"]))
    none_to_nan = {key: np.nan if val is None else val for key, val in store["rhat"].items()}
    ess = {key: np.nan if val is None else val for key, val in store["ess"].items()}
    fit = FitResult(spec, cfg, chains, failed=[tuple(item) for item in store["failed"]], rhat=none_to_nan, ess=ess,
                    identical_chains=store["identical_chains"])
    aelog.info("read {} chain(s) of variant {} from {}".format(len(chains), spec.variant.value, path))
    return fit


class RunManifest(object):
    """
    运行清单: 配置摘要、种子、变体、软件版本、耗时和输入输出文件摘要
    """
    __slots__ = ["command", "config", "config_hash", "seed", "variant", "version", "started", "elapsed", "inputs",
                 "outputs"]

    def __init__(self, command, config, seed=None, variant=None, version=None, started=None, elapsed=None,
                 inputs=None, outputs=None, config_hash=None):
        self.command = command
        self.config = config
        self.config_hash = config_hash or canonical_digest(config)
        self.seed = seed
        self.variant = variant
        self.version = version
        self.started = started
        self.elapsed = elapsed
        self.inputs = inputs or {}
        self.outputs = outputs or {}

    def to_dict(self):
        return {name: getattr(self, name) for name in self.__slots__}

    @classmethod
    def from_dict(cls, values):
        return cls(**values)

    def verify(self, root):
        """
        重新计算配置摘要和文件摘要, 返回不一致的列表
        """
        problems = []
        if canonical_digest(self.config) != self.config_hash:
            problems.append("config hash mismatch")
        for kind in ("inputs", "outputs"):
            for name, digest in sorted(getattr(self, kind).items()):
                target = name if os.path.isabs(name) else os.path.join(root, name)
                if not os.path.isfile(target):
                    problems.append("{} file {} is missing".format(kind[:-1], name))
                elif file_digest(target) != digest:
                    problems.append("{} file {} digest mismatch".format(kind[:-1], name))
        return problems


def _digests(paths, root):
    """文件摘要, 输出目录内的文件用相对路径作键"""
    root = os.path.abspath(root)
    files = []
    for item in paths:
        if os.path.isdir(item):
            files.extend(os.path.join(item, name) for name in sorted(os.listdir(item)))
        else:
            files.append(item)
    digests = {}
    for item in files:
        full = os.path.abspath(item)
        if not os.path.isfile(full) or os.path.basename(full) == MANIFEST:
            continue
        key = os.path.relpath(full, root) if full.startswith(root + os.sep) else full
        digests[key] = file_digest(full)
    return digests


def write_manifest(root, command, config, outputs, inputs=(), seed=None, variant=None, started=None):
    """
    在输出目录写manifest.json, 其中的配置足以复现这次运行
    """
    from . import __version__

    started = started if started is not None else time.time()
    manifest = RunManifest(command, config, seed=seed, variant=variant, version=__version__, started=started,
                           elapsed=time.time() - started, inputs=_digests(inputs, root),
                           outputs=_digests([p for p in outputs if os.path.basename(p) != MANIFEST], root))
    with ignore_error(OSError):
        os.remove(os.path.join(root, MANIFEST))
    write_json(manifest.to_dict(), os.path.join(root, MANIFEST))
    return manifest


def read_manifest(root):
    return RunManifest.from_dict(read_json(os.path.join(root, MANIFEST)))


def verify_manifest(root):
    """
    校验目录下的manifest.json
    Returns:
        不一致的列表, 为空表示通过
    """
    problems = read_manifest(root).verify(root)
    for problem in problems:
        aelog.warning("manifest {}: {}".format(root, problem))
    return problems
