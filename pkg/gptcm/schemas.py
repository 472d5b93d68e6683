#!/usr/bin/env python3
# coding=utf-8

"""
@author: guoyanfeng
@software: PyCharm
@time: 19-8-9 下午2:05

命令配置和数据文件的marshmallow schema, 未知的键一律拒绝
"""
from marshmallow import Schema, ValidationError, fields, validate, validates_schema

from .domain import Variant
from .mcmc_engine import BLOCK_NAMES
from .simulation import PRESETS

__all__ = ("DatasetSidecarSchema", "HyperSchema", "MrfSchema", "FitConfigSchema", "SimulateConfigSchema",
           "SummarizeConfigSchema", "EvaluateConfigSchema", "PredictConfigSchema", "TruthSchema",
           "ChainStoreSchema", "VARIANT_NAMES")

VARIANT_NAMES = [variant.value for variant in Variant]
_POSITIVE = validate.Range(min=0, min_inclusive=False)
_UNIT = validate.Range(min=0, max=1, min_inclusive=False, max_inclusive=False)


class _VariantField(fields.Str):
    """接受 mrf2 / MRF2 / GPTCM-MRF2, load后为规范名称"""

    def _deserialize(self, value, attr, data, **kwargs):
        text = super()._deserialize(value, attr, data, **kwargs)
        key = text.strip().lower()
        if key.startswith("gptcm-"):
            key = key[len("gptcm-"):]
        for name in VARIANT_NAMES:
            if name.lower() == key:
                return name
        raise ValidationError("Must be one of: {}.".format(", ".join(VARIANT_NAMES)))


class DatasetSidecarSchema(Schema):
    """数据集目录下 dataset.json"""
    format_version = fields.Int(required=True, validate=validate.Equal(1))
    n = fields.Int(required=True, validate=validate.Range(min=1))
    d = fields.Int(required=True, validate=validate.Range(min=1))
    L = fields.Int(required=True, validate=validate.Range(min=1))
    p_sizes = fields.List(fields.Int(validate=validate.Range(min=0)), required=True)
    clinical_columns = fields.List(fields.Str(), required=True)

    @validates_schema
    def check_blocks(self, data, **kwargs):
        if len(data["p_sizes"]) != data["L"]:
            raise ValidationError("p_sizes has {} entries, L is {}".format(len(data["p_sizes"]), data["L"]),
                                  "p_sizes")
        if len(data["clinical_columns"]) != data["d"]:
            raise ValidationError("clinical_columns has {} names, d is {}".format(
                len(data["clinical_columns"]), data["d"]), "clinical_columns")


class HyperSchema(Schema):
    a_kappa = fields.Float(validate=_POSITIVE)
    b_kappa = fields.Float(validate=_POSITIVE)
    a_v = fields.Float(validate=_POSITIVE)
    b_v = fields.Float(validate=_POSITIVE)
    a_v0 = fields.Float(validate=_POSITIVE)
    b_v0 = fields.Float(validate=_POSITIVE)
    a_tau = fields.Float(validate=_POSITIVE)
    b_tau = fields.Float(validate=_POSITIVE)
    a_tau0 = fields.Float(validate=_POSITIVE)
    b_tau0 = fields.Float(validate=_POSITIVE)
    a_w = fields.Float(validate=_POSITIVE)
    b_w = fields.Float(validate=_POSITIVE)
    a_w0 = fields.Float(validate=_POSITIVE)
    b_w0 = fields.Float(validate=_POSITIVE)
    a_pi = fields.Float(validate=_POSITIVE)
    b_pi = fields.Float(validate=_POSITIVE, allow_none=True)
    a_rho = fields.Float(validate=_POSITIVE)
    b_rho = fields.Float(validate=_POSITIVE, allow_none=True)
    c = fields.Float(validate=_POSITIVE)
    s = fields.Float(validate=_UNIT)


class MrfSchema(Schema):
    """
    graph/graph_eta 为权重矩阵CSV的路径, 缺省时使用数据集目录下的graph.csv
    """
    graph = fields.Str(allow_none=True, load_default=None)
    graph_eta = fields.Str(allow_none=True, load_default=None)
    b = fields.Float(validate=validate.Range(min=0), load_default=0.1)


class FitConfigSchema(Schema):
    data = fields.Str(required=True)
    out_dir = fields.Str(required=True)
    variant = _VariantField(required=True)
    iterations = fields.Int(validate=validate.Range(min=1), load_default=25000)
    warmup = fields.Int(validate=validate.Range(min=0), load_default=5000)
    thin = fields.Int(validate=validate.Range(min=1), load_default=1)
    chains = fields.Int(validate=validate.Range(min=1), load_default=1)
    seed = fields.Int(validate=validate.Range(min=0), load_default=1)
    threads = fields.Int(validate=validate.Range(min=1), load_default=1)
    record = fields.List(fields.Str(validate=validate.OneOf(BLOCK_NAMES)), allow_none=True, load_default=None)
    pointwise_loglik = fields.Bool(load_default=False)
    prior_only = fields.Bool(load_default=False)
    debug_check = fields.Bool(load_default=False)
    log_every = fields.Int(validate=validate.Range(min=0), load_default=1000)
    storage = fields.Str(validate=validate.OneOf(("csv", "npy")), load_default="csv")
    hyper = fields.Nested(HyperSchema, load_default=dict)
    mrf = fields.Nested(MrfSchema, load_default=dict)

    @validates_schema
    def check_warmup(self, data, **kwargs):
        if data["warmup"] >= data["iterations"]:
            raise ValidationError("warmup {} must be smaller than iterations {}".format(
                data["warmup"], data["iterations"]), "warmup")


class SimulateConfigSchema(Schema):
    out_dir = fields.Str(required=True)
    preset = fields.Str(validate=validate.OneOf(sorted(PRESETS)), load_default="low-dim")
    n = fields.Int(validate=validate.Range(min=1), allow_none=True, load_default=None)
    p = fields.Int(validate=validate.Range(min=1), allow_none=True, load_default=None)
    L = fields.Int(validate=validate.Range(min=1), allow_none=True, load_default=None)
    seed = fields.Int(validate=validate.Range(min=0), load_default=1)
    threads = fields.Int(validate=validate.Range(min=1), load_default=1)
    validation = fields.Bool(load_default=True)
    kappa = fields.Float(validate=_POSITIVE, allow_none=True, load_default=None)
    rho = fields.Float(validate=validate.Range(min=-1, max=1, min_inclusive=False, max_inclusive=False),
                       allow_none=True, load_default=None)
    rho_blocks = fields.List(fields.Float(validate=validate.Range(min=-1, max=1, min_inclusive=False,
                                                                  max_inclusive=False)),
                             allow_none=True, load_default=None)
    noncured_method = fields.Str(validate=validate.OneOf(("bisect", "mh")), load_default="bisect")


class SummarizeConfigSchema(Schema):
    fit_dir = fields.Str(required=True)
    out_dir = fields.Str(required=True)
    level = fields.Float(validate=_UNIT, load_default=0.95)
    threshold = fields.Float(validate=validate.Range(min=0, max=1), load_default=0.5)
    seed = fields.Int(load_default=1)
    threads = fields.Int(validate=validate.Range(min=1), load_default=1)


class EvaluateConfigSchema(Schema):
    fit_dirs = fields.List(fields.Str(), required=True, validate=validate.Length(min=1))
    truth = fields.Str(required=True)
    validation = fields.Str(allow_none=True, load_default=None)
    out_dir = fields.Str(required=True)
    mode = fields.Str(validate=validate.OneOf(("mpm", "noBVS")), load_default="mpm")
    drawwise = fields.Bool(load_default=False)
    grid_size = fields.Int(validate=validate.Range(min=2), load_default=50)
    grid_quantile = fields.Float(validate=_UNIT, load_default=0.8)
    seed = fields.Int(load_default=1)
    threads = fields.Int(validate=validate.Range(min=1), load_default=1)


class PredictConfigSchema(Schema):
    fit_dir = fields.Str(required=True)
    data = fields.Str(required=True)
    out_dir = fields.Str(required=True)
    grid = fields.List(fields.Float(validate=_POSITIVE), allow_none=True, load_default=None)
    grid_size = fields.Int(validate=validate.Range(min=2), load_default=50)
    grid_quantile = fields.Float(validate=_UNIT, load_default=0.8)
    mode = fields.Str(validate=validate.OneOf(("mpm", "noBVS")), load_default="mpm")
    drawwise = fields.Bool(load_default=False)
    seed = fields.Int(load_default=1)
    threads = fields.Int(validate=validate.Range(min=1), load_default=1)


class TruthSchema(Schema):
    """truth.json"""
    mode = fields.Str(required=True, validate=validate.OneOf(("gptcm", "cox_misspec")))
    xi0 = fields.Float(required=True)
    xi = fields.List(fields.Float(), required=True)
    kappa = fields.Float(required=True, validate=_POSITIVE)
    beta0 = fields.List(fields.Float(), required=True)
    beta = fields.List(fields.List(fields.Float()), required=True)
    zeta0 = fields.List(fields.Float(), required=True)
    zeta = fields.List(fields.List(fields.Float()), required=True)
    cured = fields.List(fields.Int(validate=validate.OneOf((0, 1))), required=True)
    latent_time = fields.List(fields.Float(allow_none=True), required=True)
    censor_time = fields.List(fields.Float(), required=True)
    props = fields.List(fields.List(fields.Float()), required=True)
    theta = fields.List(fields.Float(), required=True)
    h0 = fields.Float(allow_none=True, load_default=None)
    seed = fields.Int(allow_none=True, load_default=None)


class ChainStoreSchema(Schema):
    """拟合目录下 store.json"""
    format = fields.Str(required=True, validate=validate.OneOf(("csv", "npy")))
    version = fields.Int(required=True, validate=validate.Equal(1))
    variant = _VariantField(required=True)
    blocks = fields.List(fields.Str(validate=validate.OneOf(BLOCK_NAMES)), required=True)
    chains = fields.List(fields.Int(), required=True)
    failed = fields.List(fields.List(fields.Raw()), load_default=list)
    p_sizes = fields.List(fields.Int(), required=True)
    d = fields.Int(required=True)
    hyper = fields.Dict(required=True)
    run = fields.Dict(required=True)
    mrf = fields.Dict(load_default=dict)
    diagnostics = fields.Dict(load_default=dict)
    rhat = fields.Dict(load_default=dict)
    ess = fields.Dict(load_default=dict)
    identical_chains = fields.Bool(load_default=False)
    clamp_count = fields.List(fields.Int(), load_default=list)
    incidents = fields.List(fields.List(fields.Dict()), load_default=list)
