#!/usr/bin/env python3
# coding=utf-8

"""
@author: guoyanfeng
@software: PyCharm
@time: 19-8-10 上午11:02

命令行: gptcm simulate | fit | summarize | evaluate | predict

配置文件中的键被命令行参数覆盖, 合并后的配置由schema校验;
出错时在stderr输出一行 error code=<msg_code> type=<异常名> message="<文本>", 输入错误退出码2, 运行错误退出码3
"""
import argparse
import os
import sys
import time

import aelog
import numpy as np
import pandas as pd

from .data_io import (read_chain_store, read_dataset, read_graph, read_truth, write_chain_store, write_dataset,
                      write_graph, write_json, write_manifest, write_table, write_truth)
from .decorators import schema_validate
from .domain import HyperParams, ModelSpec, Variant
from .err_msg import cli_msg, input_msg, runtime_msg
from .evaluation import (brier_score, credible_interval_covers, default_time_grid, integrated_brier_score,
                         kaplan_meier_curve, predict_survival, summarize, variant_metrics)
from .exceptions import (ConfigError, ContractError, ConvergenceError, DatasetError, DomainError, Error, FitError,
                         SamplerError, SpecError, StateError)
from .mcmc_engine import RunConfig, run_fit
from .schemas import (EvaluateConfigSchema, FitConfigSchema, PredictConfigSchema, SimulateConfigSchema,
                      SummarizeConfigSchema)
from .simulation import (SimConfig, build_covariance, build_mrf_graph_from_precision, pseudo_mrf_graph, simulate,
                         simulate_validation)
from .utils import analysis_yaml, verify_message

__all__ = ("main", "build_parser", "cli_simulate", "cli_fit", "cli_summarize", "cli_evaluate", "cli_predict",
           "EXIT_OK", "EXIT_INPUT", "EXIT_RUNTIME")

EXIT_OK, EXIT_INPUT, EXIT_RUNTIME = 0, 2, 3

# 异常到消息码的映射, 顺序即匹配顺序
_ERROR_CODES = ((DatasetError, 1), (DomainError, 2), (ContractError, 3), (SpecError, 4), (ConfigError, 5),
                (StateError, 6), (SamplerError, 100), (FitError, 101), (ConvergenceError, 102))


@schema_validate(SimulateConfigSchema)
def cli_simulate(config):
    """
    模拟数据集和真值, 可选同一真值下独立的验证集
    """
    started = time.time()
    out_dir = config["out_dir"]
    cfg = SimConfig.from_preset(config["preset"], n=config["n"], p=config["p"], L=config["L"],
                                kappa=config["kappa"], rho=config["rho"], rho_blocks=config["rho_blocks"],
                                noncured_method=config["noncured_method"], seed=config["seed"])
    dataset, truth = simulate(cfg)
    data_dir = os.path.join(out_dir, "data")
    write_dataset(dataset, data_dir)
    if cfg.mode == "gptcm":
        graph = build_mrf_graph_from_precision(build_covariance(cfg.p, cfg.L, cfg.rho, cfg.rho_blocks), cfg.L)
    else:
        graph = pseudo_mrf_graph(cfg.p, cfg.L)
    outputs = [data_dir, write_graph(graph, os.path.join(data_dir, "graph.csv")),
               write_truth(truth, os.path.join(out_dir, "truth.json")),
               write_json(cfg.to_dict(), os.path.join(out_dir, "simulation.json"))]
    if config["validation"]:
        valid_data, valid_truth = simulate_validation(cfg)
        valid_dir = os.path.join(out_dir, "validation")
        write_dataset(valid_data, valid_dir)
        outputs += [valid_dir, write_truth(valid_truth, os.path.join(out_dir, "validation_truth.json"))]
    write_manifest(out_dir, "simulate", config, outputs, seed=cfg.seed, started=started)
    return out_dir


def _model_spec(config, data_dir, dataset):
    variant = Variant.from_name(config["variant"])
    hyper = HyperParams.from_dict(config["hyper"])
    graph_beta = graph_zeta = None
    if variant.selection == "mrf":
        mrf = config["mrf"]
        path = mrf.get("graph") or os.path.join(data_dir, "graph.csv")
        graph_beta = read_graph(path, hyper.mrf_a, mrf.get("b", 0.1))
        if variant.has_measurement_error:
            graph_zeta = read_graph(mrf.get("graph_eta") or path, hyper.mrf_a, mrf.get("b", 0.1))
    return ModelSpec(variant, hyper, graph_beta, graph_zeta).check_dimensions(dataset)


@schema_validate(FitConfigSchema)
def cli_fit(config):
    """
    拟合一个变体, 写出链存储和清单; 有链失败时先写出部分结果再报错
    """
    started = time.time()
    dataset = read_dataset(config["data"])
    spec = _model_spec(config, config["data"], dataset)
    cfg = RunConfig(n_iterations=config["iterations"], n_warmup=config["warmup"], thin=config["thin"],
                    n_chains=config["chains"], seed=config["seed"], record=config["record"],
                    pointwise_loglik=config["pointwise_loglik"], prior_only=config["prior_only"],
                    debug_check=config["debug_check"], threads=config["threads"], log_every=config["log_every"])
    fit = run_fit(spec, dataset, cfg)
    outputs = write_chain_store(fit, config["out_dir"], storage=config["storage"])
    write_manifest(config["out_dir"], "fit", config, outputs, inputs=[config["data"]], seed=cfg.seed,
                   variant=spec.variant.value, started=started)
    fit.check()
    return fit


@schema_validate(SummarizeConfigSchema)
def cli_summarize(config):
    """
    mPIP、MPM、可信区间和系数表
    """
    started = time.time()
    fit = read_chain_store(config["fit_dir"])
    summary = summarize(fit, level=config["level"], threshold=config["threshold"])
    out_dir = config["out_dir"]
    os.makedirs(out_dir, exist_ok=True)
    outputs = [write_json(summary.to_dict(), os.path.join(out_dir, "summary.json")),
               write_table(summary.coefficient_table(), os.path.join(out_dir, "coefficients.csv"))]
    write_manifest(out_dir, "summarize", config, outputs, inputs=[config["fit_dir"]], variant=summary.variant,
                   started=started)
    return summary


def _labels(fits, fit_dirs):
    names = [fit.spec.variant.value for fit in fits]
    return [name if names.count(name) == 1 else "{}@{}".format(name, os.path.basename(os.path.normpath(path)))
            for name, path in zip(names, fit_dirs)]


@schema_validate(EvaluateConfigSchema)
def cli_evaluate(config):
    """
    对一个或多个拟合结果计算scaled RMSE、选择指标、临床效应覆盖, 以及验证集上的Brier score
    """
    started = time.time()
    truth = read_truth(config["truth"])
    validation = read_dataset(config["validation"]) if config["validation"] else None
    fits = [read_chain_store(path) for path in config["fit_dirs"]]
    labels = _labels(fits, config["fit_dirs"])
    rows, brier = [], None
    grid = None
    if validation is not None:
        grid = default_time_grid(validation.time, config["grid_quantile"], config["grid_size"])
        km = brier_score(kaplan_meier_curve(validation.time, validation.event, grid, validation.n), validation, grid)
        brier = pd.DataFrame({"time": grid, "unreliable": km.unreliable, "Kaplan-Meier": km.scores})
        rows.append({"model": "Kaplan-Meier", "ibs": integrated_brier_score(km)})
    for label, fit in zip(labels, fits):
        summary = summarize(fit)
        row = {"model": label}
        row.update(variant_metrics(summary, truth, config["mode"]))
        if truth.xi.shape == summary.mean["xi"].shape:
            covers, excludes = credible_interval_covers(summary, "xi", truth.xi)
            row["xi_covered"] = bool(np.all(covers))
            row["xi_excludes_zero"] = bool(np.all(excludes))
        if validation is not None:
            curve = predict_survival(fit, validation, grid, mode=config["mode"], drawwise=config["drawwise"],
                                     summary=summary)
            scores = brier_score(curve, validation, grid)
            brier[label] = scores.scores
            brier["unreliable"] = brier["unreliable"] | scores.unreliable
            row["ibs"] = integrated_brier_score(scores)
        rows.append(row)
    out_dir = config["out_dir"]
    os.makedirs(out_dir, exist_ok=True)
    metrics = pd.DataFrame(rows)
    outputs = [write_table(metrics, os.path.join(out_dir, "metrics.csv"))]
    if brier is not None:
        outputs.append(write_table(brier, os.path.join(out_dir, "brier.csv")))
    inputs = [config["truth"]] + config["fit_dirs"] + ([config["validation"]] if config["validation"] else [])
    write_manifest(out_dir, "evaluate", config, outputs, inputs=inputs, started=started)
    return metrics


@schema_validate(PredictConfigSchema)
def cli_predict(config):
    """
    新个体在时间网格上的生存曲线
    """
    started = time.time()
    fit = read_chain_store(config["fit_dir"])
    subjects = read_dataset(config["data"])
    if config["grid"]:
        grid = np.asarray(sorted(config["grid"]), dtype=float)
    else:
        grid = default_time_grid(subjects.time, config["grid_quantile"], config["grid_size"])
    curve = predict_survival(fit, subjects, grid, mode=config["mode"], drawwise=config["drawwise"])
    out_dir = config["out_dir"]
    os.makedirs(out_dir, exist_ok=True)
    outputs = [write_table(curve.to_frame(), os.path.join(out_dir, "survival_curves.csv"))]
    write_manifest(out_dir, "predict", config, outputs, inputs=[config["fit_dir"], config["data"]],
                   variant=fit.spec.variant.value, started=started)
    return curve


_COMMANDS = {"simulate": cli_simulate, "fit": cli_fit, "summarize": cli_summarize, "evaluate": cli_evaluate,
             "predict": cli_predict}


def _hyper_pair(text):
    key, sep, value = text.partition("=")
    if not sep:
        raise argparse.ArgumentTypeError("expected KEY=VALUE, got '{}'".format(text))
    try:
        return key.strip(), float(value)
    except ValueError:
        raise argparse.ArgumentTypeError("hyperparameter {} must be a number, got '{}'".format(key, value))


def build_parser():
    """
    所有子命令的参数解析器, 未给出的参数不出现在结果中, 以便区分于配置文件中的值
    """
    common = argparse.ArgumentParser(add_help=False, argument_default=argparse.SUPPRESS)
    common.add_argument("--config", help="JSON or YAML config file, flags override its keys")
    common.add_argument("--seed", type=int)
    common.add_argument("--threads", type=int)
    common.add_argument("--out-dir", dest="out_dir")
    common.add_argument("--verbose", action="store_true", help="log to the console as well")

    parser = argparse.ArgumentParser(prog="gptcm", description="Bayesian generalized promotion time cure models")
    commands = parser.add_subparsers(dest="command", required=True)

    sim = commands.add_parser("simulate", parents=[common], argument_default=argparse.SUPPRESS)
    sim.add_argument("--preset", choices=["low-dim", "high-dim", "cox-misspec"])
    sim.add_argument("--n", type=int)
    sim.add_argument("--p", type=int)
    sim.add_argument("--L", type=int)
    sim.add_argument("--kappa", type=float)
    sim.add_argument("--rho", type=float)
    sim.add_argument("--rho-blocks", dest="rho_blocks", type=float, nargs="+")
    sim.add_argument("--noncured-method", dest="noncured_method", choices=["bisect", "mh"])
    sim.add_argument("--no-validation", dest="validation", action="store_false")

    fit = commands.add_parser("fit", parents=[common], argument_default=argparse.SUPPRESS)
    fit.add_argument("--data")
    fit.add_argument("--variant")
    fit.add_argument("--iterations", type=int)
    fit.add_argument("--warmup", type=int)
    fit.add_argument("--thin", type=int)
    fit.add_argument("--chains", type=int)
    fit.add_argument("--record", nargs="+")
    fit.add_argument("--pointwise-loglik", dest="pointwise_loglik", action="store_true")
    fit.add_argument("--prior-only", dest="prior_only", action="store_true")
    fit.add_argument("--debug-check", dest="debug_check", action="store_true")
    fit.add_argument("--log-every", dest="log_every", type=int)
    fit.add_argument("--storage", choices=["csv", "npy"])
    fit.add_argument("--graph", dest="mrf.graph")
    fit.add_argument("--graph-eta", dest="mrf.graph_eta")
    fit.add_argument("--mrf-b", dest="mrf.b", type=float)
    fit.add_argument("--hyper", dest="hyper", type=_hyper_pair, action="append", metavar="KEY=VALUE")

    summ = commands.add_parser("summarize", parents=[common], argument_default=argparse.SUPPRESS)
    summ.add_argument("--fit-dir", dest="fit_dir")
    summ.add_argument("--level", type=float)
    summ.add_argument("--threshold", type=float)

    ev = commands.add_parser("evaluate", parents=[common], argument_default=argparse.SUPPRESS)
    ev.add_argument("--fit-dir", dest="fit_dirs", action="append")
    ev.add_argument("--truth")
    ev.add_argument("--validation")
    ev.add_argument("--mode", choices=["mpm", "noBVS"])
    ev.add_argument("--drawwise", action="store_true")
    ev.add_argument("--grid-size", dest="grid_size", type=int)
    ev.add_argument("--grid-quantile", dest="grid_quantile", type=float)

    pred = commands.add_parser("predict", parents=[common], argument_default=argparse.SUPPRESS)
    pred.add_argument("--fit-dir", dest="fit_dir")
    pred.add_argument("--data")
    pred.add_argument("--grid", type=float, nargs="+")
    pred.add_argument("--grid-size", dest="grid_size", type=int)
    pred.add_argument("--grid-quantile", dest="grid_quantile", type=float)
    pred.add_argument("--mode", choices=["mpm", "noBVS"])
    pred.add_argument("--drawwise", action="store_true")
    return parser


def merge_config(args):
    """
    配置文件 + 命令行覆盖, 点号分隔的参数名展开为嵌套字典
    """
    options = dict(vars(args))
    options.pop("command")
    options.pop("verbose", None)
    path = options.pop("config", None)
    config = analysis_yaml(path) if path else {}
    hyper = options.pop("hyper", None)
    if hyper:
        config.setdefault("hyper", {})
        if not isinstance(config["hyper"], dict):
            raise ConfigError("hyper must be a mapping")
        config["hyper"].update(dict(hyper))
    for key, value in options.items():
        if "." in key:
            outer, inner = key.split(".", 1)
            section = config.setdefault(outer, {})
            if not isinstance(section, dict):
                raise ConfigError("{} must be a mapping".format(outer))
            section[inner] = value
        else:
            config[key] = value
    return config


def _error_line(err, catalog):
    for cls, code in _ERROR_CODES:
        if isinstance(err, cls):
            break
    else:
        code = 103
    text = "{}: {}".format(catalog[code]["msg_en"].rstrip("."), getattr(err, "message", None) or str(err))
    text = " ".join(text.split()).replace('"', "'")
    return code, 'error code={} type={} message="{}"'.format(code, type(err).__name__, text)


def main(argv=None, message=None):
    """
    命令行入口
    Args:
        argv: 参数列表, 缺省为sys.argv[1:]
        message: 用户自定义的消息, 覆盖默认消息
    Returns:
        退出码
    """
    catalog = verify_message({**input_msg, **runtime_msg, **cli_msg}, message or {})
    parser = build_parser()
    args = parser.parse_args(argv)
    verbose = getattr(args, "verbose", False)
    try:
        config = merge_config(args)
        out_dir = config.get("out_dir")
        if out_dir:
            os.makedirs(out_dir, exist_ok=True)
            aelog.init_app(aelog_access_file=os.path.join(out_dir, "gptcm.log"), aelog_console=verbose)
        else:
            aelog.init_app(aelog_console=verbose)
        _COMMANDS[args.command](config)
    except Error as err:
        code, line = _error_line(err, catalog)
        aelog.exception(line)
        print(line, file=sys.stderr)
        return EXIT_INPUT if code < 100 else EXIT_RUNTIME
    except Exception as err:
        code, line = _error_line(err, catalog)
        aelog.exception(line)
        print(line, file=sys.stderr)
        return EXIT_RUNTIME
    aelog.info("{} {}".format(args.command, catalog[300]["msg_en"]))
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
