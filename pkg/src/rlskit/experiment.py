"""JSON-configured experiments: load data, run a pipeline, write a report.

A config looks like::

    {
      "name": "optdigits-gaussian",
      "dataset": {"path": "../data/optdigits_train.csv", "format": "csv",
                  "label_col": -1, "test_path": "../data/optdigits_test.csv"},
      "preprocess": {"standardize": true, "bias": false},
      "pipeline": ["split:holdout", "kernel:gaussian", "paramsel:hodual",
                   "rls:dual", "pred:dual", "perf:accuracy"],
      "options": {"split": {"fraction": 0.2, "seed": 0},
                  "kernel": {"sigma_quantile": 0.5},
                  "paramsel": {"n_lambdas": 400}},
      "output": "optdigits-gaussian.report.json"
    }

Relative paths resolve against the config file's directory.  Without
``test_path`` a stratified ``test_fraction`` (default 0.3) of the data is
held out as the test set.
"""
import json
import os
import time
from contextlib import nullcontext
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from . import datasets, modelsel
from .errors import ConfigError, RlsError
from .pipeline import (CATEGORIES, INJECT, REGISTRY, OptionsStore, Pipeline,
                       TaskDescriptor, run_pipeline, validate_pipeline)

REPORT_VERSION = 1


@dataclass
class DatasetConfig:
    path: Path
    format: str = "csv"
    label_col: int = -1
    test_path: Optional[Path] = None
    test_fraction: float = 0.3
    n_features: Optional[int] = None


@dataclass
class ExperimentConfig:
    name: str
    dataset: DatasetConfig
    pipeline: Pipeline
    options: dict = field(default_factory=dict)
    standardize: bool = True
    bias: bool = False
    seed: Optional[int] = None
    output: Optional[Path] = None


@dataclass
class RunReport:
    name: str
    dataset: dict
    hyperparameters: dict
    performance: dict
    stage_seconds: dict
    config: dict

    @property
    def total_seconds(self):
        return float(sum(self.stage_seconds.values()))

    def to_dict(self):
        return {
            "report_version": REPORT_VERSION,
            "name": self.name,
            "dataset": self.dataset,
            "hyperparameters": self.hyperparameters,
            "performance": self.performance,
            "timing": {"stages": dict(self.stage_seconds), "total": self.total_seconds},
            "config": self.config,
        }

    def without_timing(self):
        d = self.to_dict()
        d.pop("timing")
        return d


def _flatten(tree, prefix=""):
    out = {}
    for k, v in tree.items():
        key = f"{prefix}.{k}" if prefix else str(k)
        if isinstance(v, dict) and v:
            out.update(_flatten(v, key))
        else:
            out[key] = v
    return out


def _parse_task(spec):
    if isinstance(spec, str):
        inject = spec.endswith("!")
        if spec.rstrip("!").count(":") != 1:
            raise ConfigError(f"pipeline entry {spec!r} is not 'category:impl'")
        category, impl = spec.rstrip("!").split(":")
        return TaskDescriptor(category, impl, INJECT if inject else True)
    if isinstance(spec, dict):
        try:
            return TaskDescriptor(spec["category"], spec["impl"], spec.get("enabled", True))
        except KeyError as exc:
            raise ConfigError(f"pipeline entry {spec!r} lacks {exc}") from None
    raise ConfigError(f"bad pipeline entry {spec!r}")


def parse_config(doc, base_dir=".", registry=None):
    """Build and validate an ExperimentConfig from a parsed JSON document.

    Validation against the task registry happens here, before any data is
    read.
    """
    base = Path(base_dir)
    if not isinstance(doc, dict):
        raise ConfigError("config must be a JSON object")
    try:
        ds = doc["dataset"]
        steps = doc["pipeline"]
    except KeyError as exc:
        raise ConfigError(f"config lacks required key {exc}") from None
    if "path" not in ds:
        raise ConfigError("dataset.path is required")
    try:
        tasks = [_parse_task(s) for s in steps]
    except RlsError as exc:
        raise ConfigError(str(exc)) from exc
    pipeline = Pipeline(doc.get("name", "experiment"), tasks)
    options = doc.get("options", {})
    if not isinstance(options, dict):
        raise ConfigError("options must be an object")
    injected = [c for c in CATEGORIES if f"results.{c}" in _flatten_keys(options)]
    try:
        validate_pipeline(pipeline, registry or REGISTRY, injected)
    except RlsError as exc:
        raise ConfigError(str(exc)) from exc
    fmt = ds.get("format", "csv")
    if fmt not in ("csv", "sparse"):
        raise ConfigError(f"unknown dataset format {fmt!r}")
    pre = doc.get("preprocess", {})
    out = doc.get("output")
    return ExperimentConfig(
        name=doc.get("name", "experiment"),
        dataset=DatasetConfig(
            path=base / ds["path"], format=fmt, label_col=int(ds.get("label_col", -1)),
            test_path=base / ds["test_path"] if ds.get("test_path") else None,
            test_fraction=float(ds.get("test_fraction", 0.3)),
            n_features=ds.get("n_features")),
        pipeline=pipeline,
        options=options,
        standardize=bool(pre.get("standardize", True)),
        bias=bool(pre.get("bias", False)),
        seed=doc.get("seed"),
        output=base / out if out else None,
    )


def _flatten_keys(options):
    keys = set()
    for k in _flatten(options):
        parts = k.split(".")
        keys.update(".".join(parts[:i]) for i in range(1, len(parts) + 1))
    return keys


def load_config(path, registry=None):
    path = Path(path)
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"{path}: no such config file") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from exc
    return parse_config(doc, path.parent, registry), doc


def _load_data(cfg):
    ds = cfg.dataset
    train = datasets.load_dataset(ds.path, ds.format, ds.label_col, ds.n_features)
    if ds.test_path is not None:
        n_features = train.x.shape[1] if ds.format == "sparse" else None
        test = datasets.load_dataset(ds.test_path, ds.format, ds.label_col,
                                     n_features, classes=train.classes)
        return train.x, train.y, test.x, test.y, train.classes
    split = modelsel.holdout_split(len(train.y), ds.test_fraction,
                                   seed=0 if cfg.seed is None else cfg.seed,
                                   labels=train.y)
    tr, te = split.train_idx, split.val_idx
    return train.x[tr], train.y[tr], train.x[te], train.y[te], train.classes


def standardize(x_train, x_test):
    """Zero mean, unit variance per column using training statistics only."""
    mean = x_train.mean(axis=0)
    std = x_train.std(axis=0)
    std[std == 0] = 1.0
    return (x_train - mean) / std, (x_test - mean) / std


def _with_bias(x):
    return np.hstack([x, np.ones((x.shape[0], 1))])


def _threadpool(threads):
    if not threads:
        return nullcontext()
    from threadpoolctl import threadpool_limits
    return threadpool_limits(limits=int(threads))


def run_experiment(config, seed=None, output=None, threads=None, registry=None):
    """Run one experiment; ``config`` is a path or an ExperimentConfig.

    ``seed`` overrides every seed in the options.  The report is written as
    JSON when an output path is known; a failed run leaves no report file.
    """
    doc = None
    if not isinstance(config, ExperimentConfig):
        config, doc = load_config(config, registry)
    if seed is not None:
        config.seed = seed
    out_path = Path(output) if output else config.output
    tmp_path = out_path.with_name(out_path.name + ".partial") if out_path else None
    try:
        with _threadpool(threads):
            report = _run(config, doc, registry)
        if out_path:
            out_path.parent.mkdir(parents=True, exist_ok=True)
            with open(tmp_path, "w") as fh:
                json.dump(report.to_dict(), fh, indent=2)
            os.replace(tmp_path, out_path)
    except BaseException:
        if tmp_path is not None and tmp_path.exists():
            tmp_path.unlink()
        raise
    return report


def _run(cfg, doc, registry):
    stages = {}
    start = time.perf_counter()
    x, y, x_test, y_test, classes = _load_data(cfg)
    stages["load"] = time.perf_counter() - start

    start = time.perf_counter()
    if cfg.standardize:
        x, x_test = standardize(x, x_test)
    if cfg.bias:
        x, x_test = _with_bias(x), _with_bias(x_test)
    values = _flatten(cfg.options)
    if cfg.seed is not None:
        values["split.seed"] = int(cfg.seed)
        values["kernel.seed"] = int(cfg.seed)
    values.update({"data.x": x, "data.y": y, "data.x_test": x_test,
                   "data.y_test": y_test, "data.n_classes": len(classes)})
    opt = OptionsStore(values)
    stages["preprocess"] = time.perf_counter() - start

    task_times = {}
    run_pipeline(cfg.pipeline, opt, registry, timings=task_times)
    stages.update(task_times)

    hyper = {}
    if "results.paramsel.best_lambda" in opt:
        hyper["lambda"] = float(opt["results.paramsel.best_lambda"])
        scores = np.asarray(opt.get("results.paramsel.val_scores", []), dtype=float)
        if scores.size and not np.all(np.isnan(scores)):
            hyper["validation_accuracy"] = float(np.nanmax(scores))
        if "results.paramsel.lambdas" in opt:
            hyper["n_lambdas"] = int(np.size(opt["results.paramsel.lambdas"]))
    if "results.kernel.kind" in opt:
        hyper["kernel"] = opt["results.kernel.kind"]
        if "results.kernel.sigma" in opt:
            hyper["sigma"] = float(opt["results.kernel.sigma"])
        if "results.kernel.omega" in opt:
            hyper["n_features"] = int(opt["results.kernel.omega"].shape[1])
    perf = {}
    if "results.perf" in opt:
        for k, v in opt["results.perf"].items():
            if k == "predicted":
                continue
            perf[k] = v.tolist() if isinstance(v, np.ndarray) else v
        if "per_class_accuracy" in perf:
            perf["per_class_accuracy"] = [None if v != v else v
                                          for v in perf["per_class_accuracy"]]
    return RunReport(
        name=cfg.name,
        dataset={"n": int(x.shape[0]), "d": int(x.shape[1]) - int(cfg.bias),
                 "T": len(classes), "n_test": int(x_test.shape[0]),
                 "classes": classes.tolist()},
        hyperparameters=hyper,
        performance=perf,
        stage_seconds=stages,
        config=doc if doc is not None else {"name": cfg.name},
    )
