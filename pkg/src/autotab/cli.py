"""Batch command-line front end.

Exit codes are the machine contract: 0 success, 2 data error, 3 config
error. Messages on stderr are free-form. The LAMA_THREADS environment
variable caps the numeric worker pools and must be applied before numpy
loads, so heavy imports happen inside main().
"""

from __future__ import annotations

import argparse
import json
import os
import sys

EXIT_OK = 0
EXIT_DATA = 2
EXIT_CONFIG = 3

_CONFIG_KEYS = {
    "train_path", "target", "out_dir", "model_path",
    "task", "metric", "budget_seconds", "seed",
    "selection_strategy", "stack_policy", "tuning_enabled",
    "use_linear", "use_gbm_leaf", "use_gbm_sym",
    "typing_alpha", "typing_q", "forward_block_size", "cv",
}
_CV_KEYS = {"kind", "k", "seed", "holdout_fraction", "group_column",
            "time_column", "fold_of_row"}
_TASK_KINDS = ("binary", "multiclass", "regression", "auto")


def _apply_thread_cap() -> None:
    cap = os.environ.get("LAMA_THREADS")
    if not cap:
        return
    for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS",
                "NUMEXPR_NUM_THREADS"):
        os.environ.setdefault(var, cap)


def _load_config(path: str | None) -> dict:
    from .errors import ConfigError

    if path is None:
        return {}
    try:
        with open(path, "r", encoding="utf-8") as fh:
            cfg = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"malformed config JSON: {exc}") from exc
    if not isinstance(cfg, dict):
        raise ConfigError("config must be a JSON object")
    unknown = set(cfg) - _CONFIG_KEYS
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    cv = cfg.get("cv")
    if cv is not None:
        if not isinstance(cv, dict):
            raise ConfigError("cv must be a JSON object")
        bad = set(cv) - _CV_KEYS
        if bad:
            raise ConfigError(f"unknown cv keys: {sorted(bad)}")
    task = cfg.get("task")
    if task is not None and task not in _TASK_KINDS:
        raise ConfigError(f"task must be one of {_TASK_KINDS}")
    return cfg


def _infer_task_kind(cells) -> str:
    values = {c.strip() for c in cells if c is not None}
    if len(values) == 2:
        return "binary"
    def is_float(s: str) -> bool:
        try:
            float(s)
            return True
        except ValueError:
            return False
    if not all(is_float(v) for v in values):
        return "multiclass"
    floats = [float(v) for v in values]
    if all(f == int(f) for f in floats) and len(values) <= 20:
        return "multiclass"
    return "regression"


def _build_preset_config(cfg: dict, budget: float | None, seed_flag: int | None):
    from .errors import ConfigError
    from .pipeline import PresetConfig
    from .validation import CVScheme

    cv = None
    if cfg.get("cv"):
        c = cfg["cv"]
        fold = c.get("fold_of_row")
        cv = CVScheme(kind=c.get("kind", "kfold"), k=int(c.get("k", 5)),
                      holdout_fraction=float(c.get("holdout_fraction", 0.25)),
                      group_column=c.get("group_column"),
                      time_column=c.get("time_column"),
                      seed=int(c.get("seed", 0)),
                      fold_of_row=tuple(fold) if fold is not None else None)
    try:
        return PresetConfig(
            cv=cv,
            selection_strategy=cfg.get("selection_strategy", "cutoff"),
            stack_policy=cfg.get("stack_policy", "auto"),
            tuning_enabled=bool(cfg.get("tuning_enabled", True)),
            budget_seconds=float(budget if budget is not None
                                 else cfg.get("budget_seconds", 600.0)),
            seed=int(seed_flag if seed_flag is not None else cfg.get("seed", 42)),
            use_linear=bool(cfg.get("use_linear", True)),
            use_gbm_leaf=bool(cfg.get("use_gbm_leaf", True)),
            use_gbm_sym=bool(cfg.get("use_gbm_sym", True)),
            metric=cfg.get("metric"),
            typing_alpha=float(cfg.get("typing_alpha", 2.0)),
            typing_q=int(cfg.get("typing_q", 10)),
            forward_block_size=cfg.get("forward_block_size"))
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad config value: {exc}") from exc


def _sanitize(obj):
    import numpy as np
    if isinstance(obj, dict):
        return {str(k): _sanitize(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_sanitize(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        f = float(obj)
        return f if f == f and abs(f) != float("inf") else None
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.ndarray):
        return [_sanitize(v) for v in obj.tolist()]
    return obj


def cmd_fit(args) -> int:
    from .artifact import save_model
    from .data import build_dataset, read_csv
    from .pipeline import fit_preset

    cfg = _load_config(args.config)
    target = args.target or cfg.get("target")
    train_path = args.train or cfg.get("train_path")
    if not target or not train_path:
        print("fit requires --train and --target (or config entries)", file=sys.stderr)
        return EXIT_CONFIG
    out_dir = args.out or cfg.get("out_dir") or "."
    os.makedirs(out_dir, exist_ok=True)
    config = _build_preset_config(cfg, args.budget, args.seed)

    raw = read_csv(train_path, target_name=target)
    task_kind = cfg.get("task", "auto")
    if task_kind == "auto":
        task_kind = _infer_task_kind(raw.column(target))
    metric_spec = None
    dataset = build_dataset(raw, target, task_kind, metric=metric_spec)
    model = fit_preset(dataset, config)

    model_path = os.path.join(out_dir, "model.lama")
    save_model(model, model_path)
    with open(os.path.join(out_dir, "report.json"), "w", encoding="utf-8") as fh:
        json.dump(_sanitize(model.report), fh, indent=2)
    print(f"model written to {model_path}")
    return EXIT_OK


def cmd_predict(args) -> int:
    from .artifact import load_model
    from .data import read_csv
    from .pipeline import predict_automl

    artifact = load_model(args.model)
    raw = read_csv(args.data)
    preds = predict_automl(artifact, raw)
    task = artifact.task
    with open(args.out, "w", encoding="utf-8", newline="") as fh:
        if preds.ndim == 2:
            labels = task.labels or [str(i) for i in range(preds.shape[1])]
            fh.write("index," + ",".join(f"p_{c}" for c in labels) + "\n")
            for i, row in enumerate(preds):
                fh.write(f"{i}," + ",".join(repr(float(v)) for v in row) + "\n")
        else:
            fh.write("index,prediction\n")
            for i, v in enumerate(preds):
                fh.write(f"{i},{float(v)!r}\n")
    print(f"predictions written to {args.out}")
    return EXIT_OK


def cmd_infer_types(args) -> int:
    from .autotype import infer_feature_kind
    from .data import build_dataset, read_csv
    from .pipeline import _typing_folds, default_cv_scheme
    from .validation import make_folds

    cfg = _load_config(args.config)
    raw = read_csv(args.train, target_name=args.target)
    task_kind = cfg.get("task", "auto")
    if task_kind == "auto":
        task_kind = _infer_task_kind(raw.column(args.target))
    dataset = build_dataset(raw, args.target, task_kind)
    scheme = default_cv_scheme(dataset.task, int(cfg.get("seed", 42)))
    folds = make_folds(scheme, dataset)
    folds = _typing_folds(folds, dataset.n_rows, scheme.seed)
    report = infer_feature_kind(dataset, folds,
                                alpha=float(cfg.get("typing_alpha", 2.0)),
                                q=int(cfg.get("typing_q", 10)))
    json.dump(_sanitize(report.to_json()), sys.stdout, indent=2)
    print()
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="autotab",
        description="Train and apply budgeted tabular AutoML models")
    sub = parser.add_subparsers(dest="command", required=True)

    p_fit = sub.add_parser("fit", help="train a model from a CSV")
    p_fit.add_argument("--train", help="training CSV path")
    p_fit.add_argument("--target", help="target column name")
    p_fit.add_argument("--config", help="JSON run config")
    p_fit.add_argument("--budget", type=float, help="time budget in seconds")
    p_fit.add_argument("--seed", type=int, help="random seed")
    p_fit.add_argument("--out", help="output directory")
    p_fit.set_defaults(func=cmd_fit)

    p_pred = sub.add_parser("predict", help="apply a saved model")
    p_pred.add_argument("--model", required=True, help="model artifact path")
    p_pred.add_argument("--data", required=True, help="input CSV path")
    p_pred.add_argument("--out", required=True, help="prediction CSV path")
    p_pred.set_defaults(func=cmd_predict)

    p_types = sub.add_parser("infer-types", help="print the typing report")
    p_types.add_argument("--train", required=True)
    p_types.add_argument("--target", required=True)
    p_types.add_argument("--config")
    p_types.set_defaults(func=cmd_infer_types)
    return parser


def main(argv=None) -> int:
    _apply_thread_cap()
    parser = build_parser()
    args = parser.parse_args(argv)
    from .errors import BudgetError, ConfigError, DataError

    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (DataError, BudgetError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
