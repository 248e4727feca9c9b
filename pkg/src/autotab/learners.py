"""Per-fold training of the two model classes, feature views, and inference.

A feature view turns a typed dataset into a float matrix for one learner
family and stores everything needed to repeat the mapping on new data:

* GBM view: numeric columns pass through with NaN for missing; category
  columns are target- or frequency-encoded per their encoder spec (the
  training matrix uses leak-free out-of-fold target statistics, inference
  uses the stored full-train maps).
* Linear view: numeric columns are median-imputed with a missing-indicator
  column and standardized; categories are one-hot up to cardinality 100,
  target-encoded above it.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .budget import TimeBudget, unlimited
from .data import Dataset, Task
from .encoders import (EncoderSpec, FrequencyMap, TargetMeanMap, fit_target_map,
                       freq_encode, oof_target_encode)
from .errors import BudgetError, DataError
from .gbm import GBMParams, fit_booster
from .linear import LinearParams, fit_lambda_path, solve, unpack
from .metrics import evaluate
from .stopping import early_stop
from .validation import FoldAssignment, oof_assemble, kfold_vector

__all__ = ["TrainedModel", "GBMView", "LinearView", "fit_gbm", "fit_linear",
           "early_stop", "predict", "LinearParams", "GBMParams"]

ONE_HOT_MAX_CARDINALITY = 100
GBM_PATIENCE = 100
ENCODING_FOLDS = 5


def _encoding_fold_vector(folds: FoldAssignment) -> tuple[np.ndarray, np.ndarray]:
    """Fold vector usable for OOF target encoding, plus a mask of rows that
    must be encoded with full-train statistics instead (holdout rows).

    Holdout: internal kfold over the train part, map encoding for the rest.
    Time series: internal kfold over all rows (the scheme's expanding windows
    cannot partition rows).
    """
    fold = folds.fold_of_row
    n = fold.shape[0]
    if folds.partitions_rows() and folds.k >= 2:
        return fold.astype(np.int64), np.zeros(n, dtype=bool)
    seed = folds.scheme.seed
    if folds.scheme.kind == "holdout":
        train = fold == -1
        inner = np.full(n, -1, dtype=np.int64)
        inner[train] = kfold_vector(int(train.sum()), ENCODING_FOLDS, seed)
        return inner, ~train
    return kfold_vector(n, ENCODING_FOLDS, seed).astype(np.int64), np.zeros(n, dtype=bool)


def _oof_encoded(values: np.ndarray, y: np.ndarray, folds: FoldAssignment,
                 alpha: float, n_classes: int) -> np.ndarray:
    enc_fold, map_rows = _encoding_fold_vector(folds)
    if not map_rows.any():
        return oof_target_encode(values, y, enc_fold, alpha=alpha, n_classes=n_classes)
    tr = ~map_rows
    mapping = fit_target_map(values[tr], y[tr], alpha=alpha, n_classes=n_classes)
    shape = (values.shape[0], n_classes) if n_classes else (values.shape[0],)
    out = np.empty(shape)
    out[tr] = oof_target_encode(values[tr], y[tr], enc_fold[tr], alpha=alpha,
                                n_classes=n_classes)
    out[map_rows] = mapping.apply(values[map_rows])
    return out


def _te_width(task: Task) -> int:
    return task.n_classes if task.kind == "multiclass" else 0


@dataclass
class GBMView:
    feature_names: list[str] = field(default_factory=list)
    groups: dict[str, list[int]] = field(default_factory=dict)
    numeric: list[str] = field(default_factory=list)
    cat_kinds: dict[str, str] = field(default_factory=dict)
    freq_maps: dict[str, FrequencyMap] = field(default_factory=dict)
    target_maps: dict[str, TargetMeanMap] = field(default_factory=dict)
    alpha: float = 2.0
    n_te_cols: int = 0

    def fit(self, dataset: Dataset, enc_specs: dict[str, EncoderSpec] | None = None,
            selected: list[str] | None = None) -> "GBMView":
        enc_specs = enc_specs or {}
        self.n_te_cols = _te_width(dataset.task)
        names = selected if selected is not None else dataset.feature_names()
        y = dataset.target.astype(np.float64)
        col_idx = 0
        for name in names:
            col = dataset.columns[name]
            if col.kind == "numeric":
                self.numeric.append(name)
                self.feature_names.append(name)
                self.groups[name] = [col_idx]
                col_idx += 1
                continue
            spec = enc_specs.get(name, EncoderSpec("oof_target", alpha=self.alpha))
            self.cat_kinds[name] = spec.kind
            if spec.kind == "frequency":
                self.freq_maps[name], _ = freq_encode(col.values)
                self.feature_names.append(f"{name}__freq")
                self.groups[name] = [col_idx]
                col_idx += 1
            else:
                self.target_maps[name] = fit_target_map(
                    col.values, y, alpha=spec.alpha, n_classes=self.n_te_cols)
                width = max(1, self.n_te_cols)
                if self.n_te_cols:
                    self.feature_names.extend(
                        f"{name}__te{c}" for c in range(self.n_te_cols))
                else:
                    self.feature_names.append(f"{name}__te")
                self.groups[name] = list(range(col_idx, col_idx + width))
                col_idx += width
        return self

    def train_matrix(self, dataset: Dataset, folds: FoldAssignment) -> np.ndarray:
        n = dataset.n_rows
        out = np.empty((n, len(self.feature_names)))
        y = dataset.target.astype(np.float64)
        for name, idx in self.groups.items():
            col = dataset.columns[name]
            if name in self.numeric:
                out[:, idx[0]] = col.values
            elif self.cat_kinds[name] == "frequency":
                out[:, idx[0]] = self.freq_maps[name].apply(col.values)
            else:
                enc = _oof_encoded(col.values, y, folds, self.alpha, self.n_te_cols)
                out[:, idx] = enc if enc.ndim == 2 else enc[:, None]
        return out

    def transform(self, dataset: Dataset) -> np.ndarray:
        n = dataset.n_rows
        out = np.empty((n, len(self.feature_names)))
        for name, idx in self.groups.items():
            col = dataset.columns[name]
            if name in self.numeric:
                out[:, idx[0]] = col.values
            elif self.cat_kinds[name] == "frequency":
                out[:, idx[0]] = self.freq_maps[name].apply(col.values)
            else:
                enc = self.target_maps[name].apply(col.values)
                out[:, idx] = enc if enc.ndim == 2 else enc[:, None]
        return out


@dataclass
class LinearView:
    feature_names: list[str] = field(default_factory=list)
    numeric: list[str] = field(default_factory=list)
    medians: dict[str, float] = field(default_factory=dict)
    with_indicator: list[str] = field(default_factory=list)
    means: np.ndarray | None = None
    stds: np.ndarray | None = None
    onehot: dict[str, int] = field(default_factory=dict)  # name -> cardinality
    target_maps: dict[str, TargetMeanMap] = field(default_factory=dict)
    alpha: float = 2.0
    n_te_cols: int = 0
    source_order: list[str] = field(default_factory=list)
    _std_cols: list[int] = field(default_factory=list)

    def fit(self, dataset: Dataset, selected: list[str] | None = None) -> "LinearView":
        self.n_te_cols = _te_width(dataset.task)
        names = selected if selected is not None else dataset.feature_names()
        self.source_order = list(names)
        y = dataset.target.astype(np.float64)
        col_idx = 0
        for name in names:
            col = dataset.columns[name]
            if col.kind == "numeric":
                finite = col.values[~np.isnan(col.values)]
                self.medians[name] = float(np.median(finite)) if finite.size else 0.0
                self.numeric.append(name)
                self.feature_names.append(name)
                self._std_cols.append(col_idx)
                col_idx += 1
                if np.isnan(col.values).any():
                    self.with_indicator.append(name)
                    self.feature_names.append(f"{name}__isna")
                    col_idx += 1
                continue
            card = int(col.dictionary.shape[0])
            if card <= ONE_HOT_MAX_CARDINALITY:
                self.onehot[name] = card
                self.feature_names.extend(f"{name}__oh{i}" for i in range(card))
                col_idx += card
            else:
                self.target_maps[name] = fit_target_map(
                    col.values, y, alpha=self.alpha, n_classes=self.n_te_cols)
                width = max(1, self.n_te_cols)
                suffixes = ([f"__te{c}" for c in range(self.n_te_cols)]
                            if self.n_te_cols else ["__te"])
                self.feature_names.extend(name + s for s in suffixes)
                self._std_cols.extend(range(col_idx, col_idx + width))
                col_idx += width
        # standardization statistics come from the inference-style encoding
        X = self._raw_matrix(dataset, use_maps=True)
        cols = np.asarray(self._std_cols, dtype=np.int64)
        self.means = X[:, cols].mean(axis=0) if cols.size else np.empty(0)
        stds = X[:, cols].std(axis=0) if cols.size else np.empty(0)
        self.stds = np.where(stds < 1e-12, 1.0, stds)
        return self

    def _raw_matrix(self, dataset: Dataset, use_maps: bool,
                    folds: FoldAssignment | None = None) -> np.ndarray:
        n = dataset.n_rows
        out = np.zeros((n, len(self.feature_names)))
        y = dataset.target.astype(np.float64) if not use_maps else None
        col_idx = 0
        for name in self.source_order:
            col = dataset.columns[name]
            if name in self.medians:
                vals = col.values
                mask = np.isnan(vals)
                out[:, col_idx] = np.where(mask, self.medians[name], vals)
                col_idx += 1
                if name in self.with_indicator:
                    out[:, col_idx] = mask.astype(np.float64)
                    col_idx += 1
            elif name in self.onehot:
                card = self.onehot[name]
                codes = col.values
                ok = (codes >= 0) & (codes < card)
                rows = np.flatnonzero(ok)
                out[rows, col_idx + codes[rows]] = 1.0
                col_idx += card
            else:
                width = max(1, self.n_te_cols)
                if use_maps:
                    enc = self.target_maps[name].apply(col.values)
                else:
                    enc = _oof_encoded(col.values, y, folds, self.alpha, self.n_te_cols)
                out[:, col_idx: col_idx + width] = enc if enc.ndim == 2 else enc[:, None]
                col_idx += width
        return out

    def _standardize(self, X: np.ndarray) -> np.ndarray:
        cols = np.asarray(self._std_cols, dtype=np.int64)
        if cols.size:
            X[:, cols] = (X[:, cols] - self.means) / self.stds
        return X

    def train_matrix(self, dataset: Dataset, folds: FoldAssignment) -> np.ndarray:
        return self._standardize(self._raw_matrix(dataset, use_maps=False, folds=folds))

    def transform(self, dataset: Dataset) -> np.ndarray:
        return self._standardize(self._raw_matrix(dataset, use_maps=True))


@dataclass
class TrainedModel:
    """One logical learner: per-fold estimators plus its OOF predictions."""

    learner_tag: str
    task: Task
    view: GBMView | LinearView
    estimators: list
    oof: np.ndarray
    oof_mask: np.ndarray
    metric_oof: float
    training_seconds: float
    feature_names: list[str]
    truncated: bool = False
    extra: dict = field(default_factory=dict)

    def predict_matrix(self, X: np.ndarray) -> np.ndarray:
        preds = [est.predict(X) for est in self.estimators]
        return np.mean(preds, axis=0)

    def predict(self, dataset: Dataset) -> np.ndarray:
        return self.predict_matrix(self.view.transform(dataset))


def predict(model: TrainedModel, dataset: Dataset) -> np.ndarray:
    """Fold-averaged prediction in probability space for classifiers."""
    return model.predict(dataset)


def _fold_budget(budget: TimeBudget, folds_left: int) -> TimeBudget:
    return TimeBudget(budget.remaining() / max(1, folds_left))


def fit_gbm(dataset: Dataset, folds: FoldAssignment, params: GBMParams,
            budget: TimeBudget | None = None,
            enc_specs: dict[str, EncoderSpec] | None = None,
            selected: list[str] | None = None, seed: int = 0,
            patience: int = GBM_PATIENCE, tag: str | None = None,
            track_train_loss: bool = False) -> TrainedModel:
    """Train one GBM per fold with early stopping on the fold's validation
    rows; the budget is split evenly across the remaining folds."""
    budget = budget or unlimited()
    start = time.monotonic()
    task = dataset.task
    view = GBMView(alpha=2.0).fit(dataset, enc_specs, selected)
    if not view.feature_names:
        raise DataError("no usable features for the GBM")
    X = view.train_matrix(dataset, folds)
    y = dataset.target
    metric = task.metric

    estimators = []
    fold_preds = []
    truncated = False
    histories = []
    train_losses = []
    for f, tr, va in folds.iter_splits():
        sub = _fold_budget(budget, folds.k - f)
        res = fit_booster(X[tr], y[tr], params, task.kind, task.n_classes,
                          X_val=X[va], y_val=y[va], metric=metric, budget=sub,
                          seed=seed + f, patience=patience,
                          track_train_loss=track_train_loss)
        estimators.append(res.estimator)
        fold_preds.append(res.estimator.predict(X[va]))
        truncated = truncated or res.truncated
        histories.append(res.eval_history)
        if track_train_loss:
            train_losses.append(res.train_loss_history)

    oof = oof_assemble(fold_preds, folds)
    mask = folds.oof_mask()
    metric_oof = evaluate(metric, y[mask], oof[mask])
    model = TrainedModel(
        tag or f"gbm_{params.flavor}", task, view, estimators, oof, mask,
        metric_oof, time.monotonic() - start, view.feature_names,
        truncated=truncated,
        extra={"eval_histories": histories, "params": params,
               "train_loss_histories": train_losses})
    return model


def fit_linear(dataset: Dataset, folds: FoldAssignment,
               params: LinearParams | None = None,
               budget: TimeBudget | None = None,
               selected: list[str] | None = None,
               tag: str = "linear") -> TrainedModel:
    """Train the L2 linear model per fold along the warm-started path.

    The budget must admit the first fold's path; later folds degrade to a
    single warm-started solve at the best strength found so far.
    """
    budget = budget or unlimited()
    params = params or LinearParams()
    start = time.monotonic()
    task = dataset.task
    view = LinearView(alpha=2.0).fit(dataset, selected)
    if not view.feature_names:
        raise DataError("no usable features for the linear model")
    X = view.train_matrix(dataset, folds)
    y = dataset.target
    y_fit = y.astype(np.float64) if task.kind != "multiclass" else y
    metric = task.metric

    estimators = []
    fold_preds = []
    histories = []
    best_lam = None
    truncated = False
    for f, tr, va in folds.iter_splits():
        if f == 0 and budget.expired():
            raise BudgetError("time budget exhausted before the first linear fold")
        if f > 0 and budget.expired() and best_lam is not None:
            x = solve(X[tr], y_fit[tr], best_lam, task.kind, task.n_classes)
            est = unpack(x, X.shape[1], task.kind, task.n_classes, best_lam)
            score = evaluate(metric, y[va], est.predict(X[va]))
            history = [score]
            truncated = True
        else:
            est, score, history = fit_lambda_path(
                X[tr], y_fit[tr], X[va], y[va], task.kind, task.n_classes,
                metric, params, budget=budget)
        best_lam = est.lam
        estimators.append(est)
        fold_preds.append(est.predict(X[va]))
        histories.append(history)

    oof = oof_assemble(fold_preds, folds)
    mask = folds.oof_mask()
    metric_oof = evaluate(metric, y[mask], oof[mask])
    return TrainedModel(
        tag, task, view, estimators, oof, mask, metric_oof,
        time.monotonic() - start, view.feature_names, truncated=truncated,
        extra={"lambda_histories": histories, "params": params})
