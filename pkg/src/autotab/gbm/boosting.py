"""Newton boosting over histogram trees, with early stopping and budgets."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..budget import TimeBudget, unlimited
from ..errors import ConfigError, DataError
from ..metrics import MetricSpec, evaluate
from ..stopping import best_iteration
from .binning import BinMapper
from .losses import make_loss
from .trees import grow_leafwise, grow_oblivious

FLAVORS = ("leaf_wise", "symmetric_depth_wise")


@dataclass(frozen=True)
class GBMParams:
    learning_rate: float = 0.1
    max_leaves: int = 32
    max_depth: int = 5
    subsample: float = 1.0
    colsample: float = 1.0
    min_data_in_leaf: int = 2
    l2_leaf_reg: float = 1.0
    n_estimators_cap: int = 2000
    flavor: str = "leaf_wise"

    def __post_init__(self) -> None:
        if not 0.0 < self.learning_rate <= 1.0:
            raise ConfigError("learning_rate must lie in (0, 1]")
        if not 0.0 < self.subsample <= 1.0 or not 0.0 < self.colsample <= 1.0:
            raise ConfigError("subsample and colsample must lie in (0, 1]")
        if self.max_leaves < 1 or self.max_depth < 1 or self.n_estimators_cap < 1:
            raise ConfigError("size caps must be at least 1")
        if self.min_data_in_leaf < 1:
            raise ConfigError("min_data_in_leaf must be at least 1")
        if self.l2_leaf_reg < 0:
            raise ConfigError("l2_leaf_reg must be nonnegative")
        if self.flavor not in FLAVORS:
            raise ConfigError(f"unknown flavor {self.flavor!r}")


@dataclass
class GBMEstimator:
    """Fitted booster: base score plus per-iteration trees (per class for
    multiclass)."""

    task_kind: str
    n_classes: int
    base_score: np.ndarray  # shape () for single output, (C,) for multiclass
    trees: list  # list of Tree/ObliviousTree, or list of lists per class
    params: GBMParams
    feature_gain_: np.ndarray = field(default=None)

    def predict_raw_scores(self, X: np.ndarray) -> np.ndarray:
        n = X.shape[0]
        if self.task_kind == "multiclass":
            raw = np.tile(self.base_score, (n, 1))
            for per_class in self.trees:
                for c, tree in enumerate(per_class):
                    raw[:, c] += tree.predict_raw(X)
            return raw
        raw = np.full(n, float(self.base_score))
        for tree in self.trees:
            raw += tree.predict_raw(X)
        return raw

    def predict(self, X: np.ndarray) -> np.ndarray:
        loss = make_loss(self.task_kind, self.n_classes)
        return loss.transform(self.predict_raw_scores(X))

    @property
    def n_iterations(self) -> int:
        return len(self.trees)


@dataclass
class FitResult:
    estimator: GBMEstimator
    eval_history: list[float]
    train_loss_history: list[float]
    best_iteration: int
    truncated: bool


def _grow(flavor: str, codes, g, h, rows, feats, mapper, params: GBMParams):
    if flavor == "leaf_wise":
        return grow_leafwise(codes, g, h, rows, feats, mapper,
                             params.max_leaves, params.min_data_in_leaf,
                             params.l2_leaf_reg, params.learning_rate)
    return grow_oblivious(codes, g, h, rows, feats, mapper,
                          params.max_depth, params.min_data_in_leaf,
                          params.l2_leaf_reg, params.learning_rate)


def fit_booster(X: np.ndarray, y: np.ndarray, params: GBMParams, task_kind: str,
                n_classes: int = 0, X_val: np.ndarray | None = None,
                y_val: np.ndarray | None = None, metric: MetricSpec | None = None,
                budget: TimeBudget | None = None, seed: int = 0,
                patience: int = 100, track_train_loss: bool = False) -> FitResult:
    """Train one booster with optional early stopping on a validation set.

    The budget is checked between iterations; on expiry the model truncates at
    the last completed iteration and is flagged. Histogram accumulation is
    single-pass per feature in a fixed order, so results do not depend on
    worker count.
    """
    if X.shape[1] == 0:
        raise DataError("no usable features")
    budget = budget or unlimited()
    loss = make_loss(task_kind, n_classes)
    n, f = X.shape
    mapper = BinMapper().fit(X)
    codes = mapper.transform(X)
    codes_val = mapper.transform(X_val) if X_val is not None else None

    y_fit = y.astype(np.float64) if task_kind != "multiclass" else y
    base = loss.init_score(y_fit)
    if task_kind == "multiclass":
        raw = np.tile(base, (n, 1))
        raw_val = np.tile(base, (X_val.shape[0], 1)) if X_val is not None else None
    else:
        raw = np.full(n, base)
        raw_val = np.full(X_val.shape[0], base) if X_val is not None else None

    rng = np.random.default_rng(seed)
    n_sub = max(1, int(round(params.subsample * n)))
    n_feats = max(1, int(np.ceil(params.colsample * f)))
    trees: list = []
    eval_history: list[float] = []
    train_loss_history: list[float] = []
    feature_gain = np.zeros(f)
    truncated = False

    for it in range(params.n_estimators_cap):
        if budget.expired():
            truncated = True
            break
        g, h = loss.grad_hess(y_fit, raw)
        rows = np.sort(rng.permutation(n)[:n_sub]) if params.subsample < 1.0 else np.arange(n)
        feats = (np.sort(rng.choice(f, size=n_feats, replace=False))
                 if params.colsample < 1.0 else np.arange(f))

        if task_kind == "multiclass":
            per_class = []
            for c in range(n_classes):
                tree, row_vals, tree_rows = _grow(
                    params.flavor, codes, g[:, c], h[:, c], rows, feats, mapper, params)
                raw[tree_rows, c] += row_vals
                if rows.shape[0] < n:
                    rest = np.setdiff1d(np.arange(n), tree_rows, assume_unique=False)
                    raw[rest, c] += tree.predict_codes(codes[rest])
                if codes_val is not None:
                    raw_val[:, c] += tree.predict_codes(codes_val)
                feature_gain += tree.feature_gain
                per_class.append(tree)
            trees.append(per_class)
        else:
            tree, row_vals, tree_rows = _grow(
                params.flavor, codes, g, h, rows, feats, mapper, params)
            raw[tree_rows] += row_vals
            if rows.shape[0] < n:
                rest = np.setdiff1d(np.arange(n), tree_rows, assume_unique=False)
                raw[rest] += tree.predict_codes(codes[rest])
            if codes_val is not None:
                raw_val += tree.predict_codes(codes_val)
            feature_gain += tree.feature_gain
            trees.append(tree)

        if track_train_loss:
            train_loss_history.append(loss.loss_value(y_fit, raw))
        if codes_val is not None and metric is not None:
            score = evaluate(metric, y_val, loss.transform(raw_val))
            eval_history.append(score)
            best = best_iteration(eval_history)
            if (len(eval_history) - 1) - best >= patience:
                break

    if eval_history:
        best = best_iteration(eval_history)
        trees = trees[: best + 1]
        eval_history = eval_history[: best + 1]
    else:
        best = len(trees) - 1

    est = GBMEstimator(task_kind, n_classes, np.asarray(base), trees, params,
                       feature_gain_=feature_gain)
    return FitResult(est, eval_history, train_loss_history, best, truncated)
