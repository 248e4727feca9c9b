"""L2-penalized linear models with a warm-started regularization path.

Each fold walks the strength grid from the most to the least regularized
point, warm-starting every solve from the previous solution and stopping the
walk after two consecutive grid points fail to improve the validation metric
(the path has a single optimum in practice).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize

from .budget import TimeBudget, unlimited
from .errors import ConfigError
from .gbm.losses import sigmoid, softmax
from .metrics import MetricSpec, evaluate
from .stopping import best_iteration

PATH_PATIENCE = 2


def default_lambda_grid() -> np.ndarray:
    return np.logspace(3, -5, 20)


@dataclass(frozen=True)
class LinearParams:
    lam_grid: tuple = field(default_factory=lambda: tuple(default_lambda_grid()))
    max_iterations: int = 500
    tolerance: float = 1e-8

    def __post_init__(self) -> None:
        grid = np.asarray(self.lam_grid)
        if np.any(grid < 0):
            raise ConfigError("regularization strengths must be nonnegative")
        if np.any(np.diff(grid) >= 0):
            raise ConfigError("lam_grid must be strictly decreasing")


@dataclass
class LinearEstimator:
    task_kind: str
    n_classes: int
    weights: np.ndarray  # (d,) or (d, C)
    intercept: np.ndarray  # () or (C,)
    lam: float

    def predict_raw_scores(self, X: np.ndarray) -> np.ndarray:
        return X @ self.weights + self.intercept

    def predict(self, X: np.ndarray) -> np.ndarray:
        raw = self.predict_raw_scores(X)
        if self.task_kind == "binary":
            return sigmoid(raw)
        if self.task_kind == "multiclass":
            return softmax(raw)
        return raw


def _binary_objective(x, X, y, lam):
    w, b = x[:-1], x[-1]
    z = X @ w + b
    p = sigmoid(z)
    n = X.shape[0]
    loss = float(np.mean(np.logaddexp(0.0, z) - y * z)) + 0.5 * lam * float(w @ w)
    grad_w = X.T @ (p - y) / n + lam * w
    grad_b = float(np.mean(p - y))
    return loss, np.concatenate([grad_w, [grad_b]])


def _regression_objective(x, X, y, lam):
    w, b = x[:-1], x[-1]
    r = X @ w + b - y
    n = X.shape[0]
    loss = 0.5 * float(np.mean(r ** 2)) + 0.5 * lam * float(w @ w)
    grad_w = X.T @ r / n + lam * w
    grad_b = float(np.mean(r))
    return loss, np.concatenate([grad_w, [grad_b]])


def _multiclass_objective(x, X, y, lam, n_classes):
    d = X.shape[1]
    W = x[: d * n_classes].reshape(d, n_classes)
    b = x[d * n_classes:]
    z = X @ W + b
    p = softmax(z)
    n = X.shape[0]
    idx = np.arange(n)
    zmax = z.max(axis=1)
    logsum = zmax + np.log(np.exp(z - zmax[:, None]).sum(axis=1))
    loss = float(np.mean(logsum - z[idx, y])) + 0.5 * lam * float((W * W).sum())
    G = p.copy()
    G[idx, y] -= 1.0
    grad_W = X.T @ G / n + lam * W
    grad_b = G.mean(axis=0)
    return loss, np.concatenate([grad_W.ravel(), grad_b])


def solve(X: np.ndarray, y: np.ndarray, lam: float, task_kind: str,
          n_classes: int = 0, x0: np.ndarray | None = None,
          max_iterations: int = 500, tolerance: float = 1e-8,
          trace: list | None = None) -> np.ndarray:
    """One L-BFGS solve at fixed regularization. Returns the packed solution.

    Pass `trace` to record the objective after every optimizer iteration.
    """
    d = X.shape[1]
    if task_kind == "multiclass":
        fun = lambda x: _multiclass_objective(x, X, y, lam, n_classes)
        size = d * n_classes + n_classes
    elif task_kind == "binary":
        fun = lambda x: _binary_objective(x, X, y, lam)
        size = d + 1
    else:
        fun = lambda x: _regression_objective(x, X, y, lam)
        size = d + 1
    if x0 is None:
        x0 = np.zeros(size)
    callback = None
    if trace is not None:
        callback = lambda xk: trace.append(fun(xk)[0])
    res = minimize(fun, x0, jac=True, method="L-BFGS-B", callback=callback,
                   options={"maxiter": max_iterations, "gtol": tolerance,
                            "ftol": 1e-15})
    return res.x


def unpack(x: np.ndarray, d: int, task_kind: str, n_classes: int,
           lam: float) -> LinearEstimator:
    if task_kind == "multiclass":
        W = x[: d * n_classes].reshape(d, n_classes)
        b = x[d * n_classes:]
        return LinearEstimator(task_kind, n_classes, W, b, lam)
    return LinearEstimator(task_kind, n_classes, x[:-1], np.float64(x[-1]), lam)


def fit_lambda_path(X: np.ndarray, y: np.ndarray, X_val: np.ndarray,
                    y_val: np.ndarray, task_kind: str, n_classes: int,
                    metric: MetricSpec, params: LinearParams,
                    budget: TimeBudget | None = None,
                    warm_start: bool = True) -> tuple[LinearEstimator, float, list[float]]:
    """Walk the strength grid with warm starts and early stopping.

    Returns the best estimator, its validation score, and the score history.
    Guarantees at least one grid point is solved even on an expired budget.
    """
    budget = budget or unlimited()
    d = X.shape[1]
    x_prev: np.ndarray | None = None
    history: list[float] = []
    solutions: list[np.ndarray] = []
    lams: list[float] = []
    worse_streak = 0
    for i, lam in enumerate(params.lam_grid):
        if i > 0 and budget.expired():
            break
        x = solve(X, y, float(lam), task_kind, n_classes,
                  x0=x_prev if warm_start else None,
                  max_iterations=params.max_iterations, tolerance=params.tolerance)
        x_prev = x
        est = unpack(x, d, task_kind, n_classes, float(lam))
        history.append(evaluate(metric, y_val, est.predict(X_val)))
        solutions.append(x)
        lams.append(float(lam))
        # a tie is not a worsening: scale-invariant metrics plateau across
        # the strongly regularized head of the grid
        if history[-1] < max(history):
            worse_streak += 1
            if worse_streak >= PATH_PATIENCE:
                break
        else:
            worse_streak = 0
    best = best_iteration(history)
    return (unpack(solutions[best], d, task_kind, n_classes, lams[best]),
            history[best], history)
