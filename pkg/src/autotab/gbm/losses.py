"""Loss functions for Newton boosting: gradients, hessians, base scores."""

from __future__ import annotations

import numpy as np

_CLIP = 1e-15


def sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def softmax(z: np.ndarray) -> np.ndarray:
    zs = z - z.max(axis=1, keepdims=True)
    ez = np.exp(zs)
    return ez / ez.sum(axis=1, keepdims=True)


class BinaryLogloss:
    n_outputs = 1

    def init_score(self, y: np.ndarray) -> float:
        p = float(np.clip(y.mean(), _CLIP, 1 - _CLIP))
        return float(np.log(p / (1.0 - p)))

    def grad_hess(self, y: np.ndarray, raw: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        p = sigmoid(raw)
        return p - y, p * (1.0 - p)

    def transform(self, raw: np.ndarray) -> np.ndarray:
        return sigmoid(raw)

    def loss_value(self, y: np.ndarray, raw: np.ndarray) -> float:
        # mean logloss in a numerically stable form
        return float(np.mean(np.logaddexp(0.0, raw) - y * raw))


class MulticlassSoftmax:
    def __init__(self, n_classes: int) -> None:
        self.n_outputs = n_classes

    def init_score(self, y: np.ndarray) -> np.ndarray:
        prior = np.bincount(y.astype(np.int64), minlength=self.n_outputs) / y.shape[0]
        return np.log(np.clip(prior, _CLIP, None))

    def grad_hess(self, y: np.ndarray, raw: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        p = softmax(raw)
        g = p.copy()
        g[np.arange(y.shape[0]), y.astype(np.int64)] -= 1.0
        return g, p * (1.0 - p)

    def transform(self, raw: np.ndarray) -> np.ndarray:
        return softmax(raw)

    def loss_value(self, y: np.ndarray, raw: np.ndarray) -> float:
        p = softmax(raw)
        return float(-np.mean(np.log(np.clip(
            p[np.arange(y.shape[0]), y.astype(np.int64)], _CLIP, None))))


class SquaredError:
    n_outputs = 1

    def init_score(self, y: np.ndarray) -> float:
        return float(y.mean())

    def grad_hess(self, y: np.ndarray, raw: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        return raw - y, np.ones_like(raw)

    def transform(self, raw: np.ndarray) -> np.ndarray:
        return raw

    def loss_value(self, y: np.ndarray, raw: np.ndarray) -> float:
        return float(0.5 * np.mean((raw - y) ** 2))


def make_loss(task_kind: str, n_classes: int = 0):
    if task_kind == "binary":
        return BinaryLogloss()
    if task_kind == "multiclass":
        return MulticlassSoftmax(n_classes)
    return SquaredError()
