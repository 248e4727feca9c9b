"""Independent brute-force oracles used to pin expected values."""

from __future__ import annotations

import itertools

import numpy as np


def gini_pairwise(y, x, task_kind=None) -> float:
    """O(n^2) pair count: |C - D| / P with ties contributing nothing."""
    y = np.asarray(y, dtype=np.float64)
    x = np.asarray(x, dtype=np.float64)
    if task_kind == "multiclass":
        classes = np.unique(y)
        return max(gini_pairwise((y == c).astype(float), x) for c in classes)
    n = len(y)
    c = d = p = 0
    for i in range(n):
        for j in range(i + 1, n):
            dy = y[i] - y[j]
            if dy != 0:
                p += 1
            prod = (x[i] - x[j]) * dy
            if prod > 0:
                c += 1
            elif prod < 0:
                d += 1
    if p == 0:
        return 0.0
    return abs(c - d) / p


def gini_pairwise_np(y, x, task_kind=None) -> float:
    """The same O(n^2) pair count, materialized as sign matrices."""
    y = np.asarray(y, dtype=np.float64)
    x = np.asarray(x, dtype=np.float64)
    if task_kind == "multiclass":
        classes = np.unique(y)
        return max(gini_pairwise_np((y == c).astype(float), x) for c in classes)
    upper = np.triu_indices(len(y), k=1)
    dy = (y[:, None] - y[None, :])[upper]
    dx = (x[:, None] - x[None, :])[upper]
    prod = dx * dy
    p = int((dy != 0).sum())
    if p == 0:
        return 0.0
    c = int((prod > 0).sum())
    d = int((prod < 0).sum())
    return abs(c - d) / p


def oof_mean_by_hand(col, y, fold, alpha) -> np.ndarray:
    """Literal per-row formula for the OOF target encoding.

    The smoothing mean is the mean of y outside the row's fold, so row i's
    own target never contributes to its encoding.
    """
    col = list(col)
    y = np.asarray(y, dtype=np.float64)
    fold = list(fold)
    out = np.empty(len(col))
    for i in range(len(col)):
        outside = [y[j] for j in range(len(col)) if fold[j] != fold[i]]
        gm = float(np.mean(outside)) if outside else float(y.mean())
        num = alpha * gm
        den = alpha
        seen = False
        for j in range(len(col)):
            if col[j] == col[i] and fold[j] != fold[i]:
                num += y[j]
                den += 1
                seen = True
        out[i] = num / den if den > 0 else gm
        if not seen and alpha == 0:
            out[i] = gm
    return out


def simplex_grid_best(preds, y, metric_fn, step=0.01):
    """Exhaustive weight search on the simplex at the given resolution."""
    m = len(preds)
    ticks = int(round(1.0 / step))
    best_score = -np.inf
    best_w = None
    for combo in itertools.product(range(ticks + 1), repeat=m - 1):
        if sum(combo) > ticks:
            continue
        w = np.array(list(combo) + [ticks - sum(combo)], dtype=np.float64) / ticks
        blended = sum(wi * p for wi, p in zip(w, preds))
        score = metric_fn(y, blended)
        if score > best_score:
            best_score = score
            best_w = w
    return best_w, best_score
