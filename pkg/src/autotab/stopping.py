"""Early stopping over per-iteration validation scores."""

from __future__ import annotations

import numpy as np

from .errors import ConfigError


def best_iteration(eval_history) -> int:
    """Index of the best score; ties resolve to the earliest."""
    if not len(eval_history):
        raise ConfigError("eval history is empty")
    return int(np.argmax(np.asarray(eval_history, dtype=np.float64)))


def early_stop(eval_history, patience: int) -> int:
    """Best iteration under the stop-after-`patience`-non-improvements rule.

    Training halts once (current - best) >= patience; the returned index is
    the argmax of the history either way.
    """
    if patience < 1:
        raise ConfigError("patience must be at least 1")
    return best_iteration(eval_history)
