"""Wall-clock time budgets.

A budget starts ticking when constructed. Phases receive sub-budgets carved
out of the remaining time; callers poll ``remaining()`` between units of work
(boosting iterations, regularization steps, tuning trials) and truncate
gracefully when it hits zero.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field


@dataclass
class TimeBudget:
    total_seconds: float
    started_at: float = field(default_factory=time.monotonic)

    def elapsed(self) -> float:
        return time.monotonic() - self.started_at

    def remaining(self) -> float:
        return max(0.0, self.total_seconds - self.elapsed())

    def expired(self) -> bool:
        return self.remaining() <= 0.0

    def sub(self, seconds: float) -> "TimeBudget":
        """Carve a child budget of at most `seconds`, capped by what is left."""
        return TimeBudget(min(max(seconds, 0.0), self.remaining()))


def unlimited() -> TimeBudget:
    """A budget that practically never expires (for tests and direct API use)."""
    return TimeBudget(float(10 ** 9))
