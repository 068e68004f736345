"""Probabilities carried in natural-log space."""

from __future__ import annotations

import math
from dataclasses import dataclass

_LOG10_E = 1.0 / math.log(10.0)


@dataclass(frozen=True, order=True)
class LogProb:
    """A probability (or an upper bound on one) stored as its natural log.

    ``log_p`` is kept unclamped so that callers comparing bounds see the raw
    value; ``log`` and ``value`` clamp at probability one.
    """

    log_p: float

    @property
    def log(self) -> float:
        return min(self.log_p, 0.0) + 0.0  # no -0.0 in output

    @property
    def value(self) -> float:
        # underflows to 0.0 for very small probabilities; log is authoritative
        return math.exp(self.log)

    @property
    def log10(self) -> float:
        return self.log * _LOG10_E

    def __float__(self) -> float:
        return self.value

    @classmethod
    def zero(cls) -> "LogProb":
        return cls(-math.inf)

    @classmethod
    def one(cls) -> "LogProb":
        return cls(0.0)
