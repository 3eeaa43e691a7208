"""Fairness and confidence-interval statistics."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.stats import norm

from .errors import InsufficientDataError, UndefinedIndexError


def jain_index(values) -> float:
    """Jain's fairness index ``(sum x)**2 / (n * sum x**2)``."""
    x = np.asarray(values, dtype=float)
    if x.ndim != 1 or x.size == 0:
        raise UndefinedIndexError("need at least one value")
    if np.any(x < 0):
        raise UndefinedIndexError("values must be nonnegative")
    sq = float(np.sum(x * x))
    if sq == 0.0:
        raise UndefinedIndexError("index is undefined when every value is zero")
    return float(np.sum(x)) ** 2 / (x.size * sq)


@dataclass(frozen=True)
class MeanCI:
    mean: float
    half_width: float
    n: int
    level: float

    @property
    def tight(self) -> bool:
        """True when the full interval width is below 5% of the mean."""
        return 2.0 * self.half_width < 0.05 * abs(self.mean)


def mean_with_ci(samples, level: float = 0.95) -> MeanCI:
    """Sample mean with a normal-approximation confidence half-width."""
    x = np.asarray(samples, dtype=float).ravel()
    if x.size < 2:
        raise InsufficientDataError("need at least two samples")
    z = norm.ppf(0.5 + level / 2.0)
    half = z * float(np.std(x, ddof=1)) / np.sqrt(x.size)
    return MeanCI(float(np.mean(x)), float(half), int(x.size), level)
