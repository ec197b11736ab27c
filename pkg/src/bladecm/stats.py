"""Filtering, thresholds and the residual-trace container shared by both models."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.signal import lfilter

from .errors import EmptyInput, NonFiniteInput


def lowpass(series, alpha: float, y0: Optional[float] = None) -> np.ndarray:
    """First-order IIR: y[0] = u[0] (or ``y0``), y[k] = alpha*y[k-1] + (1-alpha)*u[k]."""
    if not 0 < alpha < 1:
        raise ValueError(f"alpha must lie in (0, 1), got {alpha}")
    u = np.asarray(series, dtype=float)
    if u.size == 0:
        return u.copy()
    if not np.all(np.isfinite(u)):
        raise NonFiniteInput("low-pass input contains non-finite values")
    first = u[0] if y0 is None else (alpha * y0 + (1 - alpha) * u[0])
    rest, _ = lfilter([1 - alpha], [1, -alpha], u[1:], zi=[alpha * first])
    return np.concatenate([[first], rest])


def quantile_threshold(values, pf: float) -> float:
    """Nearest-rank (1 - pf) quantile: the ceil((1-pf)N)-th smallest value."""
    v = np.asarray(values, dtype=float).ravel()
    if v.size == 0:
        raise EmptyInput("cannot take a quantile of no values")
    if not 0 < pf < 1:
        raise ValueError(f"pf must lie in (0, 1), got {pf}")
    if not np.all(np.isfinite(v)):
        raise NonFiniteInput("threshold input contains non-finite values")
    # guard against (1-pf)*N landing a hair above an integer
    rank = max(1, math.ceil(round((1.0 - pf) * v.size, 9)))
    return float(np.partition(v, rank - 1)[rank - 1])


@dataclass(frozen=True)
class ResidualTrace:
    """Per-sample residual statistic of a reconstruction model.

    ``raw`` and ``filtered`` are NaN where no statistic exists (warm-up);
    ``threshold`` is per sample because region-specific models may differ.
    """

    raw: np.ndarray
    filtered: np.ndarray
    threshold: np.ndarray
    flags: np.ndarray
    regions: Optional[np.ndarray] = None

    def __post_init__(self):
        n = len(self.raw)
        if not (len(self.filtered) == len(self.threshold) == len(self.flags) == n):
            raise ValueError("trace sequences must have equal length")

    def __len__(self):
        return len(self.raw)

    @property
    def valid(self) -> np.ndarray:
        return np.isfinite(self.raw)

    def exceedance_fraction(self) -> float:
        valid = self.valid
        if not valid.any():
            return 0.0
        return float(self.flags[valid].mean())


def sample_mean_std(values) -> tuple[float, float]:
    """Two-pass mean and standard deviation (divisor N-1)."""
    v = np.asarray(values, dtype=float).ravel()
    mean = float(np.sum(v) / v.size)
    var = float(np.sum((v - mean) ** 2) / (v.size - 1))
    return mean, math.sqrt(var)
