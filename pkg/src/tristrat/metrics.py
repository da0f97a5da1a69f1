"""Performance metrics over a sequence of weekly portfolio returns.

Drawdown is measured on the wealth curve ``W_t = prod(1 + R_1..R_t)`` with an
implicit starting level of 1.0. The Sharpe ratio is the mean over the sample
(Bessel-corrected) standard deviation of weekly returns, with a zero risk-free
rate and no annualization.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import UndefinedMetricError


def wealth_curve(returns: Sequence[float]) -> np.ndarray:
    return np.cumprod(1.0 + np.asarray(returns, dtype=float))


def accumulated_return(returns: Sequence[float]) -> float:
    if len(returns) == 0:
        return 0.0
    # the final wealth level, so AR agrees exactly with the equity curve
    return float(wealth_curve(returns)[-1] - 1.0)


def sharpe(returns: Sequence[float]) -> float:
    # exactly rounded sums keep the ratio accurate when the mean is near zero
    r = [float(x) for x in returns]
    n = len(r)
    if n < 2:
        raise UndefinedMetricError("Sharpe ratio needs at least two returns")
    if max(r) == min(r):
        raise UndefinedMetricError("Sharpe ratio undefined for zero-variance returns")
    mean = math.fsum(r) / n
    var = math.fsum((x - mean) ** 2 for x in r) / (n - 1)
    if var == 0.0:
        raise UndefinedMetricError("Sharpe ratio undefined for zero-variance returns")
    return mean / math.sqrt(var)


def max_drawdown(returns: Sequence[float]) -> float:
    """Worst peak-to-trough decline of the wealth curve, as a value in [-1, 0]."""
    if len(returns) == 0:
        return 0.0
    wealth = np.concatenate([[1.0], wealth_curve(returns)])
    peaks = np.maximum.accumulate(wealth)
    return float(min(0.0, ((wealth - peaks) / peaks).min()))


def calmar(ar: float, mdd: float) -> float:
    if mdd == 0.0:
        raise UndefinedMetricError("Calmar ratio undefined without a drawdown")
    return ar / abs(mdd)


@dataclass(frozen=True)
class MetricsReport:
    accumulated_return: float
    sharpe: float | None
    calmar: float | None
    max_drawdown: float
    weeks: int

    def as_dict(self) -> dict:
        return {
            "AR": self.accumulated_return,
            "SR": self.sharpe,
            "CR": self.calmar,
            "MDD": self.max_drawdown,
            "weeks": self.weeks,
        }


def compute_metrics(returns: Sequence[float]) -> MetricsReport:
    """All metrics at once; undefined ratios are reported as ``None``."""
    ar = accumulated_return(returns)
    mdd = max_drawdown(returns)
    try:
        sr = sharpe(returns)
    except UndefinedMetricError:
        sr = None
    try:
        cr = calmar(ar, mdd)
    except UndefinedMetricError:
        cr = None
    return MetricsReport(ar, sr, cr, mdd, len(returns))
