"""Technical indicators over daily bar series.

All functions return float arrays aligned with the input, with ``NaN`` marking
warm-up positions where the indicator is not yet defined. Outputs at index
``d`` only depend on inputs at indices ``<= d``.

Smoothing conventions: ATR and RSI use Wilder smoothing seeded with a simple
mean; EMAs use ``alpha = 2 / (n + 1)`` seeded with the SMA of the first ``n``
values; Bollinger bands use the population standard deviation.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from datetime import date
from typing import Sequence

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .market_data import DailyBar


@dataclass(frozen=True)
class IndicatorParams:
    sma_window: int = 20
    atr_window: int = 14
    rsi_window: int = 14
    macd_fast: int = 12
    macd_slow: int = 26
    macd_signal: int = 9
    boll_window: int = 20
    boll_k: float = 2.0


def _as_array(values) -> np.ndarray:
    return np.asarray(values, dtype=float)


def _check_window(window: int) -> None:
    if int(window) != window or window < 1:
        raise ValueError(f"window must be a positive integer, got {window!r}")


def sma(closes: Sequence[float], window: int = 20) -> np.ndarray:
    _check_window(window)
    x = _as_array(closes)
    out = np.full(x.shape, np.nan)
    if len(x) >= window:
        out[window - 1:] = sliding_window_view(x, window).mean(axis=1)
    return out


def ema(values: Sequence[float], span: int) -> np.ndarray:
    """Exponential moving average seeded with the SMA of the first ``span``
    defined values. Leading NaNs in ``values`` are skipped."""
    _check_window(span)
    x = _as_array(values)
    out = np.full(x.shape, np.nan)
    valid = np.flatnonzero(~np.isnan(x))
    if len(valid) < span:
        return out
    start = valid[0]
    if np.isnan(x[start:]).any():
        raise ValueError("ema input may only contain leading NaNs")
    alpha = 2.0 / (span + 1)
    seed_at = start + span - 1
    prev = x[start:seed_at + 1].mean()
    out[seed_at] = prev
    for i in range(seed_at + 1, len(x)):
        prev = alpha * x[i] + (1.0 - alpha) * prev
        out[i] = prev
    return out


def true_range(highs, lows, closes) -> np.ndarray:
    """True range; index 0 is undefined because it needs a previous close."""
    h, l, c = _as_array(highs), _as_array(lows), _as_array(closes)
    out = np.full(h.shape, np.nan)
    if len(h) >= 2:
        prev = c[:-1]
        out[1:] = np.maximum.reduce([h[1:] - l[1:], np.abs(h[1:] - prev), np.abs(l[1:] - prev)])
    return out


def _wilder(values: np.ndarray, window: int, first: int) -> np.ndarray:
    """Wilder smoothing of ``values[first:]``, seeded with their first-window mean."""
    out = np.full(values.shape, np.nan)
    seed_at = first + window - 1
    if seed_at >= len(values):
        return out
    prev = values[first:seed_at + 1].mean()
    out[seed_at] = prev
    for i in range(seed_at + 1, len(values)):
        prev = (prev * (window - 1) + values[i]) / window
        out[i] = prev
    return out


def atr(highs, lows, closes, window: int = 14) -> np.ndarray:
    _check_window(window)
    return _wilder(true_range(highs, lows, closes), window, first=1)


def atr_from_bars(bars: Sequence[DailyBar], window: int = 14) -> np.ndarray:
    return atr([b.high for b in bars], [b.low for b in bars], [b.close for b in bars], window)


def rsi(closes: Sequence[float], window: int = 14) -> np.ndarray:
    """Wilder RSI. A window with neither gains nor losses reads 50."""
    _check_window(window)
    c = _as_array(closes)
    out = np.full(c.shape, np.nan)
    if len(c) < window + 1:
        return out
    delta = np.concatenate([[np.nan], np.diff(c)])
    gain = _wilder(np.where(delta > 0, delta, 0.0), window, first=1)
    loss = _wilder(np.where(delta < 0, -delta, 0.0), window, first=1)
    for i in range(window, len(c)):
        g, l = gain[i], loss[i]
        if l == 0.0:
            out[i] = 50.0 if g == 0.0 else 100.0
        else:
            out[i] = 100.0 - 100.0 / (1.0 + g / l)
    return out


def macd(closes: Sequence[float], fast: int = 12, slow: int = 26, signal: int = 9):
    """Return ``(line, signal, hist)`` arrays."""
    if slow <= fast:
        raise ValueError(f"slow window ({slow}) must exceed fast window ({fast})")
    line = ema(closes, fast) - ema(closes, slow)
    sig = ema(line, signal)
    return line, sig, line - sig


def bollinger(closes: Sequence[float], window: int = 20, k: float = 2.0):
    """Return ``(upper, mid, lower)`` bands using population standard deviation."""
    _check_window(window)
    if k < 0:
        raise ValueError("band width multiplier k must be non-negative")
    x = _as_array(closes)
    mid = np.full(x.shape, np.nan)
    sd = np.full(x.shape, np.nan)
    if len(x) >= window:
        windows = sliding_window_view(x, window)
        mid[window - 1:] = windows.mean(axis=1)
        sd[window - 1:] = windows.std(axis=1, ddof=0)
    return mid + k * sd, mid, mid - k * sd


@dataclass(frozen=True)
class IndicatorRow:
    date: date
    close: float
    sma: float | None = None
    atr: float | None = None
    rsi: float | None = None
    macd_line: float | None = None
    macd_signal: float | None = None
    macd_hist: float | None = None
    boll_upper: float | None = None
    boll_mid: float | None = None
    boll_lower: float | None = None

    def defined(self) -> dict[str, float]:
        """Indicator fields that are past their warm-up."""
        return {k: v for k, v in asdict(self).items() if k not in ("date", "close") and v is not None}


INDICATOR_FIELDS = (
    "sma", "atr", "rsi", "macd_line", "macd_signal", "macd_hist", "boll_upper", "boll_mid", "boll_lower",
)


def _opt(v: float) -> float | None:
    return None if math.isnan(v) else float(v)


def indicator_table(bars: Sequence[DailyBar], params: IndicatorParams = IndicatorParams()) -> list[IndicatorRow]:
    """One row per bar of a single stock, ordered by date."""
    bars = sorted(bars, key=lambda b: b.date)
    if len({b.symbol for b in bars}) > 1:
        raise ValueError("indicator_table expects bars of a single stock")
    closes = [b.close for b in bars]
    columns = {
        "sma": sma(closes, params.sma_window),
        "atr": atr_from_bars(bars, params.atr_window),
        "rsi": rsi(closes, params.rsi_window),
    }
    columns["macd_line"], columns["macd_signal"], columns["macd_hist"] = macd(
        closes, params.macd_fast, params.macd_slow, params.macd_signal
    )
    columns["boll_upper"], columns["boll_mid"], columns["boll_lower"] = bollinger(
        closes, params.boll_window, params.boll_k
    )
    return [
        IndicatorRow(date=b.date, close=b.close, **{name: _opt(col[i]) for name, col in columns.items()})
        for i, b in enumerate(bars)
    ]
