from __future__ import annotations

import math
from datetime import date, timedelta

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tristrat.indicators import (
    IndicatorParams,
    atr,
    bollinger,
    ema,
    indicator_table,
    macd,
    rsi,
    sma,
    true_range,
)
from tristrat.market_data import DailyBar

NAN = float("nan")


# Naive reference recursions -----------------------------------------------

def ref_sma(x, n):
    return [NAN if i < n - 1 else sum(x[i - n + 1:i + 1]) / n for i in range(len(x))]


def ref_ema(x, n):
    out = [NAN] * len(x)
    valid = [i for i, v in enumerate(x) if not math.isnan(v)]
    if len(valid) < n:
        return out
    s = valid[0]
    out[s + n - 1] = sum(x[s:s + n]) / n
    for i in range(s + n, len(x)):
        out[i] = (2 / (n + 1)) * x[i] + (1 - 2 / (n + 1)) * out[i - 1]
    return out


def ref_tr(h, l, c):
    return [NAN] + [max(h[i] - l[i], abs(h[i] - c[i - 1]), abs(l[i] - c[i - 1])) for i in range(1, len(h))]


def ref_wilder(vals, n):
    """Wilder smoothing of vals[1:], seeded by the mean of vals[1..n]."""
    out = [NAN] * len(vals)
    if len(vals) <= n:
        return out
    out[n] = sum(vals[1:n + 1]) / n
    for i in range(n + 1, len(vals)):
        out[i] = (out[i - 1] * (n - 1) + vals[i]) / n
    return out


def ref_rsi(c, n):
    gains = [NAN] + [max(c[i] - c[i - 1], 0.0) for i in range(1, len(c))]
    losses = [NAN] + [max(c[i - 1] - c[i], 0.0) for i in range(1, len(c))]
    ag, al = ref_wilder(gains, n), ref_wilder(losses, n)
    out = []
    for g, l in zip(ag, al):
        if math.isnan(g):
            out.append(NAN)
        elif l == 0:
            out.append(50.0 if g == 0 else 100.0)
        else:
            out.append(100 - 100 / (1 + g / l))
    return out


def ref_boll(x, n, k):
    up, mid, lo = [], [], []
    for i in range(len(x)):
        if i < n - 1:
            up.append(NAN), mid.append(NAN), lo.append(NAN)
            continue
        w = x[i - n + 1:i + 1]
        m = sum(w) / n
        sd = math.sqrt(sum((v - m) ** 2 for v in w) / n)
        up.append(m + k * sd), mid.append(m), lo.append(m - k * sd)
    return up, mid, lo


def random_ohlc(rng, n=252):
    closes = 100 * np.exp(np.cumsum(rng.normal(0, 0.02, n)))
    opens = closes * (1 + rng.normal(0, 0.005, n))
    highs = np.maximum(opens, closes) * (1 + np.abs(rng.normal(0, 0.01, n)))
    lows = np.minimum(opens, closes) * (1 - np.abs(rng.normal(0, 0.01, n)))
    return opens, highs, lows, closes


def assert_series_close(actual, expected, tol=1e-9):
    actual = np.asarray(actual, dtype=float)
    expected = np.asarray(expected, dtype=float)
    assert actual.shape == expected.shape
    assert np.array_equal(np.isnan(actual), np.isnan(expected))
    m = ~np.isnan(expected)
    assert np.all(np.abs(actual[m] - expected[m]) <= tol * np.maximum(1.0, np.abs(expected[m])))


# Tests ---------------------------------------------------------------------

def test_indicators_match_naive_recursions():
    rng = np.random.default_rng(11)
    for _ in range(20):
        _, h, l, c = random_ohlc(rng)
        c_list = list(c)
        assert_series_close(sma(c, 20), ref_sma(c_list, 20))
        assert_series_close(ema(c, 12), ref_ema(c_list, 12))
        assert_series_close(true_range(h, l, c), ref_tr(list(h), list(l), c_list))
        assert_series_close(atr(h, l, c, 14), ref_wilder(ref_tr(list(h), list(l), c_list), 14))
        assert_series_close(rsi(c, 14), ref_rsi(c_list, 14))
        line, sig, hist = macd(c)
        ref_line = [a - b for a, b in zip(ref_ema(c_list, 12), ref_ema(c_list, 26))]
        ref_sig = ref_ema(ref_line, 9)
        assert_series_close(line, ref_line)
        assert_series_close(sig, ref_sig)
        assert_series_close(hist, [a - b for a, b in zip(ref_line, ref_sig)])
        for got, want in zip(bollinger(c, 20, 2.0), ref_boll(c_list, 20, 2.0)):
            assert_series_close(got, want)


def test_warmup_lengths():
    c = np.linspace(10, 20, 40)
    assert np.isnan(sma(c, 20)[18]) and not np.isnan(sma(c, 20)[19])
    assert np.isnan(atr(c + 1, c - 1, c, 14)[13]) and not np.isnan(atr(c + 1, c - 1, c, 14)[14])
    assert np.isnan(rsi(c, 14)[13]) and not np.isnan(rsi(c, 14)[14])
    line, sig, _ = macd(c)
    assert np.isnan(line[24]) and not np.isnan(line[25])
    assert np.isnan(sig[32]) and not np.isnan(sig[33])


def test_short_series_is_all_nan():
    assert np.isnan(sma([1.0, 2.0], 20)).all()
    assert np.isnan(rsi([1.0] * 10, 14)).all()
    assert np.isnan(bollinger([1.0] * 5)[1]).all()


def test_rsi_edge_cases():
    assert rsi(np.full(20, 5.0), 14)[-1] == 50.0
    assert rsi(np.arange(1.0, 21.0), 14)[-1] == 100.0
    assert rsi(np.arange(20.0, 0.0, -1.0), 14)[-1] == 0.0


def test_bollinger_flat_series_collapses_bands():
    up, mid, lo = bollinger(np.full(25, 7.0))
    assert up[-1] == mid[-1] == lo[-1] == 7.0


def test_parameter_validation():
    with pytest.raises(ValueError):
        sma([1.0] * 5, 0)
    with pytest.raises(ValueError):
        macd([1.0] * 40, fast=26, slow=12)
    with pytest.raises(ValueError):
        bollinger([1.0] * 40, k=-1)


def _bars(closes, highs, lows, opens):
    start = date(2024, 1, 1)
    return [
        DailyBar("XYZ", start + timedelta(days=i), float(o), float(h), float(l), float(c), 100)
        for i, (o, h, l, c) in enumerate(zip(opens, highs, lows, closes))
    ]


def test_indicator_table_uses_none_for_warmup():
    rng = np.random.default_rng(3)
    o, h, l, c = random_ohlc(rng, 30)
    rows = indicator_table(_bars(c, h, l, o))
    assert rows[0].sma is None and rows[0].atr is None
    assert rows[-1].sma == pytest.approx(float(np.mean(c[-20:])))
    assert rows[-1].macd_line is not None and rows[-1].macd_signal is None
    assert set(rows[-1].defined()) >= {"sma", "atr", "rsi", "macd_line", "boll_mid"}


def test_no_lookahead_truncation():
    """Every indicator at index d equals its value computed on bars[:d+1]."""
    rng = np.random.default_rng(5)
    for _ in range(5):
        o, h, l, c = random_ohlc(rng, 80)
        bars = _bars(c, h, l, o)
        full = indicator_table(bars)
        for d in range(0, 80, 7):
            truncated = indicator_table(bars[:d + 1])[-1]
            assert truncated == full[d]


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(1.0, 1000.0, allow_nan=False), min_size=30, max_size=80), st.integers(0, 79))
def test_truncation_property_on_arbitrary_closes(closes, cut):
    cut = min(cut, len(closes) - 1)
    full = [sma(closes, 20), rsi(closes, 14), *macd(closes), *bollinger(closes)]
    part = [sma(closes[:cut + 1], 20), rsi(closes[:cut + 1], 14), *macd(closes[:cut + 1]),
            *bollinger(closes[:cut + 1])]
    for f, p in zip(full, part):
        assert np.array_equal(f[:cut + 1], p, equal_nan=True)


def test_custom_params_flow_through_table():
    rng = np.random.default_rng(8)
    o, h, l, c = random_ohlc(rng, 30)
    rows = indicator_table(_bars(c, h, l, o), IndicatorParams(sma_window=5))
    assert rows[4].sma == pytest.approx(float(np.mean(c[:5])))
