"""Deterministic synthetic market data for tests, demos and smoke runs.

Prices follow a seeded geometric random walk on weekdays; each stock gets a
headline every few days and a quarterly report released a few weeks after
quarter end.
"""

from __future__ import annotations

from datetime import date, timedelta
from pathlib import Path
from typing import Sequence

import numpy as np

from .market_data import (
    DailyBar,
    FundamentalReport,
    MarketData,
    NewsItem,
    dump_daily_bars,
    dump_fundamentals,
    dump_news,
    quarter_end,
)

DEFAULT_SYMBOLS = ("AAA", "BBB", "CCC", "DDD", "EEE", "FFF")
DEFAULT_START = date(2023, 1, 2)  # a Monday

_HEADLINES = (
    "{s} beats revenue expectations",
    "{s} announces share buyback",
    "{s} faces regulatory inquiry",
    "{s} names new chief financial officer",
    "{s} expands into new markets",
    "{s} cuts full-year guidance",
)


def weekdays(start: date, weeks: int) -> list[date]:
    """Monday-to-Friday dates for ``weeks`` consecutive ISO weeks from ``start``'s week."""
    monday = start - timedelta(days=start.weekday())
    return [monday + timedelta(days=7 * w + d) for w in range(weeks) for d in range(5)]


def _quarter_label(day: date) -> str:
    return f"{day.year}Q{(day.month - 1) // 3 + 1}"


def _previous_quarter(label: str) -> str:
    year, q = int(label[:4]), int(label[5])
    return f"{year - 1}Q4" if q == 1 else f"{year}Q{q - 1}"


def generate_market(
    symbols: Sequence[str] = DEFAULT_SYMBOLS,
    weeks: int = 12,
    start: date = DEFAULT_START,
    seed: int = 7,
    vol: float = 0.02,
) -> MarketData:
    rng = np.random.default_rng(seed)
    days = weekdays(start, weeks)
    bars: list[DailyBar] = []
    news: list[NewsItem] = []
    fundamentals: list[FundamentalReport] = []
    for k, symbol in enumerate(symbols):
        price = 50.0 + 25.0 * k
        drift = rng.normal(0.0, 0.002)
        for i, day in enumerate(days):
            open_ = round(price * (1 + rng.normal(0.0, vol / 4)), 2)
            close = round(open_ * np.exp(drift + rng.normal(0.0, vol)), 2)
            high = round(max(open_, close) * (1 + abs(rng.normal(0.0, vol / 2))), 2)
            low = round(min(open_, close) * (1 - abs(rng.normal(0.0, vol / 2))), 2)
            volume = int(rng.integers(100_000, 5_000_000))
            bars.append(DailyBar(symbol, day, open_, high, low, close, volume))
            price = close
            if (i + k) % 3 == 0:
                title = _HEADLINES[int(rng.integers(len(_HEADLINES)))].format(s=symbol)
                news.append(NewsItem(symbol, day, title, f"Synthetic report {i} on {symbol}."))
        # one report per quarter that ends at least 20 days before the last day
        label = _previous_quarter(_quarter_label(days[0]))
        for _ in range(3):
            label = _previous_quarter(label)
        while True:
            release = quarter_end(label) + timedelta(days=20 + k)
            if release > days[-1]:
                break
            fundamentals.append(FundamentalReport(
                symbol, label, release,
                {
                    "revenue": float(round(1e9 * (1 + k) * (1 + rng.normal(0, 0.05)), 2)),
                    "net_income": float(round(1e8 * (1 + k) * (1 + rng.normal(0, 0.2)), 2)),
                    "eps": float(round(1.5 + k * 0.3 + rng.normal(0, 0.1), 4)),
                },
            ))
            year, q = int(label[:4]), int(label[5])
            label = f"{year + 1}Q1" if q == 4 else f"{year}Q{q + 1}"
    return MarketData(bars, news, fundamentals)


def write_store(data: MarketData, out_dir: str | Path) -> Path:
    """Write ``bars.csv``, ``news.jsonl`` and ``fundamentals.jsonl``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "bars.csv").write_text(dump_daily_bars(data.bars), encoding="utf-8")
    (out / "news.jsonl").write_text(dump_news(data.news), encoding="utf-8")
    (out / "fundamentals.jsonl").write_text(dump_fundamentals(data.fundamentals), encoding="utf-8")
    return out
