from __future__ import annotations

from datetime import date, timedelta
from pathlib import Path

import pytest

from tristrat.config import ProviderSettings, RunConfig
from tristrat.market_data import DailyBar, FundamentalReport, MarketData, NewsItem
from tristrat.synthetic import write_store

SYMBOLS = ("AAA", "BBB", "CCC", "DDD", "EEE", "FFF")
FIXTURE_MONDAY = date(2024, 1, 1)
WARMUP_WEEKS = 4
EVAL_WEEKS = 8

# Hand-picked weekly close/open ratios per stock (rows: weeks 1..12).
WEEKLY_MOVES = (
    (1.02, 0.99, 1.01, 1.00, 0.98, 1.03),
    (0.97, 1.01, 1.02, 1.01, 1.00, 0.99),
    (1.01, 1.02, 0.98, 0.99, 1.02, 1.00),
    (1.03, 0.98, 1.00, 1.02, 0.99, 1.01),
    (0.99, 1.04, 1.01, 0.97, 1.01, 1.02),
    (1.02, 0.97, 1.03, 1.01, 0.98, 0.99),
    (1.00, 1.01, 0.96, 1.04, 1.02, 1.01),
    (1.05, 0.99, 1.02, 0.98, 0.97, 1.00),
    (0.98, 1.02, 1.01, 1.00, 1.03, 0.96),
    (1.01, 1.03, 0.99, 0.97, 1.00, 1.02),
    (0.96, 1.00, 1.04, 1.02, 1.01, 0.98),
    (1.02, 0.98, 0.97, 1.03, 0.99, 1.04),
)


def fixture_days() -> list[list[date]]:
    """Trading days per week; week 7 starts on Tuesday (Monday holiday)."""
    weeks = []
    for w in range(WARMUP_WEEKS + EVAL_WEEKS):
        monday = FIXTURE_MONDAY + timedelta(days=7 * w)
        days = [monday + timedelta(days=d) for d in range(5)]
        if w == 6:
            days = days[1:]
        weeks.append(days)
    return weeks


def fixture_bars() -> list[DailyBar]:
    """Daily bars whose week-level open-to-close ratio equals WEEKLY_MOVES.

    Within a week the path is linear from the first open to the last close;
    the next week opens at the previous close. FFF has no bar on the last
    day of week 9, so it is not tradable that week.
    """
    bars = []
    for k, symbol in enumerate(SYMBOLS):
        price = 40.0 + 20.0 * k
        for w, days in enumerate(fixture_days()):
            start, end = price, price * WEEKLY_MOVES[w][k]
            n = len(days)
            for i, day in enumerate(days):
                o = start + (end - start) * i / n
                c = start + (end - start) * (i + 1) / n
                if symbol == "FFF" and w == 8 and i == n - 1:
                    continue
                bars.append(DailyBar(symbol, day, o, max(o, c) * 1.01, min(o, c) * 0.99, c, 1000 + 10 * i))
            price = end
    return bars


def fixture_news() -> list[NewsItem]:
    items = []
    for w, days in enumerate(fixture_days()):
        for k, symbol in enumerate(SYMBOLS):
            if (w + k) % 2 == 0:
                items.append(NewsItem(symbol, days[1], f"{symbol} week {w + 1} headline", f"detail {w + 1}"))
    return items


def fixture_fundamentals() -> list[FundamentalReport]:
    return [
        FundamentalReport(s, "2023Q3", date(2023, 11, 1), {"revenue": 100.0 + k, "eps": 1.0 + k / 10})
        for k, s in enumerate(SYMBOLS)
    ] + [
        FundamentalReport(s, "2023Q4", date(2024, 2, 5), {"revenue": 110.0 + k, "eps": 1.1 + k / 10})
        for k, s in enumerate(SYMBOLS)
    ]


@pytest.fixture
def market() -> MarketData:
    return MarketData(fixture_bars(), fixture_news(), fixture_fundamentals())


@pytest.fixture
def store(tmp_path: Path, market: MarketData) -> Path:
    return write_store(market, tmp_path / "data")


def make_config(data_dir: Path | None = None, **overrides) -> RunConfig:
    base = RunConfig(data_dir=data_dir, provider=ProviderSettings(kind="stub"), concurrency=3)
    return base.with_overrides(**overrides)
