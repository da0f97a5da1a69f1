"""Serialization of per-stock data windows into agent-readable text.

Every datum written for week ``t`` is dated strictly before the first trading
day of ``t``. Formatting is fixed (prices 2 decimals, indicators 4 decimals,
ISO dates) so identical inputs always give byte-identical text.
"""

from __future__ import annotations

from dataclasses import dataclass
from datetime import timedelta
from typing import Iterable, Sequence

from .indicators import INDICATOR_FIELDS, IndicatorParams, IndicatorRow, indicator_table
from .market_data import FundamentalReport, MarketData, NewsItem, TradingCalendar, week_slice

TECH_LOOKBACK_WEEKS = 4
NEWS_LOOKBACK_WEEKS = 1
MAX_FUND_QUARTERS = 4
MAX_SECTION_CHARS = 12_000

NO_NEWS = "NO NEWS THIS WEEK"
NO_FUNDAMENTALS = "NO FUNDAMENTALS AVAILABLE"
EMPTY_REPORT = "(empty report)"

OVERVIEW_SECTIONS = ("NEWS ANALYSIS", "TECHNICAL ANALYSIS", "FUNDAMENTAL ANALYSIS")

_LABELS = {
    "sma": "sma",
    "atr": "atr",
    "rsi": "rsi",
    "macd_line": "macd",
    "macd_signal": "macd_signal",
    "macd_hist": "macd_hist",
    "boll_upper": "boll_upper",
    "boll_mid": "boll_mid",
    "boll_lower": "boll_lower",
}


@dataclass(frozen=True)
class StockWeekContext:
    symbol: str
    week: int
    tech_text: str
    news_text: str
    fund_text: str


@dataclass(frozen=True)
class DataOverview:
    symbol: str
    week: int
    text: str


def truncate_oldest(parts: Sequence[str], max_chars: int, sep: str = "\n") -> str:
    """Join ``parts`` (oldest first), dropping the oldest until the text fits."""
    parts = list(parts)
    while len(parts) > 1 and len(sep.join(parts)) > max_chars:
        parts.pop(0)
    text = sep.join(parts)
    return text[-max_chars:] if len(text) > max_chars else text


def format_tech_line(row: IndicatorRow) -> str:
    fields = [row.date.isoformat(), f"close={row.close:.2f}"]
    for name in INDICATOR_FIELDS:
        value = getattr(row, name)
        if value is not None:
            fields.append(f"{_LABELS[name]}={value:.4f}")
    return " ".join(fields)


def build_tech_input(
    symbol: str,
    t: int,
    calendar: TradingCalendar,
    table: Iterable[IndicatorRow],
    lookback: int = TECH_LOOKBACK_WEEKS,
    max_chars: int = MAX_SECTION_CHARS,
) -> str:
    """One line per trading day of weeks ``t-lookback .. t-1`` on which the
    stock has a bar: date, close, then every indicator past its warm-up."""
    weeks = week_slice(calendar, t, lookback)
    by_date = {row.date: row for row in table}
    lines = [
        format_tech_line(by_date[day])
        for week in weeks
        for day in week.trading_days
        if day in by_date
    ]
    return truncate_oldest(lines, max_chars)


def build_news_input(
    symbol: str,
    t: int,
    calendar: TradingCalendar,
    news: Iterable[NewsItem],
    lookback: int = NEWS_LOOKBACK_WEEKS,
    max_chars: int = MAX_SECTION_CHARS,
) -> str:
    """News about ``symbol`` published during the Mon-Sun span(s) of the
    preceding trading week(s)."""
    weeks = week_slice(calendar, t, lookback)
    start = weeks[0].first_day - timedelta(days=weeks[0].first_day.weekday())
    end = weeks[-1].first_day + timedelta(days=6 - weeks[-1].first_day.weekday())
    cutoff = calendar.week(t).first_day
    items = sorted(
        (n for n in news if n.symbol == symbol and start <= n.date <= end and n.date < cutoff),
        key=lambda n: n.date,
    )
    if not items:
        return NO_NEWS
    lines = []
    for n in items:
        line = f"[{n.date.isoformat()}] {n.title}"
        if n.summary:
            line += f" | {n.summary}"
        lines.append(line)
    return truncate_oldest(lines, max_chars)


def _format_fund_block(report: FundamentalReport) -> str:
    lines = [f"Fiscal quarter {report.fiscal_quarter} (released {report.release_date.isoformat()})"]
    lines += [f"  {key}: {value:.4f}" for key, value in sorted(report.statements.items())]
    return "\n".join(lines)


def released_quarters(
    symbol: str, t: int, calendar: TradingCalendar, fundamentals: Iterable[FundamentalReport],
    max_quarters: int = MAX_FUND_QUARTERS,
) -> list[FundamentalReport]:
    cutoff = calendar.week(t).first_day
    released = sorted(
        (r for r in fundamentals if r.symbol == symbol and r.release_date < cutoff),
        key=lambda r: r.fiscal_quarter,
    )
    return released[-max_quarters:]


def build_fund_input(
    symbol: str,
    t: int,
    calendar: TradingCalendar,
    fundamentals: Iterable[FundamentalReport],
    max_quarters: int = MAX_FUND_QUARTERS,
    max_chars: int = MAX_SECTION_CHARS,
) -> str:
    """Statements of the latest ``max_quarters`` quarters released before week
    ``t`` opens, oldest first."""
    quarters = released_quarters(symbol, t, calendar, fundamentals, max_quarters)
    if not quarters:
        return NO_FUNDAMENTALS
    return truncate_oldest([_format_fund_block(r) for r in quarters], max_chars, sep="\n\n")


def build_context(
    symbol: str,
    t: int,
    calendar: TradingCalendar,
    data: MarketData,
    params: IndicatorParams = IndicatorParams(),
    tech_lookback: int = TECH_LOOKBACK_WEEKS,
    news_lookback: int = NEWS_LOOKBACK_WEEKS,
    max_chars: int = MAX_SECTION_CHARS,
) -> StockWeekContext:
    """All three text inputs for one stock-week.

    Indicators are computed from bars strictly before week ``t`` so nothing
    from the holding week can leak into the text.
    """
    cutoff = calendar.week(t).first_day - timedelta(days=1)
    table = indicator_table(data.bars_for(symbol, end=cutoff), params)
    return StockWeekContext(
        symbol=symbol,
        week=t,
        tech_text=build_tech_input(symbol, t, calendar, table, tech_lookback, max_chars),
        news_text=build_news_input(symbol, t, calendar, data.news_for(symbol), news_lookback, max_chars),
        fund_text=build_fund_input(symbol, t, calendar, data.fundamentals_for(symbol), max_chars=max_chars),
    )


def build_overview(alpha_news: str, alpha_tech: str, alpha_fund: str, symbol: str = "", week: int = 0) -> DataOverview:
    """Concatenate the three analysis reports under fixed headers, news first."""
    sections = []
    for header, body in zip(OVERVIEW_SECTIONS, (alpha_news, alpha_tech, alpha_fund)):
        body = body.strip() if body else ""
        sections.append(f"## {header}\n{body or EMPTY_REPORT}")
    return DataOverview(symbol, week, "\n\n".join(sections))
