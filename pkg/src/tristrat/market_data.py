"""Ingestion of daily bars, news and quarterly fundamentals, plus the weekly
trading calendar that drives rebalancing.

Canonical formats:

* bars: CSV with header ``symbol,date,open,high,low,close,volume``
  (JSON-lines with the same keys is also accepted)
* news: JSON-lines with ``symbol,date,title,summary``
* fundamentals: JSON-lines with ``symbol,fiscal_quarter,release_date,statements``
"""

from __future__ import annotations

import csv
import io
import json
import math
import re
from collections import defaultdict
from dataclasses import dataclass, field
from datetime import date, timedelta
from pathlib import Path
from typing import Iterable, Iterator, Mapping

from .errors import ParseError, ValidationError, WarmupError

BAR_FIELDS = ("symbol", "date", "open", "high", "low", "close", "volume")
NEWS_FIELDS = ("symbol", "date", "title", "summary")
FUND_FIELDS = ("symbol", "fiscal_quarter", "release_date", "statements")

_SYMBOL_RE = re.compile(r"^[A-Z][A-Z0-9.\-]{0,5}$")
_QUARTER_RE = re.compile(r"^(\d{4})Q([1-4])$")


def validate_symbol(symbol: str) -> str:
    if not isinstance(symbol, str) or not _SYMBOL_RE.match(symbol):
        raise ValidationError(f"invalid ticker symbol {symbol!r}")
    return symbol


@dataclass(frozen=True, order=True)
class DailyBar:
    symbol: str
    date: date
    open: float
    high: float
    low: float
    close: float
    volume: int

    def __post_init__(self) -> None:
        validate_symbol(self.symbol)
        for name in ("open", "high", "low", "close"):
            value = getattr(self, name)
            if not math.isfinite(value) or value <= 0:
                raise ValidationError(f"{self.symbol} {self.date}: {name}={value} must be a positive price")
        if self.volume < 0:
            raise ValidationError(f"{self.symbol} {self.date}: negative volume {self.volume}")
        if not (self.low <= self.open <= self.high and self.low <= self.close <= self.high):
            raise ValidationError(
                f"{self.symbol} {self.date}: OHLC inversion "
                f"(open={self.open}, high={self.high}, low={self.low}, close={self.close})"
            )


@dataclass(frozen=True, order=True)
class NewsItem:
    symbol: str
    date: date
    title: str
    summary: str = ""

    def __post_init__(self) -> None:
        validate_symbol(self.symbol)
        if not self.title or not self.title.strip():
            raise ValidationError(f"{self.symbol} {self.date}: news title is empty")


def quarter_end(label: str) -> date:
    """Last calendar day of a fiscal quarter label such as ``2023Q4``."""
    m = _QUARTER_RE.match(label)
    if not m:
        raise ValidationError(f"invalid fiscal quarter label {label!r}")
    year, q = int(m.group(1)), int(m.group(2))
    if q == 4:
        return date(year, 12, 31)
    return date(year, 3 * q + 1, 1) - timedelta(days=1)


@dataclass(frozen=True)
class FundamentalReport:
    symbol: str
    fiscal_quarter: str
    release_date: date
    statements: Mapping[str, float] = field(default_factory=dict)

    def __post_init__(self) -> None:
        validate_symbol(self.symbol)
        end = quarter_end(self.fiscal_quarter)
        if self.release_date <= end:
            raise ValidationError(
                f"{self.symbol} {self.fiscal_quarter}: release {self.release_date} "
                f"is not after quarter end {end}"
            )

    @property
    def sort_key(self) -> tuple[str, date, str]:
        return (self.symbol, self.release_date, self.fiscal_quarter)


# --------------------------------------------------------------------------
# Loading
# --------------------------------------------------------------------------


def _text_lines(source) -> Iterator[str]:
    if isinstance(source, (str, Path)):
        with open(source, encoding="utf-8", newline="") as fh:
            yield from fh.read().splitlines()
        return
    data = source.read()
    if isinstance(data, bytes):
        data = data.decode("utf-8")
    yield from data.splitlines()


def _parse_date(raw, line: int) -> date:
    try:
        return date.fromisoformat(str(raw).strip())
    except ValueError:
        raise ParseError(f"bad date {raw!r} (expected YYYY-MM-DD)", line) from None


def _parse_price(raw, name: str, line: int) -> float:
    if isinstance(raw, bool):
        raise ParseError(f"{name} is not a number: {raw!r}", line)
    try:
        value = float(raw)
    except (TypeError, ValueError):
        raise ParseError(f"{name} is not a number: {raw!r}", line) from None
    if not math.isfinite(value):
        raise ParseError(f"{name} is not finite: {raw!r}", line)
    return value


def _parse_volume(raw, line: int) -> int:
    if isinstance(raw, bool):
        raise ParseError(f"volume is not an integer: {raw!r}", line)
    if isinstance(raw, int):
        return raw
    try:
        return int(str(raw).strip())
    except ValueError:
        pass
    value = _parse_price(raw, "volume", line)
    if value != int(value):
        raise ParseError(f"volume is not an integer: {raw!r}", line)
    return int(value)


def _bar_from_record(rec: Mapping, line: int) -> DailyBar:
    missing = [k for k in BAR_FIELDS if rec.get(k) in (None, "")]
    if missing:
        raise ParseError(f"missing field(s) {', '.join(missing)}", line)
    symbol = str(rec["symbol"]).strip()
    try:
        return DailyBar(
            symbol=symbol,
            date=_parse_date(rec["date"], line),
            open=_parse_price(rec["open"], "open", line),
            high=_parse_price(rec["high"], "high", line),
            low=_parse_price(rec["low"], "low", line),
            close=_parse_price(rec["close"], "close", line),
            volume=_parse_volume(rec["volume"], line),
        )
    except ValidationError as exc:
        raise ValidationError(f"line {line}: {exc}") from None


def _reject_duplicates(items: Iterable, key, what: str) -> None:
    seen = set()
    for item in items:
        k = key(item)
        if k in seen:
            raise ValidationError(f"duplicate {what} {k}")
        seen.add(k)


def _jsonl_records(source) -> Iterator[tuple[int, dict]]:
    for lineno, raw in enumerate(_text_lines(source), start=1):
        if not raw.strip():
            continue
        try:
            rec = json.loads(raw)
        except json.JSONDecodeError as exc:
            raise ParseError(f"invalid JSON ({exc.msg})", lineno) from None
        if not isinstance(rec, dict):
            raise ParseError("expected a JSON object", lineno)
        yield lineno, rec


def load_daily_bars(source, schema: str = "csv") -> list[DailyBar]:
    """Parse daily bars from a CSV (default) or JSON-lines source.

    Returns bars sorted by (symbol, date). Raises :class:`ParseError` with the
    offending line number for malformed rows and :class:`ValidationError` for
    OHLC inversions or duplicate (symbol, date) pairs.
    """
    bars: list[DailyBar] = []
    if schema == "csv":
        lines = list(_text_lines(source))
        if not lines:
            return []
        reader = csv.reader(lines)
        header = [h.strip() for h in next(reader)]
        if tuple(header) != BAR_FIELDS:
            raise ParseError(f"unexpected header {','.join(header)!r}; expected {','.join(BAR_FIELDS)!r}", 1)
        for row in reader:
            lineno = reader.line_num
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(BAR_FIELDS):
                raise ParseError(f"expected {len(BAR_FIELDS)} columns, got {len(row)}", lineno)
            bars.append(_bar_from_record(dict(zip(BAR_FIELDS, row)), lineno))
    elif schema == "json":
        text = "\n".join(_text_lines(source))
        try:
            records = json.loads(text) if text.strip() else []
        except json.JSONDecodeError as exc:
            raise ParseError(f"invalid JSON ({exc.msg})", exc.lineno) from None
        if not isinstance(records, list) or not all(isinstance(r, dict) for r in records):
            raise ParseError("expected a JSON array of bar objects", 1)
        # line numbers are not meaningful inside one document; report record positions
        for n, rec in enumerate(records, start=1):
            bars.append(_bar_from_record(rec, n))
    elif schema == "jsonl":
        for lineno, rec in _jsonl_records(source):
            bars.append(_bar_from_record(rec, lineno))
    else:
        raise ValueError(f"unknown bar schema {schema!r}")
    bars.sort(key=lambda b: (b.symbol, b.date))
    _reject_duplicates(bars, lambda b: (b.symbol, b.date.isoformat()), "bar")
    return bars


def load_news(source) -> list[NewsItem]:
    items = []
    for lineno, rec in _jsonl_records(source):
        for k in ("symbol", "date", "title"):
            if not rec.get(k):
                raise ParseError(f"missing field {k}", lineno)
        summary = rec.get("summary") or ""
        if not isinstance(rec["title"], str) or not isinstance(summary, str):
            raise ParseError("title and summary must be strings", lineno)
        try:
            items.append(NewsItem(str(rec["symbol"]).strip(), _parse_date(rec["date"], lineno), rec["title"], summary))
        except ValidationError as exc:
            raise ValidationError(f"line {lineno}: {exc}") from None
    # stable sort keeps same-day items in file order
    items.sort(key=lambda n: (n.symbol, n.date))
    return items


def load_fundamentals(source) -> list[FundamentalReport]:
    reports = []
    for lineno, rec in _jsonl_records(source):
        for k in FUND_FIELDS:
            if rec.get(k) in (None, ""):
                raise ParseError(f"missing field {k}", lineno)
        statements = rec["statements"]
        if not isinstance(statements, dict):
            raise ParseError("statements must be a flat object", lineno)
        clean = {}
        for key, value in statements.items():
            if isinstance(value, bool) or not isinstance(value, (int, float)):
                raise ParseError(f"statement {key!r} is not numeric", lineno)
            clean[str(key)] = float(value)
        try:
            reports.append(
                FundamentalReport(
                    symbol=str(rec["symbol"]).strip(),
                    fiscal_quarter=str(rec["fiscal_quarter"]).strip(),
                    release_date=_parse_date(rec["release_date"], lineno),
                    statements=dict(sorted(clean.items())),
                )
            )
        except ValidationError as exc:
            raise ValidationError(f"line {lineno}: {exc}") from None
    reports.sort(key=lambda r: r.sort_key)
    _reject_duplicates(reports, lambda r: (r.symbol, r.fiscal_quarter), "fundamental report")
    return reports


# --------------------------------------------------------------------------
# Canonical serialization
# --------------------------------------------------------------------------


def _num(x: float) -> str:
    return repr(float(x))


def dump_daily_bars(bars: Iterable[DailyBar]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(BAR_FIELDS)
    for b in sorted(bars, key=lambda b: (b.symbol, b.date)):
        writer.writerow([b.symbol, b.date.isoformat(), _num(b.open), _num(b.high), _num(b.low), _num(b.close), b.volume])
    return buf.getvalue()


def dump_news(items: Iterable[NewsItem]) -> str:
    lines = [
        json.dumps({"symbol": n.symbol, "date": n.date.isoformat(), "title": n.title, "summary": n.summary}, ensure_ascii=False)
        for n in sorted(items, key=lambda n: (n.symbol, n.date))
    ]
    return "".join(line + "\n" for line in lines)


def dump_fundamentals(reports: Iterable[FundamentalReport]) -> str:
    lines = [
        json.dumps(
            {
                "symbol": r.symbol,
                "fiscal_quarter": r.fiscal_quarter,
                "release_date": r.release_date.isoformat(),
                "statements": dict(sorted(r.statements.items())),
            },
            ensure_ascii=False,
        )
        for r in sorted(reports, key=lambda r: r.sort_key)
    ]
    return "".join(line + "\n" for line in lines)


# --------------------------------------------------------------------------
# Trading calendar
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class TradingWeek:
    index: int
    trading_days: tuple[date, ...]

    def __post_init__(self) -> None:
        if self.index < 1:
            raise ValidationError(f"week index must be >= 1, got {self.index}")
        if not self.trading_days:
            raise ValidationError("a trading week needs at least one day")
        days = self.trading_days
        if any(a >= b for a, b in zip(days, days[1:])):
            raise ValidationError("trading days must be strictly ascending")
        if len({d.isocalendar()[:2] for d in days}) != 1:
            raise ValidationError("trading days span more than one ISO week")

    @property
    def first_day(self) -> date:
        return self.trading_days[0]

    @property
    def last_day(self) -> date:
        return self.trading_days[-1]

    @property
    def iso_week(self) -> tuple[int, int]:
        iso = self.first_day.isocalendar()
        return (iso[0], iso[1])

    def __contains__(self, day: date) -> bool:
        return day in self.trading_days


@dataclass(frozen=True)
class TradingCalendar:
    weeks: tuple[TradingWeek, ...]

    def __post_init__(self) -> None:
        for expected, week in enumerate(self.weeks, start=1):
            if week.index != expected:
                raise ValidationError(f"week indices not contiguous at {week.index}")
        for prev, cur in zip(self.weeks, self.weeks[1:]):
            if cur.first_day <= prev.last_day:
                raise ValidationError(f"weeks {prev.index} and {cur.index} overlap")

    def __len__(self) -> int:
        return len(self.weeks)

    def __iter__(self) -> Iterator[TradingWeek]:
        return iter(self.weeks)

    def week(self, t: int) -> TradingWeek:
        if not 1 <= t <= len(self.weeks):
            raise KeyError(f"week {t} outside calendar 1..{len(self.weeks)}")
        return self.weeks[t - 1]

    def week_of(self, day: date) -> TradingWeek | None:
        key = tuple(day.isocalendar()[:2])
        for week in self.weeks:
            if week.iso_week == key:
                return week
        return None

    def index_of_iso_week(self, day: date) -> int | None:
        week = self.week_of(day)
        return None if week is None else week.index


def build_trading_calendar(
    bars: Iterable[DailyBar], start: date | None = None, end: date | None = None
) -> TradingCalendar:
    """Group every date that carries at least one bar into ISO Mon-Sun weeks.

    Weeks are numbered from 1 in chronological order. ISO weeks without any
    bar are skipped and do not consume an index.
    """
    days = {b.date for b in bars}
    if start is not None:
        days = {d for d in days if d >= start}
    if end is not None:
        days = {d for d in days if d <= end}
    if not days:
        raise ValidationError("cannot build a trading calendar from an empty bar set")
    grouped: dict[tuple[int, int], list[date]] = defaultdict(list)
    for d in sorted(days):
        grouped[tuple(d.isocalendar()[:2])].append(d)
    weeks = tuple(
        TradingWeek(index=i, trading_days=tuple(grouped[key]))
        for i, key in enumerate(sorted(grouped), start=1)
    )
    return TradingCalendar(weeks)


def week_slice(calendar: TradingCalendar, t: int, lookback: int) -> list[TradingWeek]:
    """Weeks ``t - lookback`` .. ``t - 1`` in chronological order."""
    if lookback < 1:
        raise ValueError("lookback must be >= 1")
    if t > len(calendar):
        raise KeyError(f"week {t} outside calendar 1..{len(calendar)}")
    if t - lookback < 1:
        raise WarmupError(
            f"week {t} needs {lookback} prior trading weeks; first valid week is {lookback + 1}",
            first_valid_week=lookback + 1,
        )
    return [calendar.week(i) for i in range(t - lookback, t)]


# --------------------------------------------------------------------------
# Market data container
# --------------------------------------------------------------------------


class MarketData:
    """Read-only bundle of bars, news and fundamentals with lookup indices."""

    def __init__(
        self,
        bars: Iterable[DailyBar],
        news: Iterable[NewsItem] = (),
        fundamentals: Iterable[FundamentalReport] = (),
    ):
        self.bars = tuple(sorted(bars, key=lambda b: (b.symbol, b.date)))
        self.news = tuple(sorted(news, key=lambda n: (n.symbol, n.date)))
        self.fundamentals = tuple(sorted(fundamentals, key=lambda r: r.sort_key))
        self._bar_at: dict[tuple[str, date], DailyBar] = {(b.symbol, b.date): b for b in self.bars}
        by_symbol: dict[str, list[DailyBar]] = defaultdict(list)
        for b in self.bars:
            by_symbol[b.symbol].append(b)
        self._by_symbol = {k: tuple(v) for k, v in by_symbol.items()}

    @classmethod
    def from_dir(cls, path: str | Path) -> "MarketData":
        """Load a canonical store written by the ingest command."""
        path = Path(path)
        bars = load_daily_bars(path / "bars.csv")
        news = load_news(path / "news.jsonl") if (path / "news.jsonl").exists() else []
        fund = load_fundamentals(path / "fundamentals.jsonl") if (path / "fundamentals.jsonl").exists() else []
        return cls(bars, news, fund)

    @property
    def symbols(self) -> tuple[str, ...]:
        return tuple(sorted(self._by_symbol))

    def bar(self, symbol: str, day: date) -> DailyBar | None:
        return self._bar_at.get((symbol, day))

    def bars_for(self, symbol: str, end: date | None = None) -> tuple[DailyBar, ...]:
        """All bars of ``symbol`` dated on or before ``end``."""
        series = self._by_symbol.get(symbol, ())
        if end is None:
            return series
        return tuple(b for b in series if b.date <= end)

    def news_for(self, symbol: str) -> tuple[NewsItem, ...]:
        return tuple(n for n in self.news if n.symbol == symbol)

    def fundamentals_for(self, symbol: str) -> tuple[FundamentalReport, ...]:
        return tuple(r for r in self.fundamentals if r.symbol == symbol)

    def tradable(self, week: TradingWeek, universe: Iterable[str] | None = None) -> list[str]:
        """Symbols with a bar on both the first and last trading day of ``week``."""
        candidates = self.symbols if universe is None else sorted(set(universe))
        return [
            s for s in candidates
            if (s, week.first_day) in self._bar_at and (s, week.last_day) in self._bar_at
        ]
