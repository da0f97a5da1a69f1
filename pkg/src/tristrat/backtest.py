"""Weekly trading protocol: buy at the open of the week's first trading day,
liquidate at the close of its last trading day."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping

from .errors import ValidationError
from .market_data import MarketData, TradingWeek
from .portfolio import Portfolio


class MissingBarError(ValidationError):
    """A stock lacks a bar on one of the week's boundary days."""


@dataclass(frozen=True)
class ExecutionPrices:
    symbol: str
    week: int
    buy: float
    sell: float

    def __post_init__(self) -> None:
        if not (self.buy > 0 and self.sell > 0):
            raise ValidationError(f"{self.symbol} week {self.week}: execution prices must be positive")


@dataclass(frozen=True)
class ReturnVector:
    week: int
    returns: Mapping[str, float] = field(default_factory=dict)


@dataclass(frozen=True)
class WeeklyResult:
    week: int
    portfolio: Portfolio
    portfolio_return: float
    universe_avg_return: float
    cash_fraction: float


def execution_prices(symbol: str, week: TradingWeek, data: MarketData) -> ExecutionPrices:
    first = data.bar(symbol, week.first_day)
    last = data.bar(symbol, week.last_day)
    if first is None or last is None:
        missing = week.first_day if first is None else week.last_day
        raise MissingBarError(f"{symbol} has no bar on {missing} (week {week.index} boundary)")
    return ExecutionPrices(symbol, week.index, buy=first.open, sell=last.close)


def stock_return(prices: ExecutionPrices) -> float:
    return (prices.sell - prices.buy) / prices.buy


def portfolio_return(portfolio: Portfolio | Mapping[str, float], returns: ReturnVector | Mapping[str, float]) -> float:
    """Dot product of weights and returns; cash earns nothing."""
    weights = portfolio.weights if isinstance(portfolio, Portfolio) else portfolio
    r = returns.returns if isinstance(returns, ReturnVector) else returns
    missing = sorted(s for s, w in weights.items() if w != 0 and s not in r)
    if missing:
        raise ValidationError(f"no return for weighted stock(s) {', '.join(missing)}")
    return math.fsum(w * r[s] for s, w in weights.items() if w != 0)


def week_returns(week: TradingWeek, data: MarketData, universe: Iterable[str] | None = None) -> ReturnVector:
    """Returns of every tradable stock; only bars inside ``week`` are read."""
    tradable = data.tradable(week, universe)
    return ReturnVector(week.index, {s: stock_return(execution_prices(s, week, data)) for s in tradable})


def run_settlement(
    week: TradingWeek,
    portfolio: Portfolio,
    data: MarketData,
    universe: Iterable[str] | None = None,
    cost_rate: float = 0.0,
) -> tuple[WeeklyResult, ReturnVector]:
    """Settle one holding week.

    ``cost_rate`` is charged on invested capital at both entry and exit.
    """
    returns = week_returns(week, data, universe)
    gross = portfolio_return(portfolio, returns)
    net = gross - 2.0 * cost_rate * portfolio.invested
    values = list(returns.returns.values())
    avg = math.fsum(values) / len(values) if values else 0.0
    result = WeeklyResult(week.index, portfolio, net, avg, portfolio.cash_fraction)
    return result, returns


class EquityCurve:
    """Wealth levels ``W_t = W_{t-1} * (1 + R_t)`` from ``W_0 = 1``."""

    def __init__(self, returns: Iterable[float] = ()):
        self.returns: list[float] = []
        self.levels: list[float] = []
        for r in returns:
            self.append(r)

    def append(self, r: float) -> float:
        prev = self.levels[-1] if self.levels else 1.0
        level = prev * (1.0 + r)
        self.returns.append(r)
        self.levels.append(level)
        return level

    @property
    def wealth(self) -> float:
        return self.levels[-1] if self.levels else 1.0

    def __len__(self) -> int:
        return len(self.levels)
