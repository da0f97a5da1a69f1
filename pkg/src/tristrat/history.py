"""Bounded trajectory of past strategies and their realized outcomes."""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass
from typing import Iterable

from .errors import ValidationError

DEFAULT_CAPACITY = 10
EMPTY_HISTORY = "NO PRIOR STRATEGIES"


@dataclass(frozen=True)
class StrategyRecord:
    week: int
    strategy_text: str
    universe_avg_return: float
    portfolio_return: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.universe_avg_return) and math.isfinite(self.portfolio_return)):
            raise ValidationError(f"week {self.week}: strategy record returns must be finite")

    def to_dict(self) -> dict:
        return {
            "week": self.week,
            "strategy": self.strategy_text,
            "universe_avg_return": self.universe_avg_return,
            "portfolio_return": self.portfolio_return,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "StrategyRecord":
        return cls(d["week"], d["strategy"], d["universe_avg_return"], d["portfolio_return"])


def _pct(x: float) -> str:
    return f"{x * 100:+.2f}%"


class StrategyHistory:
    """FIFO window holding at most ``capacity`` records in ascending week order."""

    def __init__(self, capacity: int = DEFAULT_CAPACITY, records: Iterable[StrategyRecord] = ()):
        if capacity < 1:
            raise ValueError("history capacity must be >= 1")
        self.capacity = capacity
        self._records: deque[StrategyRecord] = deque(maxlen=capacity)
        for rec in records:
            self.append(rec)

    def append(self, record: StrategyRecord) -> "StrategyHistory":
        if self._records and record.week <= self._records[-1].week:
            raise ValidationError(
                f"history week {record.week} does not follow week {self._records[-1].week}"
            )
        self._records.append(record)
        return self

    @property
    def records(self) -> tuple[StrategyRecord, ...]:
        return tuple(self._records)

    def snapshot(self) -> "StrategyHistory":
        return StrategyHistory(self.capacity, self._records)

    def __len__(self) -> int:
        return len(self._records)

    def render(self) -> str:
        if not self._records:
            return EMPTY_HISTORY
        blocks = []
        for rec in self._records:
            blocks.append(
                f"### Week {rec.week}\n"
                f"Strategy: {rec.strategy_text}\n"
                f"Universe average return: {_pct(rec.universe_avg_return)}\n"
                f"Portfolio return: {_pct(rec.portfolio_return)}"
            )
        return "\n\n".join(blocks)
