"""Portfolio weights and the hard constraints every agent output must meet."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping

from .errors import ValidationError

MAX_POSITIONS = 5
SUM_TOLERANCE = 1e-9


@dataclass(frozen=True)
class Portfolio:
    """Long-only weights for one holding week; the unallocated remainder is cash.

    Zero weights are dropped on construction so ``weights`` lists only held
    positions, keyed in ticker order.
    """

    week: int
    weights: Mapping[str, float] = field(default_factory=dict)

    def __post_init__(self) -> None:
        clean = {}
        for symbol, w in sorted(self.weights.items()):
            if isinstance(w, bool) or not isinstance(w, (int, float)) or not math.isfinite(w):
                raise ValidationError(f"weight for {symbol} is not a finite number: {w!r}")
            if w < 0 or w > 1:
                raise ValidationError(f"weight for {symbol} outside [0, 1]: {w}")
            if w > 0:
                clean[symbol] = float(w)
        if sum(clean.values()) > 1 + SUM_TOLERANCE:
            raise ValidationError(f"weights sum to {sum(clean.values())} > 1")
        object.__setattr__(self, "weights", clean)

    @classmethod
    def cash(cls, week: int) -> "Portfolio":
        return cls(week, {})

    @property
    def invested(self) -> float:
        return math.fsum(self.weights.values())

    @property
    def cash_fraction(self) -> float:
        return 1.0 - self.invested

    @property
    def positions(self) -> int:
        return len(self.weights)


def constraint_violations(
    weights: Mapping[str, float], tradable: Iterable[str], max_positions: int = MAX_POSITIONS
) -> list[str]:
    """Describe every way a raw weight map breaks the portfolio constraints."""
    tradable = set(tradable)
    problems = []
    unknown = sorted(set(weights) - tradable)
    if unknown:
        problems.append(f"unknown tickers not in the candidate list: {', '.join(unknown)}")
    negative = sorted(s for s, w in weights.items() if w < 0)
    if negative:
        problems.append(f"negative weights for {', '.join(negative)}")
    above = sorted(s for s, w in weights.items() if w > 1)
    if above:
        problems.append(f"weights above 1 for {', '.join(above)}")
    held = sum(1 for w in weights.values() if w > 0)
    if held > max_positions:
        problems.append(f"{held} nonzero positions exceed the maximum of {max_positions}")
    total = math.fsum(w for w in weights.values() if w > 0)
    if total > 1 + SUM_TOLERANCE:
        problems.append(f"weights sum to {total:.4f}, above 1")
    return problems


def repair_weights(weights: Mapping[str, float], max_positions: int = MAX_POSITIONS) -> dict[str, float]:
    """Deterministic repair: drop non-positive weights, keep the largest
    ``max_positions`` (ties by ticker), and rescale to sum 1 if over-allocated."""
    positive = sorted(((s, w) for s, w in weights.items() if w > 0), key=lambda sw: (-sw[1], sw[0]))
    kept = dict(positive[:max_positions])
    total = math.fsum(kept.values())
    if total > 1:
        kept = {s: w / total for s, w in kept.items()}
    return dict(sorted(kept.items()))
