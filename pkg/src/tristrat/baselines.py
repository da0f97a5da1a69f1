"""Reference strategies: the 1/N benchmark and top-5 technical factor rules."""

from __future__ import annotations

from typing import Iterable, Mapping

from .indicators import IndicatorRow

FACTOR_KINDS = ("sma", "macd", "boll")
BASELINES = ("1n",) + FACTOR_KINDS


def equal_weight(universe: Iterable[str]) -> dict[str, float]:
    """Every tradable stock at ``1/N``. Not subject to the position cap."""
    symbols = sorted(set(universe))
    if not symbols:
        raise ValueError("equal-weight benchmark needs at least one tradable stock")
    w = 1.0 / len(symbols)
    return {s: w for s in symbols}


def factor_score(kind: str, row: IndicatorRow | None) -> float | None:
    """Cross-sectionally comparable factor value from one indicator row.

    * ``sma``: close / SMA - 1
    * ``macd``: MACD histogram
    * ``boll``: %B = (close - lower) / (upper - lower)

    Returns ``None`` when the needed indicators are still warming up.
    """
    kind = kind.lower()
    if kind not in FACTOR_KINDS:
        raise ValueError(f"unknown factor kind {kind!r}")
    if row is None:
        return None
    if kind == "sma":
        return None if row.sma is None else row.close / row.sma - 1.0
    if kind == "macd":
        return row.macd_hist
    if row.boll_upper is None or row.boll_lower is None:
        return None
    width = row.boll_upper - row.boll_lower
    if width == 0:
        return None
    return (row.close - row.boll_lower) / width


def top5_portfolio(scores: Mapping[str, float | None], n: int = 5, weight: float = 0.2) -> dict[str, float]:
    """Highest-scoring ``n`` stocks at ``weight`` each; ties go to the smaller ticker."""
    eligible = [(s, v) for s, v in scores.items() if v is not None]
    ranked = sorted(eligible, key=lambda sv: (-sv[1], sv[0]))
    return {s: weight for s, _ in sorted(ranked[:n])}
