from __future__ import annotations

import pytest
from hypothesis import given
from hypothesis import strategies as st

from tristrat.errors import ValidationError
from tristrat.history import EMPTY_HISTORY, StrategyHistory, StrategyRecord


def rec(week, text=None, avg=0.01, ret=0.02):
    return StrategyRecord(week, text or f"strategy {week}", avg, ret)


def test_empty_history_renders_placeholder():
    assert StrategyHistory().render() == EMPTY_HISTORY


def test_render_block_format():
    h = StrategyHistory(records=[rec(3, "buy quality", 0.0123, -0.045)])
    assert h.render() == (
        "### Week 3\nStrategy: buy quality\nUniverse average return: +1.23%\nPortfolio return: -4.50%"
    )


def test_fifo_keeps_last_k():
    h = StrategyHistory(capacity=10)
    for w in range(1, 16):
        h.append(rec(w))
    assert len(h) == 10
    assert [r.week for r in h.records] == list(range(6, 16))
    assert h.render().count("### Week") == 10


def test_weeks_must_increase():
    h = StrategyHistory(records=[rec(5)])
    with pytest.raises(ValidationError):
        h.append(rec(5))
    with pytest.raises(ValueError):
        StrategyHistory(capacity=0)


def test_non_finite_returns_rejected():
    with pytest.raises(ValidationError):
        StrategyRecord(1, "x", float("nan"), 0.0)


def test_snapshot_is_independent():
    h = StrategyHistory(records=[rec(1)])
    snap = h.snapshot()
    h.append(rec(2))
    assert len(snap) == 1 and len(h) == 2


def test_dict_round_trip():
    r = rec(7, "text", 0.5, -0.25)
    assert StrategyRecord.from_dict(r.to_dict()) == r


@given(st.integers(1, 12), st.integers(0, 40))
def test_size_is_min_of_count_and_capacity(k, n):
    h = StrategyHistory(capacity=k)
    for w in range(1, n + 1):
        h.append(rec(w))
    assert len(h) == min(k, n)
    if n:
        assert h.records[-1].week == n
