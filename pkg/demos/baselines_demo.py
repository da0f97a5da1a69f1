"""Compare the equal-weight and indicator-factor baselines on synthetic data."""

from __future__ import annotations

from tristrat import Backtester, RunConfig
from tristrat.synthetic import generate_market

data = generate_market(weeks=20, seed=5)

print(f"{'mode':<5} {'weeks':>5} {'AR':>9} {'SR':>8} {'MDD':>9}")
for mode in ("1n", "sma", "macd", "boll"):
    result = Backtester(RunConfig(mode=mode), data).run()
    m = result.metrics
    sr = "n/a" if m.sharpe is None else f"{m.sharpe:.3f}"
    print(f"{mode:<5} {m.weeks:>5} {m.accumulated_return:>+9.2%} {sr:>8} {m.max_drawdown:>9.2%}")
