"""Technical indicators computed causally on a synthetic price path."""

from __future__ import annotations

from tristrat.indicators import indicator_table
from tristrat.synthetic import generate_market

data = generate_market(["AAA"], weeks=10, seed=11)
bars = data.bars_for("AAA")
table = indicator_table(bars)

print(f"{len(bars)} daily bars; last five indicator rows:\n")
for row in table[-5:]:
    print(row.date, f"close={row.close:.2f}", f"sma={row.sma:.3f}", f"rsi={row.rsi:.1f}",
          f"macd_hist={row.macd_hist:+.4f}", f"boll=[{row.boll_lower:.2f}, {row.boll_upper:.2f}]")

# truncating the history never changes a row that was already computed
cut = 30
assert indicator_table(bars[: cut + 1])[-1] == table[cut]
print(f"\nrow {cut} is identical when computed from bars[:{cut + 1}]")
