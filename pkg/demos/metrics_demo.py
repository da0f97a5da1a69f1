"""Performance metrics for a short weekly return series."""

from __future__ import annotations

from tristrat.metrics import compute_metrics, wealth_curve

returns = [0.021, -0.034, 0.012, 0.045, -0.051, 0.008, 0.030, -0.004]

print("week  R_t      W_t")
for week, (r, w) in enumerate(zip(returns, wealth_curve(returns)), start=1):
    print(f"{week:>4}  {r:+.3f}   {w:.4f}")

report = compute_metrics(returns)
print(f"\nAR  {report.accumulated_return:+.4%}")
print(f"SR  {report.sharpe:.4f}  (weekly, sample std, not annualized)")
print(f"MDD {report.max_drawdown:.4%}")
print(f"CR  {report.calmar:.4f}")

# a flat series has no dispersion, so the ratio is reported as undefined
flat = compute_metrics([0.0, 0.0, 0.0])
print(f"\nflat series: SR={flat.sharpe} CR={flat.calmar}")
