"""Run the full agent pipeline offline with a generated stub provider.

The stub produces deterministic analyst text, scores, selections and
strategy revisions, so the run needs no network and no credential.
"""

from __future__ import annotations

import json
import tempfile
from pathlib import Path

from tristrat import RunConfig, run_backtest
from tristrat.agents import StubProvider
from tristrat.config import ProviderSettings
from tristrat.synthetic import generate_market

data = generate_market(weeks=10, seed=7)
config = RunConfig(provider=ProviderSettings(kind="stub"), baselines=("1n",))

with tempfile.TemporaryDirectory() as tmp:
    out = Path(tmp)
    provider = StubProvider(generate=True)
    result = run_backtest(config, out, data=data, provider=provider)

    for rec in result.records:
        held = ", ".join(f"{s} {w:.0%}" for s, w in rec["portfolio"].items()) or "all cash"
        print(f"week {rec['week']:>2}  {held:<40} R={rec['portfolio_return']:+.4f}  W={rec['wealth']:.4f}")

    report = json.loads((out / "report.json").read_text())
    print(f"\nagent AR {report['metrics']['AR']:+.4%}   1/N AR {report['baselines']['1n']['AR']:+.4%}")
    print(f"{provider.calls} agent calls served by the stub")
    print("\nstrategy carried into the last week:")
    print(result.records[-1]["strategy"])
