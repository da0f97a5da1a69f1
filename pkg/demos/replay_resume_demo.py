"""Record agent responses, replay them offline, and resume an interrupted run."""

from __future__ import annotations

import tempfile
from pathlib import Path

from tristrat import RunConfig, run_backtest
from tristrat.agents import StubProvider
from tristrat.config import ProviderSettings
from tristrat.synthetic import generate_market


class Interrupted(Exception):
    pass


data = generate_market(weeks=12, seed=2)

with tempfile.TemporaryDirectory() as tmp:
    tmp = Path(tmp)
    config = RunConfig(provider=ProviderSettings(kind="stub"), cache_dir=tmp / "cache")

    live = run_backtest(config, tmp / "live", data=data, provider=StubProvider(generate=True))
    print(f"recorded run: {len(live.records)} weeks, {live.network_calls} provider calls")

    replay = run_backtest(config, tmp / "replay", data=data, replay_dir=tmp / "cache")
    same = (tmp / "live" / "ledger.jsonl").read_bytes() == (tmp / "replay" / "ledger.jsonl").read_bytes()
    print(f"replay: {replay.network_calls} provider calls, {replay.cache_hits} cache hits, identical ledger={same}")

    def stop_after_three(record, seen=[]):
        seen.append(record["week"])
        if len(seen) == 3:
            raise Interrupted

    try:
        run_backtest(config, tmp / "resumed", data=data, replay_dir=tmp / "cache", on_week_end=stop_after_three)
    except Interrupted:
        print("run interrupted after three weeks")
    run_backtest(config, tmp / "resumed", data=data, replay_dir=tmp / "cache", resume=True)
    same = (tmp / "live" / "report.json").read_bytes() == (tmp / "resumed" / "report.json").read_bytes()
    print(f"resumed run matches the uninterrupted report: {same}")
