"""Weekly loop: analysis, scoring, selection, settlement and strategy refinement.

Weeks run strictly in order because each week's strategy depends on the
previous one; per-stock analysis and scoring within a week fan out across a
thread pool and are joined in ticker order so prompts and ledger records do
not depend on scheduling.
"""

from __future__ import annotations

import csv
import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

from .agents import (
    INITIAL_STRATEGY,
    Agents,
    AgentTrace,
    ChatClient,
    OfflineProvider,
    OpenAICompatibleProvider,
    ResponseCache,
    ScoreReport,
    Strategy,
    StubProvider,
    TokenBucket,
)
from .agents.client import API_KEY_ENV, AuthError, CacheMiss, Provider, ProviderError
from .agents.roles import AgentOutputError
from .backtest import EquityCurve, run_settlement
from .baselines import equal_weight, factor_score, top5_portfolio
from .config import AGENT_MODE, RunConfig
from .context import build_context, build_overview
from .errors import ConfigError, TristratError
from .history import StrategyHistory, StrategyRecord
from .indicators import indicator_table
from .ledger import SCHEMA_VERSION, Ledger
from .market_data import MarketData, TradingWeek, build_trading_calendar
from .metrics import MetricsReport, compute_metrics
from .portfolio import Portfolio

logger = logging.getLogger(__name__)

# A missing credential or a replay cache that does not cover the run cannot
# heal by itself; these stop the run instead of degrading weeks to cash.
FATAL_AGENT_ERRORS = (AuthError, CacheMiss)


@dataclass
class WeekArtifacts:
    tradable: list[str]
    scores: list[ScoreReport] = field(default_factory=list)
    trace: AgentTrace = field(default_factory=AgentTrace)
    aborted: bool = False


@dataclass
class RunState:
    strategy: Strategy
    history: StrategyHistory
    equity: EquityCurve = field(default_factory=EquityCurve)
    records: list[dict] = field(default_factory=list)

    @property
    def last_week(self) -> int | None:
        return self.records[-1]["week"] if self.records else None


@dataclass
class BacktestResult:
    metrics: MetricsReport
    records: list[dict]
    equity: EquityCurve
    report: dict
    baselines: dict[str, MetricsReport] = field(default_factory=dict)
    network_calls: int = 0
    cache_hits: int = 0


def _error_flag(exc: Exception) -> str:
    kind = getattr(exc, "kind", type(exc).__name__)
    return f"{kind}: {exc}"


def select_or_cash(agents: Agents, scores: Sequence[ScoreReport], strategy: Strategy,
                   tradable: Sequence[str], trace: AgentTrace) -> Portfolio:
    """Selector call that never lets a failure escape as an invalid portfolio:
    unusable output degrades the week to all-cash and records a flag."""
    try:
        return agents.select(scores, strategy, tradable, trace)
    except FATAL_AGENT_ERRORS:
        raise
    except TristratError as exc:
        trace.flag("week aborted to cash: " + _error_flag(exc))
        return Portfolio.cash(strategy.week)


class Backtester:
    """Runs one strategy (agents or a baseline) over the evaluation calendar."""

    def __init__(self, config: RunConfig, data: MarketData, agents: Agents | None = None,
                 mode: str | None = None):
        self.config = config
        self.mode = mode or config.mode
        self.data = data
        self.agents = agents
        if self.mode == AGENT_MODE and agents is None:
            raise ConfigError("agent mode needs an Agents instance")
        self.universe = tuple(sorted(config.universe or data.symbols))
        self._validate()
        self.calendar = build_trading_calendar(
            (b for b in data.bars if b.symbol in set(self.universe)), end=config.end
        )
        self.weeks = self._eligible_weeks()

    def _validate(self) -> None:
        missing = sorted(set(self.universe) - set(self.data.symbols))
        if missing:
            raise ConfigError(f"universe tickers without any bars: {', '.join(missing)}")
        if not self.data.bars:
            raise ConfigError("no price data loaded")
        first, last = min(b.date for b in self.data.bars), max(b.date for b in self.data.bars)
        if self.config.start and self.config.start > last:
            raise ConfigError(f"start {self.config.start} is after the last bar ({last})")
        if self.config.end and self.config.end < first:
            raise ConfigError(f"end {self.config.end} is before the first bar ({first})")

    def _eligible_weeks(self) -> list[TradingWeek]:
        warmup = self.config.warmup_weeks
        weeks = [
            w for w in self.calendar
            if w.index > warmup and (self.config.start is None or w.first_day >= self.config.start)
        ]
        if not weeks:
            raise ConfigError(
                f"no evaluable weeks: need more than {warmup} warm-up trading weeks before the evaluation range"
            )
        return weeks

    # -- state --------------------------------------------------------------

    def initial_state(self) -> RunState:
        first = self.weeks[0].index
        return RunState(Strategy(first, INITIAL_STRATEGY), StrategyHistory(self.config.history_k))

    def state_from_records(self, records: Sequence[dict]) -> RunState:
        """Rebuild the run state from ledger week records."""
        state = self.initial_state()
        for rec in records:
            state.equity.append(rec["portfolio_return"])
            state.records.append(rec)
            if self.mode == AGENT_MODE:
                state.history.append(StrategyRecord(rec["week"], rec["strategy"], rec["universe_avg_return"],
                                                    rec["portfolio_return"]))
                state.strategy = Strategy(rec["week"] + 1, rec["next_strategy"])
        if records:
            next_weeks = [w for w in self.weeks if w.index > records[-1]["week"]]
            if next_weeks and self.mode == AGENT_MODE:
                state.strategy = Strategy(next_weeks[0].index, state.strategy.text)
        return state

    def header(self) -> dict:
        return {
            "mode": self.mode,
            "config_fingerprint": self.config.fingerprint(),
            "settings": self.config.fingerprint_fields() | {"mode": self.mode},
            "universe": list(self.universe),
        }

    # -- one week -----------------------------------------------------------

    def _score_stock(self, symbol: str, t: int) -> tuple[ScoreReport, AgentTrace]:
        trace = AgentTrace()
        ctx = build_context(
            symbol, t, self.calendar, self.data, self.config.indicators,
            self.config.tech_lookback_weeks, self.config.news_lookback_weeks, self.config.max_section_chars,
        )
        reports = {
            kind: self.agents.analyze(kind, text, symbol, t, trace)
            for kind, text in (("news", ctx.news_text), ("tech", ctx.tech_text), ("fund", ctx.fund_text))
        }
        overview = build_overview(reports["news"].text, reports["tech"].text, reports["fund"].text, symbol, t)
        return self.agents.score(overview, trace), trace

    def _agent_portfolio(self, week: TradingWeek, state: RunState, art: WeekArtifacts) -> Portfolio:
        t = week.index
        if not art.tradable:
            art.trace.flags.append("no tradable stocks this week; holding cash")
            return Portfolio.cash(t)
        errors: list[str] = []
        with ThreadPoolExecutor(max_workers=self.config.concurrency) as pool:
            futures = {s: pool.submit(self._score_stock, s, t) for s in art.tradable}
            for symbol in art.tradable:
                try:
                    report, trace = futures[symbol].result()
                except FATAL_AGENT_ERRORS:
                    raise
                except (TristratError, ValueError) as exc:
                    errors.append(f"{symbol}: {_error_flag(exc)}")
                    continue
                art.scores.append(report)
                art.trace.calls.extend(trace.calls)
                art.trace.flags.extend(trace.flags)
        if errors:
            art.aborted = True
            art.trace.flags.append("week aborted to cash: " + "; ".join(errors))
            return Portfolio.cash(t)
        portfolio = select_or_cash(self.agents, art.scores, state.strategy, art.tradable, art.trace)
        art.aborted = any(f.startswith("week aborted") for f in art.trace.flags)
        return portfolio

    def _baseline_portfolio(self, week: TradingWeek, art: WeekArtifacts) -> Portfolio:
        t = week.index
        if not art.tradable:
            return Portfolio.cash(t)
        if self.mode == "1n":
            return Portfolio(t, equal_weight(art.tradable))
        prev = self.calendar.week(t - 1)
        scores = {}
        for symbol in art.tradable:
            rows = indicator_table(self.data.bars_for(symbol, end=prev.last_day), self.config.indicators)
            row = rows[-1] if rows and rows[-1].date == prev.last_day else None
            scores[symbol] = factor_score(self.mode, row)
        return Portfolio(t, top5_portfolio(scores, n=self.config.max_positions, weight=1.0 / 5))

    def run_week(self, week: TradingWeek, state: RunState) -> tuple[Portfolio, WeekArtifacts]:
        art = WeekArtifacts(tradable=self.data.tradable(week, self.universe))
        if self.mode == AGENT_MODE:
            portfolio = self._agent_portfolio(week, state, art)
        else:
            portfolio = self._baseline_portfolio(week, art)
        return portfolio, art

    def settle_and_refine(self, week: TradingWeek, state: RunState, portfolio: Portfolio,
                          art: WeekArtifacts) -> dict:
        result, returns = run_settlement(week, portfolio, self.data, self.universe, self.config.cost_rate)
        wealth = state.equity.append(result.portfolio_return)
        record = {
            "record": "week",
            "schema_version": SCHEMA_VERSION,
            "week": week.index,
            "first_day": week.first_day.isoformat(),
            "last_day": week.last_day.isoformat(),
            "tradable": art.tradable,
            "portfolio": dict(portfolio.weights),
            "cash": result.cash_fraction,
            "returns": dict(returns.returns),
            "portfolio_return": result.portfolio_return,
            "universe_avg_return": result.universe_avg_return,
            "wealth": wealth,
        }
        if self.mode == AGENT_MODE:
            current = state.strategy
            next_strategy = self._refine(current, portfolio, returns.returns, art, state.history)
            state.history.append(StrategyRecord(week.index, current.text, result.universe_avg_return,
                                                result.portfolio_return))
            state.strategy = next_strategy
            record.update(
                strategy=current.text,
                next_strategy=next_strategy.text,
                history_size=len(state.history),
                scores=[s.to_dict() for s in art.scores],
                strategy_prompt=art.trace.prompts.get("strategy", ""),
                calls=[[c.role, c.symbol, c.attempt, c.cache_key] for c in art.trace.sorted_calls()],
            )
        record["flags"] = list(art.trace.flags)
        state.records.append(record)
        return record

    def _refine(self, current: Strategy, portfolio: Portfolio, returns: dict, art: WeekArtifacts,
                history: StrategyHistory) -> Strategy:
        try:
            refined = self.agents.refine(current, portfolio, returns, art.scores, history, art.trace)
        except FATAL_AGENT_ERRORS:
            raise
        except (ProviderError, AgentOutputError) as exc:
            art.trace.flags.append("strategy refinement failed, carried forward: " + _error_flag(exc))
            refined = Strategy(current.week + 1, current.text)
        following = [w for w in self.weeks if w.index > current.week]
        return Strategy(following[0].index if following else current.week + 1, refined.text)

    # -- whole run ----------------------------------------------------------

    def run(
        self,
        ledger: Ledger | None = None,
        resume: bool = False,
        on_week_end: Callable[[dict], None] | None = None,
    ) -> BacktestResult:
        records: list[dict] = []
        if ledger is not None:
            records = ledger.open(self.header(), resume=resume)
        state = self.state_from_records(records)
        done = {r["week"] for r in records}
        for week in self.weeks:
            if week.index in done:
                continue
            portfolio, art = self.run_week(week, state)
            record = self.settle_and_refine(week, state, portfolio, art)
            if ledger is not None:
                ledger.append(record)
            logger.info("week %d: R=%+.4f W=%.4f", week.index, record["portfolio_return"], record["wealth"])
            if on_week_end is not None:
                on_week_end(record)
        metrics = compute_metrics(state.equity.returns)
        result = BacktestResult(metrics, state.records, state.equity, {})
        if self.agents is not None:
            result.network_calls = self.agents.client.network_calls
            result.cache_hits = self.agents.client.cache_hits
        return result


# --------------------------------------------------------------------------
# Assembly and outputs
# --------------------------------------------------------------------------


def build_agents(config: RunConfig, provider: Provider | None = None, replay_dir: str | Path | None = None) -> Agents:
    """Wire provider, cache and client from configuration.

    ``replay_dir`` forces offline operation: every response must come from
    that cache directory.
    """
    if replay_dir is not None and not Path(replay_dir).is_dir():
        raise ConfigError(f"replay cache directory {replay_dir} does not exist")
    cache_dir = replay_dir or config.cache_dir
    cache = ResponseCache(cache_dir) if cache_dir is not None else None
    p = config.provider
    if provider is None:
        if replay_dir is not None:
            provider = OfflineProvider()
        elif p.kind == "stub":
            provider = (StubProvider.from_file(p.stub_script) if p.stub_script
                        else StubProvider(generate=True))
        elif p.kind == "openai":
            try:
                provider = OpenAICompatibleProvider(p.base_url, timeout=p.timeout)
            except ProviderError:
                if cache is None:
                    raise ConfigError(
                        f"live agent mode needs an API credential: export {API_KEY_ENV}=<key>, "
                        f"or rerun with --replay <cache-dir> to use recorded responses"
                    ) from None
                logger.warning("%s not set; serving responses from cache only", API_KEY_ENV)
                provider = OfflineProvider()
        else:
            raise ConfigError(f"unknown provider kind {p.kind!r}")
    limiter = TokenBucket(p.rate_limit) if p.rate_limit > 0 else None
    client = ChatClient(provider, cache, max_in_flight=config.concurrency, rate_limiter=limiter)
    return Agents(client, model=p.model, temperature=p.temperature, max_tokens=p.max_tokens,
                  max_positions=config.max_positions)


def build_report(mode: str, result: BacktestResult, baselines: dict[str, MetricsReport]) -> dict:
    records = result.records
    return {
        "schema_version": SCHEMA_VERSION,
        "mode": mode,
        "weeks": len(records),
        "first_week": records[0]["week"] if records else None,
        "last_week": records[-1]["week"] if records else None,
        "first_day": records[0]["first_day"] if records else None,
        "last_day": records[-1]["last_day"] if records else None,
        "metrics": result.metrics.as_dict(),
        "final_wealth": result.equity.wealth,
        "flagged_weeks": [r["week"] for r in records if r.get("flags")],
        "baselines": {name: m.as_dict() for name, m in sorted(baselines.items())},
    }


def write_equity_csv(path: Path, records: Sequence[dict]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["week", "date", "W_t", "R_t"])
        for rec in records:
            writer.writerow([rec["week"], rec["last_day"], repr(rec["wealth"]), repr(rec["portfolio_return"])])


def run_backtest(
    config: RunConfig,
    out_dir: str | Path,
    data: MarketData | None = None,
    provider: Provider | None = None,
    replay_dir: str | Path | None = None,
    resume: bool = False,
    on_week_end: Callable[[dict], None] | None = None,
) -> BacktestResult:
    """Run the configured strategy (plus any requested baselines over the same
    calendar) and write ``ledger.jsonl``, ``equity.csv`` and ``report.json``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    if data is None:
        if config.data_dir is None:
            raise ConfigError("no data_dir configured")
        data = MarketData.from_dir(config.data_dir)
    agents = build_agents(config, provider, replay_dir) if config.mode == AGENT_MODE else None
    main = Backtester(config, data, agents)
    result = main.run(Ledger(out / "ledger.jsonl"), resume=resume, on_week_end=on_week_end)

    baselines = {}
    for name in config.baselines:
        if name == config.mode:
            baselines[name] = result.metrics
            continue
        baselines[name] = Backtester(config, data, mode=name).run().metrics

    result.baselines = baselines
    result.report = build_report(config.mode, result, baselines)
    write_equity_csv(out / "equity.csv", result.records)
    (out / "report.json").write_text(json.dumps(result.report, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return result


__all__ = [
    "Backtester", "BacktestResult", "RunState", "WeekArtifacts", "build_agents", "build_report",
    "run_backtest", "select_or_cash", "write_equity_csv",
]
