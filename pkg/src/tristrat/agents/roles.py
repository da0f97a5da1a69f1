"""The six agent roles: three analysts, the scorer, the selector and the
strategist. Each role is a single-shot chat call with a fixed template; the
scorer and selector parse and validate structured JSON output."""

from __future__ import annotations

import json
import math
import re
import threading
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

from ..context import DataOverview
from ..errors import TristratError
from ..history import StrategyHistory
from ..portfolio import MAX_POSITIONS, Portfolio, constraint_violations, repair_weights
from .client import ChatClient, make_request
from .prompts import DEFAULT_TEMPLATES, PromptTemplate, with_correction

ANALYSIS_KINDS = ("news", "tech", "fund")
SCORE_DIMENSIONS = (
    "financial_health",
    "growth_potential",
    "news_sentiment",
    "news_impact",
    "price_momentum",
    "volatility_risk",
)

INITIAL_STRATEGY = (
    "Weigh all six dimensions equally; prefer high Financial Health, Growth Potential, News Sentiment, "
    "News Impact, and Price Momentum; prefer low Volatility Risk."
)

DEFAULT_MODEL = "gpt-4o"


class AgentOutputError(TristratError):
    """An agent response could not be turned into a valid domain object."""


class EmptyResponseError(AgentOutputError):
    pass


class ScoreError(AgentOutputError):
    pass


class SelectionError(AgentOutputError):
    pass


@dataclass(frozen=True)
class AnalysisReport:
    symbol: str
    week: int
    kind: str
    text: str

    def __post_init__(self) -> None:
        if self.kind not in ANALYSIS_KINDS:
            raise ValueError(f"unknown analysis kind {self.kind!r}")
        if not self.text.strip():
            raise EmptyResponseError(f"{self.kind} analysis for {self.symbol} is empty")


@dataclass(frozen=True)
class ScoreReport:
    symbol: str
    week: int
    financial_health: int
    growth_potential: int
    news_sentiment: int
    news_impact: int
    price_momentum: int
    volatility_risk: int
    rationale: str = ""

    def __post_init__(self) -> None:
        for dim in SCORE_DIMENSIONS:
            value = getattr(self, dim)
            if isinstance(value, bool) or not isinstance(value, int) or not 1 <= value <= 10:
                raise ScoreError(f"{self.symbol}: {dim}={value!r} is not an integer in 1..10")

    @property
    def scores(self) -> dict[str, int]:
        return {dim: getattr(self, dim) for dim in SCORE_DIMENSIONS}

    def render(self) -> str:
        lines = [f"### {self.symbol}"]
        lines += [f"{dim}: {value}" for dim, value in self.scores.items()]
        lines.append(f"rationale: {self.rationale or '-'}")
        return "\n".join(lines)

    def to_dict(self) -> dict:
        return {"symbol": self.symbol, "week": self.week, **self.scores, "rationale": self.rationale}

    @classmethod
    def from_dict(cls, d: Mapping) -> "ScoreReport":
        return cls(d["symbol"], d["week"], *(d[k] for k in SCORE_DIMENSIONS), d.get("rationale", ""))


@dataclass(frozen=True)
class Strategy:
    week: int
    text: str

    def __post_init__(self) -> None:
        if not self.text.strip():
            raise ValueError("strategy text must be nonempty")


@dataclass(frozen=True)
class CallRecord:
    role: str
    symbol: str
    attempt: int
    cache_key: str
    cached: bool


@dataclass
class AgentTrace:
    """Side channel collecting cache keys, flags and rendered prompts."""

    calls: list[CallRecord] = field(default_factory=list)
    flags: list[str] = field(default_factory=list)
    prompts: dict[str, str] = field(default_factory=dict)
    _lock: threading.Lock = field(default_factory=threading.Lock, repr=False)

    def add_call(self, record: CallRecord) -> None:
        with self._lock:
            self.calls.append(record)

    def flag(self, message: str) -> None:
        with self._lock:
            self.flags.append(message)

    def sorted_calls(self) -> list[CallRecord]:
        order = {role: i for i, role in enumerate(("news", "tech", "fund", "score", "select", "strategy"))}
        return sorted(self.calls, key=lambda c: (order[c.role] >= 4, c.symbol, order[c.role], c.attempt))


# --------------------------------------------------------------------------
# JSON extraction
# --------------------------------------------------------------------------

_FENCE_RE = re.compile(r"```(?:json|JSON)?\s*\n?(.*?)```", re.DOTALL)


def extract_json_object(text: str) -> dict | None:
    """First JSON object in a fenced block, else the first decodable object anywhere."""
    for block in _FENCE_RE.findall(text):
        try:
            obj = json.loads(block.strip())
        except (json.JSONDecodeError, RecursionError):
            continue
        if isinstance(obj, dict):
            return obj
    decoder = json.JSONDecoder()
    for m in re.finditer(r"\{", text):
        try:
            obj, _ = decoder.raw_decode(text, m.start())
        except (json.JSONDecodeError, RecursionError):
            continue
        if isinstance(obj, dict):
            return obj
    return None


def parse_scores(text: str) -> tuple[dict[str, int], str]:
    obj = extract_json_object(text)
    if obj is None:
        raise ScoreError("no JSON object found in the reply")
    scores = {}
    for dim in SCORE_DIMENSIONS:
        if dim not in obj:
            raise ScoreError(f"missing dimension {dim}")
        value = obj[dim]
        if isinstance(value, float) and value.is_integer():
            value = int(value)
        if isinstance(value, bool) or not isinstance(value, int):
            raise ScoreError(f"{dim} must be an integer, got {value!r}")
        if not 1 <= value <= 10:
            raise ScoreError(f"{dim}={value} is outside the range 1 to 10")
        scores[dim] = value
    rationale = obj.get("rationale", "")
    return scores, rationale if isinstance(rationale, str) else json.dumps(rationale)


def parse_weights(text: str) -> dict[str, float]:
    obj = extract_json_object(text)
    if obj is None:
        raise SelectionError("no JSON object found in the reply")
    if "weights" in obj:
        weights = obj["weights"]
    else:
        weights = {k: v for k, v in obj.items() if k not in ("reasoning", "rationale")}
    if not isinstance(weights, dict):
        raise SelectionError("weights must be a JSON object mapping tickers to numbers")
    clean: dict[str, float] = {}
    for key, value in weights.items():
        ticker = str(key).strip().upper()
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise SelectionError(f"weight for {key!r} is not a number: {value!r}")
        try:
            weight = float(value)
        except OverflowError:
            weight = math.inf
        if not math.isfinite(weight):
            raise SelectionError(f"weight for {key!r} is not finite")
        if ticker in clean:
            raise SelectionError(f"ticker {ticker} listed more than once")
        clean[ticker] = weight
    return clean


# --------------------------------------------------------------------------
# Agents
# --------------------------------------------------------------------------


def _pct(x: float) -> str:
    return f"{x * 100:+.2f}%"


class Agents:
    def __init__(
        self,
        client: ChatClient,
        model: str = DEFAULT_MODEL,
        temperature: float = 0.0,
        max_tokens: int = 1024,
        templates: Mapping[str, PromptTemplate] | None = None,
        max_positions: int = MAX_POSITIONS,
    ):
        self.client = client
        self.model = model
        self.temperature = temperature
        self.max_tokens = max_tokens
        self.templates = dict(DEFAULT_TEMPLATES if templates is None else templates)
        self.max_positions = max_positions

    def _call(self, role: str, system: str, user: str, symbol: str, week: int, attempt: int,
              trace: AgentTrace | None, extra_tags: Mapping | None = None) -> str:
        tags = {"role": role, "symbol": symbol, "week": week, "attempt": attempt, **(extra_tags or {})}
        request = make_request(self.model, system, user, self.temperature, self.max_tokens, tags)
        response = self.client.complete(request)
        if trace is not None:
            trace.add_call(CallRecord(role, symbol, attempt, response.cache_key, response.cached))
        return response.content

    def render(self, role: str, **values: object) -> tuple[str, str]:
        return self.templates[role].render(**values)

    def analyze(self, kind: str, input_text: str, symbol: str, week: int,
                trace: AgentTrace | None = None) -> AnalysisReport:
        if kind not in ANALYSIS_KINDS:
            raise ValueError(f"unknown analysis kind {kind!r}")
        system, user = self.render(kind, symbol=symbol, week=week, input=input_text)
        content = self._call(kind, system, user, symbol, week, 0, trace)
        return AnalysisReport(symbol, week, kind, content.strip())

    def score(self, overview: DataOverview, trace: AgentTrace | None = None) -> ScoreReport:
        """Six-dimension score report; one corrective re-prompt on bad output."""
        system, user = self.render("score", symbol=overview.symbol, week=overview.week, overview=overview.text)
        prompt = user
        for attempt in range(2):
            content = self._call("score", system, prompt, overview.symbol, overview.week, attempt, trace)
            try:
                scores, rationale = parse_scores(content)
            except ScoreError as exc:
                if attempt == 1:
                    raise ScoreError(f"{overview.symbol} week {overview.week}: {exc}") from None
                if trace is not None:
                    trace.flag(f"score:{overview.symbol}: re-prompted ({exc})")
                prompt = with_correction(user, str(exc))
                continue
            return ScoreReport(overview.symbol, overview.week, rationale=rationale, **scores)
        raise AssertionError("unreachable")

    def select(self, scores: Iterable[ScoreReport], strategy: Strategy, tradable: Iterable[str],
               trace: AgentTrace | None = None) -> Portfolio:
        """Weights for the week's candidates that always satisfy the portfolio
        constraints. After one corrective re-prompt, over-allocation and excess
        positions are repaired; unknown tickers and unparseable output raise."""
        tradable = sorted(set(tradable))
        reports = sorted(scores, key=lambda s: s.symbol)
        missing = sorted(set(tradable) - {s.symbol for s in reports})
        if missing:
            raise SelectionError(f"no score report for candidate(s) {', '.join(missing)}")
        week = strategy.week
        system, user = self.render(
            "select",
            week=week,
            strategy=strategy.text,
            candidates=", ".join(tradable),
            scores="\n\n".join(r.render() for r in reports),
            max_positions=self.max_positions,
        )
        if trace is not None:
            trace.prompts["select"] = user
        prompt = user
        for attempt in range(2):
            content = self._call("select", system, prompt, "", week, attempt, trace, {"candidates": tradable})
            try:
                weights = parse_weights(content)
            except SelectionError as exc:
                if attempt == 1:
                    raise SelectionError(f"week {week}: selector output unusable after retry: {exc}") from None
                violations = [str(exc)]
            else:
                violations = constraint_violations(weights, tradable, self.max_positions)
                if not violations:
                    return Portfolio(week, weights)
                if attempt == 1:
                    unknown = sorted(set(weights) - set(tradable))
                    if unknown:
                        raise SelectionError(f"week {week}: unknown ticker(s) {', '.join(unknown)}")
                    repaired = repair_weights(weights, self.max_positions)
                    if trace is not None:
                        trace.flag(f"select: repaired weights ({'; '.join(violations)})")
                    return Portfolio(week, repaired)
            if trace is not None:
                trace.flag(f"select: re-prompted ({'; '.join(violations)})")
            prompt = with_correction(user, "; ".join(violations))
        raise AssertionError("unreachable")

    def render_refine_prompt(self, current: Strategy, portfolio: Portfolio, returns: Mapping[str, float],
                             scores: Sequence[ScoreReport], history: StrategyHistory) -> tuple[str, str]:
        by_symbol = {s.symbol: s for s in scores}
        rows = []
        for symbol in sorted(returns):
            s = by_symbol.get(symbol)
            dims = " ".join(f"{d}={s.scores[d]}" for d in SCORE_DIMENSIONS) if s else "scores unavailable"
            rows.append(f"{symbol}: {dims} | return {_pct(returns[symbol])} | weight {portfolio.weights.get(symbol, 0.0):.4f}")
        held = ", ".join(f"{s}: {w:.4f}" for s, w in portfolio.weights.items()) or "all cash"
        return self.render(
            "strategy",
            week=current.week,
            strategy=current.text,
            portfolio=f"{held} (cash {portfolio.cash_fraction:.4f})",
            score_returns="\n".join(rows) or "no candidates",
            history=history.render(),
        )

    def refine(self, current: Strategy, portfolio: Portfolio, returns: Mapping[str, float],
               scores: Sequence[ScoreReport], history: StrategyHistory,
               trace: AgentTrace | None = None) -> Strategy:
        """Strategy for the following week; an empty reply keeps the current one."""
        system, user = self.render_refine_prompt(current, portfolio, returns, scores, history)
        if trace is not None:
            trace.prompts["strategy"] = user
        content = self._call("strategy", system, user, "", current.week, 0, trace).strip()
        if not content:
            if trace is not None:
                trace.flag("strategy: empty reply, carried forward current strategy")
            return Strategy(current.week + 1, current.text)
        return Strategy(current.week + 1, content)
