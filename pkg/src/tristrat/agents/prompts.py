"""Prompt templates for the six agent roles.

Templates use ``$name`` placeholders (``string.Template``) so JSON examples in
the instructions need no brace escaping, and substituted data is never
re-interpreted as a placeholder.
"""

from __future__ import annotations

import string
from dataclasses import dataclass

from ..errors import TristratError

ROLES = ("news", "tech", "fund", "score", "select", "strategy")


class PromptError(TristratError):
    """A template was rendered with a missing placeholder value."""


@dataclass(frozen=True)
class PromptTemplate:
    role: str
    system: str
    user: str

    @property
    def placeholders(self) -> set[str]:
        names = set()
        for _, named, braced, _ in string.Template.pattern.findall(self.user):
            if named or braced:
                names.add(named or braced)
        return names

    def render(self, **values: object) -> tuple[str, str]:
        """Return ``(system, user)`` text; every placeholder must be bound."""
        missing = self.placeholders - values.keys()
        if missing:
            raise PromptError(f"{self.role} prompt missing value(s) for {', '.join(sorted(missing))}")
        return self.system, string.Template(self.user).substitute({k: str(v) for k, v in values.items()})


NEWS = PromptTemplate(
    role="news",
    system=(
        "You are a financial news analyst covering U.S. equities. You read the news published "
        "about one company during the past week and explain what it means for the stock."
    ),
    user="""Stock: $symbol
Week being prepared: $week

News items from the previous week (one per line, "[date] title - summary"):
$input

Write a concise analysis report (at most 200 words) covering:
1. The main events and how they affect the company.
2. The overall sentiment of the coverage (positive, neutral or negative) and why.
3. Whether the impact looks short-lived or likely to persist (e.g. policy or industry-wide shifts).
If there is no news, say so and state that news gives no directional signal this week.""",
)

TECH = PromptTemplate(
    role="tech",
    system=(
        "You are a technical analyst. You interpret daily prices and standard indicators "
        "(SMA, ATR, RSI, MACD, Bollinger Bands) to describe trend, momentum and volatility."
    ),
    user="""Stock: $symbol
Week being prepared: $week

Daily data for the previous four trading weeks, oldest first. Each line has the date, the close
and any indicator already defined on that day (sma = 20-day simple moving average, atr = 14-day
average true range, rsi = 14-day RSI, macd/macd_signal/macd_hist = 12/26/9 MACD, boll_* = 20-day
Bollinger Bands at 2 standard deviations):
$input

Write a concise analysis report (at most 200 words) describing the price trend, momentum,
overbought or oversold conditions and the recent level of volatility.""",
)

FUND = PromptTemplate(
    role="fund",
    system=(
        "You are a fundamental equity analyst. You read quarterly earnings, balance-sheet and "
        "cash-flow figures and assess a company's financial condition and growth trajectory."
    ),
    user="""Stock: $symbol
Week being prepared: $week

Statements from the most recent fiscal quarters released so far, oldest first:
$input

Write a concise analysis report (at most 200 words) on profitability, balance-sheet strength,
cash generation and the direction of growth across these quarters. If no statements are
available, say so.""",
)

SCORE = PromptTemplate(
    role="score",
    system=(
        "You are a portfolio research analyst. You condense analyst reports on one stock into "
        "six integer scores from 1 to 10 that can be compared across many candidate stocks."
    ),
    user="""Stock: $symbol
Week being prepared: $week

Analyst reports:
$overview

Score the stock on each dimension with an integer from 1 (weakest) to 10 (strongest):
- financial_health: current financial stability; higher means stronger fundamentals and lower short-term risk.
- growth_potential: capacity for future expansion; higher means stronger long-term earnings potential.
- news_sentiment: polarity of recent coverage; higher means more positive news and investor perception.
- news_impact: breadth and duration of the news influence; higher means more sustained impact.
- price_momentum: recent price trend; higher means a stronger and more consistent upward trend.
- volatility_risk: recent price fluctuation; higher means MORE volatile and less stable.

Reply with a single JSON object inside a ```json fenced block, for example:
```json
{"financial_health": 7, "growth_potential": 6, "news_sentiment": 5, "news_impact": 4, "price_momentum": 6, "volatility_risk": 3, "rationale": "one or two sentences"}
```""",
)

SELECT = PromptTemplate(
    role="select",
    system=(
        "You are a portfolio manager. Each week you pick stocks from a candidate list and "
        "allocate capital to them, following the current selection strategy."
    ),
    user="""Week: $week

Current selection strategy:
$strategy

Candidate stocks: $candidates

Score reports for every candidate:
$scores

Rules:
- Choose at most $max_positions stocks from the candidate list only.
- Weights are fractions of capital between 0 and 1; their sum must not exceed 1.
- Any capital left unallocated is held as cash, which is allowed when the outlook is poor.

Reply with a single JSON object inside a ```json fenced block mapping tickers to weights, for example:
```json
{"weights": {"AAA": 0.3, "BBB": 0.2}, "reasoning": "short explanation"}
```""",
)

STRATEGY = PromptTemplate(
    role="strategy",
    system=(
        "You are an investment strategist. After each trading week you compare how stocks "
        "were scored with how they actually performed, and refine the stock selection strategy."
    ),
    user="""Week just completed: $week

Strategy used this week:
$strategy

Portfolio held this week (ticker: weight):
$portfolio

Scores and realized weekly returns of every candidate:
$score_returns

Previous strategies with their outcomes, oldest first:
$history

Identify which score dimensions separated the best performers from the worst ones this week,
taking the longer trajectory into account so the strategy does not swing on a single week.
Reply with the refined strategy for next week as plain text, at most 120 words, stating which
dimensions to favour or avoid and how much cash to hold.""",
)

DEFAULT_TEMPLATES: dict[str, PromptTemplate] = {t.role: t for t in (NEWS, TECH, FUND, SCORE, SELECT, STRATEGY)}

CORRECTION = """

Your previous reply was rejected: $violation
Reply again following the required JSON format exactly."""


def with_correction(user: str, violation: str) -> str:
    return user + string.Template(CORRECTION).substitute(violation=violation)
