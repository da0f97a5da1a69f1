"""Deterministic scripted stand-in for a chat-completion endpoint.

Responses are looked up by ``(role, symbol, week)`` with wildcard fallbacks,
or by request cache key. When nothing matches, an optional generator produces
plausible role-shaped content derived from a hash of the prompt, so whole
backtests can run offline and reproducibly.

Script file format (JSON)::

    {
      "generate": true,
      "responses": [
        {"role": "score", "symbol": "AAA", "week": 5, "content": "..."},
        {"role": "select", "content": ["first attempt", "corrective attempt"]}
      ]
    }

A list ``content`` is indexed by the request's attempt number (the last entry
is reused for later attempts).
"""

from __future__ import annotations

import hashlib
import json
import threading
from pathlib import Path
from typing import Callable, Iterable, Mapping

from .client import ChatRequest, ProviderError


class StubMiss(ProviderError):
    kind = "stub_miss"


def completion_body(content: str, provider: str = "stub") -> str:
    """Wrap content in an OpenAI-style response body."""
    return json.dumps(
        {
            "id": "stub-" + hashlib.sha256(content.encode("utf-8")).hexdigest()[:16],
            "object": "chat.completion",
            "model": provider,
            "choices": [{"index": 0, "message": {"role": "assistant", "content": content}, "finish_reason": "stop"}],
            "usage": {"prompt_tokens": 0, "completion_tokens": len(content.split()), "total_tokens": len(content.split())},
        },
        sort_keys=True,
    )


def _digest(text: str) -> bytes:
    return hashlib.sha256(text.encode("utf-8")).digest()


def generated_content(body: Mapping, tags: Mapping) -> str:
    """Role-shaped deterministic content seeded by the prompt text."""
    role = tags.get("role", "")
    symbol = tags.get("symbol", "")
    week = tags.get("week", 0)
    user = body["messages"][-1]["content"]
    h = _digest(user)
    if role in ("news", "tech", "fund"):
        label = {"news": "News", "tech": "Technical", "fund": "Fundamental"}[role]
        tone = ("constructive", "neutral", "cautious")[h[0] % 3]
        return f"{label} analysis for {symbol}, week {week}: the evidence reads {tone} (digest {h.hex()[:12]})."
    if role == "score":
        dims = ("financial_health", "growth_potential", "news_sentiment", "news_impact",
                "price_momentum", "volatility_risk")
        scores = {d: 1 + h[i] % 10 for i, d in enumerate(dims)}
        scores["rationale"] = f"stub scores for {symbol} week {week}"
        return "Scores below.\n```json\n" + json.dumps(scores, sort_keys=True) + "\n```"
    if role == "select":
        candidates = list(tags.get("candidates") or [])
        ranked = sorted(candidates, key=lambda s: _digest(user + s))
        weights = dict(zip(ranked[:3], (0.3, 0.3, 0.2)))
        return "```json\n" + json.dumps({"weights": weights, "reasoning": "stub allocation"}, sort_keys=True) + "\n```"
    if role == "strategy":
        dims = ("Financial Health", "Growth Potential", "News Sentiment", "News Impact", "Price Momentum")
        favour = dims[h[0] % len(dims)]
        return f"Week {int(week) + 1} strategy: emphasise {favour}, keep Volatility Risk low, hold 10% cash."
    return f"stub reply {h.hex()[:12]}"


class StubProvider:
    """Scripted provider that counts every call it serves."""

    name = "stub"

    def __init__(
        self,
        responses: Iterable[Mapping] = (),
        by_key: Mapping[str, str] | None = None,
        generate: bool = False,
        failures: Iterable[Exception] = (),
        fn: Callable[[Mapping, Mapping], str] | None = None,
    ):
        self._script: dict[tuple, object] = {}
        for entry in responses:
            key = (entry["role"], entry.get("symbol"), entry.get("week"))
            self._script[key] = entry["content"]
        self.by_key = dict(by_key or {})
        self.generate = generate
        self.fn = fn
        self._failures = list(failures)
        self._lock = threading.Lock()
        self.calls = 0
        self.requests: list[tuple[dict, dict]] = []

    @classmethod
    def from_file(cls, path: str | Path, **kwargs) -> "StubProvider":
        spec = json.loads(Path(path).read_text(encoding="utf-8"))
        return cls(responses=spec.get("responses", []), by_key=spec.get("by_key"),
                   generate=spec.get("generate", False), **kwargs)

    def _lookup(self, tags: Mapping) -> object | None:
        role, symbol, week = tags.get("role"), tags.get("symbol") or None, tags.get("week")
        for key in ((role, symbol, week), (role, symbol, None), (role, None, week), (role, None, None)):
            if key in self._script:
                return self._script[key]
        return None

    def content_for(self, body: Mapping, tags: Mapping) -> str:
        messages = tuple((m["role"], m["content"]) for m in body["messages"])
        key = ChatRequest(body["model"], messages).cache_key
        if key in self.by_key:
            return self.by_key[key]
        scripted = self._lookup(tags)
        if scripted is not None:
            if isinstance(scripted, list):
                attempt = int(tags.get("attempt", 0))
                return scripted[min(attempt, len(scripted) - 1)]
            return str(scripted)
        if self.fn is not None:
            return self.fn(body, tags)
        if self.generate:
            return generated_content(body, tags)
        raise StubMiss(f"no scripted response for role={tags.get('role')} symbol={tags.get('symbol')} week={tags.get('week')}")

    def post(self, body: dict, tags: Mapping[str, object] | None = None) -> str:
        tags = dict(tags or {})
        with self._lock:
            self.calls += 1
            self.requests.append((body, tags))
            failure = self._failures.pop(0) if self._failures else None
        if failure is not None:
            raise failure
        return completion_body(self.content_for(body, tags))
