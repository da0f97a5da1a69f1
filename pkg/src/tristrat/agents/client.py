"""Chat-completion client for OpenAI-compatible endpoints.

The client adds three things on top of a bare provider: a content-addressed
response cache (so a backtest can be replayed offline), bounded retries with
exponential backoff on transport failures, and concurrency control (an
in-flight cap plus an optional token-bucket rate limit).
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import tempfile
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Mapping, Protocol, Sequence

import httpx

from ..errors import TristratError

logger = logging.getLogger(__name__)

API_KEY_ENV = "TRISTRAT_API_KEY"
DEFAULT_BASE_URL = "https://api.openai.com/v1"


class ProviderError(TristratError):
    """Base class for chat provider failures."""

    kind = "provider_error"


class AuthError(ProviderError):
    kind = "auth_failure"


class ProviderTimeout(ProviderError):
    kind = "timeout"


class TransportError(ProviderError):
    kind = "transport_failure"


class MalformedResponse(ProviderError):
    kind = "malformed_payload"


class CacheMiss(ProviderError):
    """Raised in replay mode when a request has no cached response."""

    kind = "cache_miss"


RETRYABLE = (TransportError, ProviderTimeout)


@dataclass(frozen=True)
class ChatRequest:
    model: str
    messages: tuple[tuple[str, str], ...]
    temperature: float = 0.0
    max_tokens: int = 1024
    # routing hints for scripted providers; never sent on the wire or hashed
    tags: Mapping[str, object] = field(default_factory=dict, compare=False)

    def __post_init__(self) -> None:
        if not self.messages:
            raise ValueError("a chat request needs at least one message")
        if not 0.0 <= self.temperature <= 2.0:
            raise ValueError(f"temperature {self.temperature} outside [0, 2]")
        object.__setattr__(self, "messages", tuple((str(r), str(c)) for r, c in self.messages))

    def body(self) -> dict:
        return {
            "model": self.model,
            "messages": [{"role": r, "content": c} for r, c in self.messages],
            "temperature": self.temperature,
            "max_tokens": self.max_tokens,
        }

    @property
    def cache_key(self) -> str:
        payload = json.dumps(
            {"model": self.model, "messages": [[r, c] for r, c in self.messages]},
            sort_keys=True, ensure_ascii=False, separators=(",", ":"),
        )
        return hashlib.sha256(payload.encode("utf-8")).hexdigest()


@dataclass(frozen=True)
class ChatResponse:
    content: str
    usage: Mapping[str, int]
    provider: str
    cache_key: str
    cached: bool = False


def parse_completion(raw: str) -> tuple[str, dict]:
    """Pull ``choices[0].message.content`` and ``usage`` out of a response body."""
    try:
        payload = json.loads(raw)
        content = payload["choices"][0]["message"]["content"]
    except (json.JSONDecodeError, KeyError, IndexError, TypeError) as exc:
        raise MalformedResponse(f"unreadable completion payload: {exc!r}") from None
    if content is None:
        content = ""
    if not isinstance(content, str):
        raise MalformedResponse("message content is not a string")
    usage = payload.get("usage") if isinstance(payload, dict) else None
    return content, dict(usage) if isinstance(usage, dict) else {}


class Provider(Protocol):
    name: str

    def post(self, body: dict, tags: Mapping[str, object]) -> str:
        """Send one request body and return the raw response body."""


class OpenAICompatibleProvider:
    """HTTP provider speaking the ``/chat/completions`` wire format."""

    name = "openai-compatible"

    def __init__(
        self,
        base_url: str = DEFAULT_BASE_URL,
        api_key: str | None = None,
        timeout: float = 60.0,
        transport: httpx.BaseTransport | None = None,
    ):
        self.base_url = base_url.rstrip("/")
        self.api_key = api_key if api_key is not None else os.environ.get(API_KEY_ENV)
        if not self.api_key:
            raise AuthError(
                f"no API credential: set {API_KEY_ENV} or pass --replay with a warm response cache"
            )
        self._http = httpx.Client(timeout=timeout, transport=transport)

    def post(self, body: dict, tags: Mapping[str, object] | None = None) -> str:
        try:
            resp = self._http.post(
                f"{self.base_url}/chat/completions",
                json=body,
                headers={"Authorization": f"Bearer {self.api_key}"},
            )
        except httpx.TimeoutException as exc:
            raise ProviderTimeout(f"request timed out: {exc}") from None
        except httpx.TransportError as exc:
            raise TransportError(f"transport failure: {exc}") from None
        if resp.status_code in (401, 403):
            raise AuthError(f"provider rejected credentials (HTTP {resp.status_code})")
        if resp.status_code == 429 or resp.status_code >= 500:
            raise TransportError(f"provider unavailable (HTTP {resp.status_code})")
        if resp.status_code >= 400:
            raise ProviderError(f"provider error HTTP {resp.status_code}: {resp.text[:200]}")
        return resp.text

    def close(self) -> None:
        self._http.close()


class OfflineProvider:
    """Provider used in replay mode: any call means the cache is incomplete."""

    name = "offline"

    def post(self, body: dict, tags: Mapping[str, object] | None = None) -> str:
        raise CacheMiss("response not in cache and network access is disabled (replay mode)")


class ResponseCache:
    """Directory of raw response bodies keyed by SHA-256 of (model, prompt)."""

    def __init__(self, root: str | Path):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)

    def path(self, key: str) -> Path:
        return self.root / f"{key}.json"

    def get(self, key: str) -> str | None:
        p = self.path(key)
        return p.read_text(encoding="utf-8") if p.exists() else None

    def put(self, key: str, raw: str) -> None:
        fd, tmp = tempfile.mkstemp(dir=self.root, suffix=".tmp")
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(raw)
        os.replace(tmp, self.path(key))

    def __contains__(self, key: str) -> bool:
        return self.path(key).exists()

    def __len__(self) -> int:
        return sum(1 for _ in self.root.glob("*.json"))


class TokenBucket:
    """Blocking token bucket: ``rate`` tokens per second, burst ``capacity``."""

    def __init__(self, rate: float, capacity: float | None = None, clock: Callable[[], float] = time.monotonic,
                 sleep: Callable[[float], None] = time.sleep):
        if rate <= 0:
            raise ValueError("rate must be positive")
        self.rate = rate
        self.capacity = capacity if capacity is not None else max(1.0, rate)
        self._tokens = self.capacity
        self._clock = clock
        self._sleep = sleep
        self._stamp = clock()
        self._lock = threading.Lock()

    def acquire(self) -> None:
        while True:
            with self._lock:
                now = self._clock()
                self._tokens = min(self.capacity, self._tokens + (now - self._stamp) * self.rate)
                self._stamp = now
                if self._tokens >= 1:
                    self._tokens -= 1
                    return
                wait = (1 - self._tokens) / self.rate
            self._sleep(wait)


class ChatClient:
    def __init__(
        self,
        provider: Provider,
        cache: ResponseCache | None = None,
        max_attempts: int = 3,
        backoff: float = 0.5,
        max_in_flight: int = 8,
        rate_limiter: TokenBucket | None = None,
        sleep: Callable[[float], None] = time.sleep,
    ):
        self.provider = provider
        self.cache = cache
        self.max_attempts = max_attempts
        self.backoff = backoff
        self.rate_limiter = rate_limiter
        self._sleep = sleep
        self._slots = threading.BoundedSemaphore(max_in_flight)
        self._lock = threading.Lock()
        self.network_calls = 0
        self.cache_hits = 0

    def complete(self, request: ChatRequest) -> ChatResponse:
        key = request.cache_key
        if self.cache is not None:
            raw = self.cache.get(key)
            if raw is not None:
                content, usage = parse_completion(raw)
                with self._lock:
                    self.cache_hits += 1
                return ChatResponse(content, usage, self.provider.name, key, cached=True)

        raw = self._post_with_retry(request)
        content, usage = parse_completion(raw)
        if self.cache is not None:
            self.cache.put(key, raw)
        return ChatResponse(content, usage, self.provider.name, key)

    def _post_with_retry(self, request: ChatRequest) -> str:
        body = request.body()
        for attempt in range(1, self.max_attempts + 1):
            if self.rate_limiter is not None:
                self.rate_limiter.acquire()
            with self._slots:
                with self._lock:
                    self.network_calls += 1
                try:
                    return self.provider.post(body, request.tags)
                except RETRYABLE as exc:
                    if attempt == self.max_attempts:
                        raise
                    delay = self.backoff * 2 ** (attempt - 1)
                    logger.warning("attempt %d/%d failed (%s); retrying in %.2fs", attempt, self.max_attempts, exc, delay)
            self._sleep(delay)
        raise AssertionError("unreachable")


def make_request(model: str, system: str, user: str, temperature: float = 0.0, max_tokens: int = 1024,
                 tags: Mapping[str, object] | None = None) -> ChatRequest:
    messages: Sequence[tuple[str, str]] = (("system", system), ("user", user))
    return ChatRequest(model, tuple(messages), temperature, max_tokens, dict(tags or {}))
