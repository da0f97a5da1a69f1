"""Provider-agnostic chat client and the agent roles built on it."""

from .client import (
    API_KEY_ENV,
    AuthError,
    CacheMiss,
    ChatClient,
    ChatRequest,
    ChatResponse,
    MalformedResponse,
    OfflineProvider,
    OpenAICompatibleProvider,
    ProviderError,
    ProviderTimeout,
    ResponseCache,
    TokenBucket,
    TransportError,
)
from .prompts import DEFAULT_TEMPLATES, PromptError, PromptTemplate
from .roles import (
    INITIAL_STRATEGY,
    SCORE_DIMENSIONS,
    AgentOutputError,
    Agents,
    AgentTrace,
    AnalysisReport,
    ScoreError,
    ScoreReport,
    SelectionError,
    Strategy,
    extract_json_object,
)
from .stub import StubProvider, completion_body

__all__ = [
    "API_KEY_ENV", "AuthError", "CacheMiss", "ChatClient", "ChatRequest", "ChatResponse",
    "MalformedResponse", "OfflineProvider", "OpenAICompatibleProvider", "ProviderError",
    "ProviderTimeout", "ResponseCache", "TokenBucket", "TransportError", "DEFAULT_TEMPLATES",
    "PromptError", "PromptTemplate", "INITIAL_STRATEGY", "SCORE_DIMENSIONS", "AgentOutputError",
    "Agents", "AgentTrace", "AnalysisReport", "ScoreError", "ScoreReport", "SelectionError",
    "Strategy", "extract_json_object", "StubProvider", "completion_body",
]
