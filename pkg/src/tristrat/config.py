"""Run configuration, loadable from TOML."""

from __future__ import annotations

import hashlib
import json
import sys
from dataclasses import asdict, dataclass, field, fields, replace
from datetime import date
from pathlib import Path
from typing import Any, Mapping

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .baselines import BASELINES
from .errors import ConfigError
from .indicators import IndicatorParams

AGENT_MODE = "agents"
MODES = (AGENT_MODE,) + BASELINES


@dataclass(frozen=True)
class ProviderSettings:
    kind: str = "openai"  # "openai" or "stub"
    base_url: str = "https://api.openai.com/v1"
    model: str = "gpt-4o"
    temperature: float = 0.0
    max_tokens: int = 1024
    timeout: float = 60.0
    rate_limit: float = 0.0  # requests per second; 0 disables the limiter
    stub_script: Path | None = None


@dataclass(frozen=True)
class RunConfig:
    mode: str = AGENT_MODE
    data_dir: Path | None = None
    universe: tuple[str, ...] | None = None
    start: date | None = None
    end: date | None = None
    history_k: int = 10
    max_positions: int = 5
    tech_lookback_weeks: int = 4
    news_lookback_weeks: int = 1
    max_section_chars: int = 12_000
    indicators: IndicatorParams = field(default_factory=IndicatorParams)
    provider: ProviderSettings = field(default_factory=ProviderSettings)
    cache_dir: Path | None = None
    concurrency: int = 4
    cost_rate: float = 0.0
    baselines: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        if self.mode not in MODES:
            raise ConfigError(f"unknown mode {self.mode!r}; choose one of {', '.join(MODES)}")
        unknown = [b for b in self.baselines if b not in BASELINES]
        if unknown:
            raise ConfigError(f"unknown baseline(s) {', '.join(unknown)}")
        if self.history_k < 1:
            raise ConfigError("history_k must be >= 1")
        if self.max_positions < 1:
            raise ConfigError("max_positions must be >= 1")
        if self.tech_lookback_weeks < 1 or self.news_lookback_weeks < 1:
            raise ConfigError("lookback weeks must be >= 1")
        if self.concurrency < 1:
            raise ConfigError("concurrency must be >= 1")
        if self.start and self.end and self.start > self.end:
            raise ConfigError(f"start {self.start} is after end {self.end}")

    @property
    def warmup_weeks(self) -> int:
        return max(self.tech_lookback_weeks, self.news_lookback_weeks)

    def with_overrides(self, **changes: Any) -> "RunConfig":
        return replace(self, **{k: v for k, v in changes.items() if v is not None})

    def fingerprint_fields(self) -> dict:
        """Settings that determine ledger content (paths and caches excluded)."""
        return {
            "mode": self.mode,
            "universe": list(self.universe) if self.universe else None,
            "start": self.start.isoformat() if self.start else None,
            "end": self.end.isoformat() if self.end else None,
            "history_k": self.history_k,
            "max_positions": self.max_positions,
            "tech_lookback_weeks": self.tech_lookback_weeks,
            "news_lookback_weeks": self.news_lookback_weeks,
            "max_section_chars": self.max_section_chars,
            "indicators": asdict(self.indicators),
            "model": self.provider.model,
            "temperature": self.provider.temperature,
            "max_tokens": self.provider.max_tokens,
            "cost_rate": self.cost_rate,
        }

    def fingerprint(self) -> str:
        blob = json.dumps(self.fingerprint_fields(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()


def _as_date(value, name: str) -> date | None:
    if value is None or isinstance(value, date):
        return value
    try:
        return date.fromisoformat(str(value))
    except ValueError:
        raise ConfigError(f"{name} must be a YYYY-MM-DD date, got {value!r}") from None


def _known(cls, raw: Mapping, section: str) -> dict:
    names = {f.name for f in fields(cls)}
    extra = set(raw) - names
    if extra:
        raise ConfigError(f"unknown key(s) in {section}: {', '.join(sorted(extra))}")
    return dict(raw)


def read_universe(path: str | Path) -> tuple[str, ...]:
    """One ticker per line; blank lines and ``#`` comments ignored."""
    symbols = []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        line = line.split("#", 1)[0].strip()
        if line:
            symbols.append(line.upper())
    if len(set(symbols)) != len(symbols):
        raise ConfigError(f"duplicate tickers in universe file {path}")
    return tuple(symbols)


def config_from_dict(raw: Mapping, base_dir: Path | None = None) -> RunConfig:
    raw = dict(raw)
    base = base_dir or Path.cwd()

    def resolve(p) -> Path | None:
        if p is None:
            return None
        p = Path(p)
        return p if p.is_absolute() else base / p

    indicators = IndicatorParams(**_known(IndicatorParams, raw.pop("indicators", {}), "[indicators]"))
    prov_raw = _known(ProviderSettings, raw.pop("provider", {}), "[provider]")
    if "stub_script" in prov_raw:
        prov_raw["stub_script"] = resolve(prov_raw["stub_script"])
    provider = ProviderSettings(**prov_raw)

    universe = raw.pop("universe", None)
    universe_file = raw.pop("universe_file", None)
    if universe_file is not None:
        universe = read_universe(resolve(universe_file))
    elif universe is not None:
        universe = tuple(str(s).upper() for s in universe)

    kwargs = _known(RunConfig, raw, "config")
    for key in ("data_dir", "cache_dir"):
        if key in kwargs:
            kwargs[key] = resolve(kwargs[key])
    for key in ("start", "end"):
        if key in kwargs:
            kwargs[key] = _as_date(kwargs[key], key)
    if "baselines" in kwargs:
        kwargs["baselines"] = tuple(kwargs["baselines"])
    return RunConfig(universe=universe, indicators=indicators, provider=provider, **kwargs)


def load_config(path: str | Path) -> RunConfig:
    path = Path(path)
    try:
        raw = tomllib.loads(path.read_text(encoding="utf-8"))
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    return config_from_dict(raw, base_dir=path.parent)
