"""Weekly LLM-agent portfolio construction with strategy refinement and a reproducible backtester."""

from .backtest import EquityCurve, run_settlement
from .config import RunConfig, load_config
from .market_data import MarketData, build_trading_calendar
from .metrics import MetricsReport, compute_metrics
from .pipeline import Backtester, run_backtest
from .portfolio import Portfolio

__version__ = "0.1.0"

__all__ = [
    "Backtester", "EquityCurve", "MarketData", "MetricsReport", "Portfolio", "RunConfig",
    "build_trading_calendar", "compute_metrics", "load_config", "run_backtest", "run_settlement",
]
