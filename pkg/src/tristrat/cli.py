"""Command-line entry point: ``tristrat ingest | backtest | report | synth``."""

from __future__ import annotations

import argparse
import logging
import sys
from datetime import date
from pathlib import Path
from typing import Sequence

from .agents import ProviderError
from .baselines import BASELINES
from .config import AGENT_MODE, RunConfig, load_config
from .errors import TristratError
from .ledger import read_ledger
from .market_data import (
    dump_daily_bars,
    dump_fundamentals,
    dump_news,
    load_daily_bars,
    load_fundamentals,
    load_news,
)
from .metrics import compute_metrics
from .pipeline import run_backtest
from .synthetic import generate_market, write_store

EXIT_OK, EXIT_ERROR, EXIT_USAGE = 0, 1, 2

_STORE_FILES = {"bars": "bars.csv", "news": "news.jsonl", "fundamentals": "fundamentals.jsonl"}


def _kind_of(path: Path) -> str:
    name = path.name.lower()
    if "news" in name:
        return "news"
    if "fund" in name:
        return "fundamentals"
    return "bars"


def _schema_of(path: Path) -> str:
    suffix = path.suffix.lower()
    return {".json": "json", ".jsonl": "jsonl"}.get(suffix, "csv")


def cmd_ingest(args: argparse.Namespace) -> int:
    out = Path(args.out)
    loaded: dict[str, list] = {}
    failed = False
    for raw in args.paths:
        path = Path(raw)
        kind = _kind_of(path)
        if kind in loaded:
            print(f"{path}: a second {kind} file was given; merge inputs first", file=sys.stderr)
            failed = True
            continue
        try:
            if kind == "bars":
                items = load_daily_bars(path, schema=_schema_of(path))
            elif kind == "news":
                items = load_news(path)
            else:
                items = load_fundamentals(path)
        except (OSError, TristratError) as exc:
            print(f"{path}: {exc}", file=sys.stderr)
            failed = True
            continue
        loaded[kind] = items
        print(f"{path}: {len(items)} {kind} records")
    if failed:
        return EXIT_ERROR
    if "bars" not in loaded:
        print("no price file given (expected a bars CSV/JSON file)", file=sys.stderr)
        return EXIT_ERROR
    out.mkdir(parents=True, exist_ok=True)
    dumpers = {"bars": dump_daily_bars, "news": dump_news, "fundamentals": dump_fundamentals}
    for kind, items in loaded.items():
        (out / _STORE_FILES[kind]).write_text(dumpers[kind](items), encoding="utf-8")
    print(f"wrote canonical store to {out}")
    return EXIT_OK


def _config_for(args: argparse.Namespace) -> RunConfig:
    config = load_config(args.config)
    mode = AGENT_MODE if args.agents else args.baseline
    start = date.fromisoformat(args.start) if args.start else None
    end = date.fromisoformat(args.end) if args.end else None
    return config.with_overrides(
        mode=mode,
        data_dir=Path(args.data) if args.data else None,
        start=start,
        end=end,
        concurrency=args.concurrency,
    )


def cmd_backtest(args: argparse.Namespace) -> int:
    if args.replay and not args.agents:
        print("--replay only applies to --agents runs", file=sys.stderr)
        return EXIT_USAGE
    try:
        config = _config_for(args)
        result = run_backtest(config, args.out, replay_dir=args.replay, resume=args.resume)
    except ProviderError as exc:
        print(f"agent provider error: {exc}", file=sys.stderr)
        if args.replay:
            print("the replay cache does not cover this run; rerun live to record the missing responses",
                  file=sys.stderr)
        return EXIT_ERROR
    except (OSError, ValueError, TristratError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    m = result.metrics
    print(f"{config.mode}: {m.weeks} weeks, outputs in {args.out}")
    print(format_table([(config.mode, m)]))
    return EXIT_OK


def _fmt(value: float | None, pct: bool = False) -> str:
    if value is None:
        return "n/a"
    return f"{value * 100:.2f}" if pct else f"{value:.4f}"


def format_table(rows: Sequence[tuple[str, object]]) -> str:
    header = ("run", "weeks", "AR(%)", "SR", "CR", "MDD(%)")
    body = [
        (name, str(m.weeks), _fmt(m.accumulated_return, True), _fmt(m.sharpe), _fmt(m.calmar),
         _fmt(m.max_drawdown, True))
        for name, m in rows
    ]
    widths = [max(len(r[i]) for r in [header, *body]) for i in range(len(header))]
    lines = []
    for r in [header, *body]:
        cells = [r[0].ljust(widths[0])] + [c.rjust(w) for c, w in zip(r[1:], widths[1:])]
        lines.append("  ".join(cells))
    return "\n".join(lines)


def cmd_report(args: argparse.Namespace) -> int:
    rows = []
    status = EXIT_OK
    for raw in args.ledgers:
        path = Path(raw)
        try:
            header, weeks = read_ledger(path)
        except (OSError, TristratError) as exc:
            print(f"{path}: {exc}", file=sys.stderr)
            status = EXIT_ERROR
            continue
        if header is None and not weeks and not path.exists():
            print(f"{path}: no such ledger", file=sys.stderr)
            status = EXIT_ERROR
            continue
        if not weeks:
            print(f"{path}: no completed weeks")
            continue
        name = f"{(header or {}).get('mode', '?')} ({path})"
        rows.append((name, compute_metrics([w["portfolio_return"] for w in weeks])))
    if rows:
        print(format_table(rows))
    return status


def cmd_synth(args: argparse.Namespace) -> int:
    symbols = tuple(s.strip().upper() for s in args.symbols.split(",") if s.strip())
    data = generate_market(symbols, weeks=args.weeks, seed=args.seed)
    out = write_store(data, args.out)
    print(f"wrote {len(data.bars)} bars, {len(data.news)} news, {len(data.fundamentals)} reports to {out}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="tristrat", description="LLM-agent weekly portfolio backtester")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress per week")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="validate raw files into a canonical data store")
    p.add_argument("paths", nargs="+", help="bars (CSV/JSON/JSONL), news JSONL, fundamentals JSONL; "
                                             "kind is taken from the file name")
    p.add_argument("--out", required=True, help="data store directory")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("backtest", help="run the agent pipeline or a baseline")
    p.add_argument("--config", required=True, help="TOML run configuration")
    which = p.add_mutually_exclusive_group(required=True)
    which.add_argument("--baseline", choices=BASELINES)
    which.add_argument("--agents", action="store_true")
    p.add_argument("--replay", metavar="CACHE_DIR", help="serve every agent call from this response cache")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--resume", action="store_true", help="continue from an existing ledger in --out")
    p.add_argument("--data", help="override data_dir")
    p.add_argument("--start", help="override start date (YYYY-MM-DD)")
    p.add_argument("--end", help="override end date (YYYY-MM-DD)")
    p.add_argument("--concurrency", type=int, help="override the per-week agent call cap")
    p.set_defaults(func=cmd_backtest)

    p = sub.add_parser("report", help="summarize one or more ledgers")
    p.add_argument("ledgers", nargs="+")
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("synth", help="write a deterministic synthetic data store")
    p.add_argument("--out", required=True)
    p.add_argument("--weeks", type=int, default=12)
    p.add_argument("--seed", type=int, default=7)
    p.add_argument("--symbols", default="AAA,BBB,CCC,DDD,EEE,FFF")
    p.set_defaults(func=cmd_synth)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
