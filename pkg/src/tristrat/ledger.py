"""Append-only JSON-lines run ledger.

The first line is a header describing the run; each further line records one
settled week. Records are serialized with sorted keys and compact separators
so identical runs produce byte-identical files. A torn final line left by a
crash is discarded when the ledger is reopened.
"""

from __future__ import annotations

import json
import os
from pathlib import Path

from .errors import TristratError

SCHEMA_VERSION = 1


class LedgerError(TristratError):
    pass


def dumps(record: dict) -> str:
    return json.dumps(record, sort_keys=True, separators=(",", ":"), ensure_ascii=False, allow_nan=False)


def read_ledger(path: str | Path) -> tuple[dict | None, list[dict]]:
    """Return ``(header, week_records)``; ignores a trailing partial line."""
    path = Path(path)
    if not path.exists():
        return None, []
    text = path.read_text(encoding="utf-8")
    lines = text.split("\n")
    complete = lines[:-1]  # anything after the last newline is a torn write
    header, weeks = None, []
    for n, line in enumerate(complete, start=1):
        if not line.strip():
            continue
        try:
            rec = json.loads(line)
        except json.JSONDecodeError as exc:
            raise LedgerError(f"{path}:{n}: corrupt ledger line ({exc.msg})") from None
        if rec.get("record") == "header":
            header = rec
        elif rec.get("record") == "week":
            weeks.append(rec)
    return header, weeks


class Ledger:
    def __init__(self, path: str | Path):
        self.path = Path(path)

    def _truncate_torn_tail(self) -> None:
        if not self.path.exists():
            return
        data = self.path.read_bytes()
        cut = data.rfind(b"\n") + 1
        if cut != len(data):
            with open(self.path, "r+b") as fh:
                fh.truncate(cut)

    def open(self, header: dict, resume: bool = False) -> list[dict]:
        """Start a fresh ledger, or validate and reopen an existing one.

        Returns the week records already present (empty for a fresh run).
        """
        header = {"record": "header", "schema_version": SCHEMA_VERSION, **header}
        if resume and self.path.exists():
            self._truncate_torn_tail()
            existing, weeks = read_ledger(self.path)
            if existing is None:
                self.path.unlink()
            else:
                if existing != header:
                    raise LedgerError(f"{self.path}: ledger header does not match this run's configuration")
                return weeks
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self.path.write_text("", encoding="utf-8")
        self.append(header)
        return []

    def append(self, record: dict) -> None:
        line = dumps(record) + "\n"
        with open(self.path, "a", encoding="utf-8") as fh:
            fh.write(line)
            fh.flush()
            os.fsync(fh.fileno())
