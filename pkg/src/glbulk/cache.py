"""JSON-lines results cache keyed by a canonical config hash.

One record per line.  A record's identity is the SHA-256 of its module name
plus identifying parameters (grid, tolerances, seed, schema version); rerunning
an identical configuration is a cache hit and returns the stored line
byte-for-byte unless forced.  Volatile metadata (wall time) lives outside the
hashed payload.
"""

from __future__ import annotations

import hashlib
import json
import os
from pathlib import Path

SCHEMA_VERSION = 1

__all__ = ["SCHEMA_VERSION", "config_hash", "make_record", "JsonlCache",
           "cache_dir"]


def _canonical(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def config_hash(module: str, params: dict) -> str:
    payload = {"module": module, "params": params, "schema_version": SCHEMA_VERSION}
    return hashlib.sha256(_canonical(payload).encode()).hexdigest()[:16]


def make_record(module: str, params: dict, results: dict, wall_time: float) -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "module": module,
        "hash": config_hash(module, params),
        "params": params,
        "results": results,
        "wall_time_s": round(wall_time, 3),
    }


def cache_dir(out_dir: str | os.PathLike) -> Path:
    env = os.environ.get("GLBULK_CACHE_DIR")
    d = Path(env) if env else Path(out_dir) / "cache"
    d.mkdir(parents=True, exist_ok=True)
    return d


class JsonlCache:
    """Append-only record store; lookups return the stored raw line."""

    def __init__(self, path: str | os.PathLike):
        self.path = Path(path)
        self._lines: dict[str, str] = {}
        if self.path.exists():
            for line in self.path.read_text().splitlines():
                line = line.strip()
                if not line:
                    continue
                try:
                    rec = json.loads(line)
                except json.JSONDecodeError:
                    continue
                h = rec.get("hash")
                if h:
                    self._lines.setdefault(h, line)

    def lookup(self, h: str) -> dict | None:
        line = self._lines.get(h)
        return json.loads(line) if line is not None else None

    def records(self) -> list[dict]:
        return [json.loads(line) for line in self._lines.values()]

    def lookup_raw(self, h: str) -> str | None:
        return self._lines.get(h)

    def append(self, record: dict) -> str:
        line = _canonical(record)
        h = record["hash"]
        if h not in self._lines:
            with open(self.path, "a", encoding="utf-8") as f:
                f.write(line + "\n")
            self._lines[h] = line
        return self._lines[h]

    def __len__(self) -> int:
        return len(self._lines)
