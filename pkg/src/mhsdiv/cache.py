"""On-disk result cache: one human-readable JSON file per key.

Keys are canonical JSON strings of the operation and its inputs (composition, prime,
budget, ...); file names are their SHA-256 digests.  Only the ``value`` field is ever
replayed, so the timestamp stored next to it never reaches command output.
"""
from __future__ import annotations

import hashlib
import json
import os
import tempfile
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Optional

SCHEMA_VERSION = 1
CACHE_ENV = "MHSDIV_CACHE_DIR"


def default_cache_dir() -> Path:
    env = os.environ.get(CACHE_ENV)
    if env:
        return Path(env)
    base = os.environ.get("XDG_CACHE_HOME") or os.path.join(os.path.expanduser("~"), ".cache")
    return Path(base) / "mhsdiv"


def canonical_key(operation: str, **params: Any) -> str:
    return json.dumps({"operation": operation, **params}, sort_keys=True, separators=(",", ":"))


def dumps(value: Any) -> str:
    """The single serializer used for payloads: sorted keys, fixed indentation."""
    return json.dumps(value, sort_keys=True, indent=2)


@dataclass(frozen=True)
class CacheEntry:
    key: str
    value: Any
    version: int
    timestamp: float

    def to_dict(self) -> dict:
        return {"key": self.key, "value": self.value, "version": self.version,
                "timestamp": self.timestamp}


class ResultCache:
    def __init__(self, directory: Optional[os.PathLike] = None, version: int = SCHEMA_VERSION):
        self.directory = Path(directory) if directory is not None else default_cache_dir()
        self.version = version

    def path(self, key: str) -> Path:
        return self.directory / (hashlib.sha256(key.encode()).hexdigest() + ".json")

    def get(self, key: str) -> Optional[CacheEntry]:
        path = self.path(key)
        try:
            data = json.loads(path.read_text())
        except (FileNotFoundError, json.JSONDecodeError):
            return None
        # a digest collision or an older schema is treated as a miss
        if data.get("key") != key or data.get("version") != self.version:
            return None
        return CacheEntry(key, data["value"], data["version"], data["timestamp"])

    def put(self, key: str, value: Any) -> CacheEntry:
        self.directory.mkdir(parents=True, exist_ok=True)
        entry = CacheEntry(key, value, self.version, time.time())
        fd, tmp = tempfile.mkstemp(dir=self.directory, suffix=".tmp")
        with os.fdopen(fd, "w") as fh:
            fh.write(dumps(entry.to_dict()) + "\n")
        os.replace(tmp, self.path(key))
        return entry

    def fetch(self, key: str, compute) -> tuple[Any, bool]:
        """(value, hit): the cached value, or ``compute()`` stored under ``key``."""
        entry = self.get(key)
        if entry is not None:
            return entry.value, True
        value = compute()
        # round-trip through JSON so fresh and replayed values are the same objects
        value = json.loads(json.dumps(value))
        self.put(key, value)
        return value, False


class NullCache(ResultCache):
    """Cache that never stores anything."""

    def __init__(self):
        super().__init__(directory=".", version=SCHEMA_VERSION)

    def get(self, key):
        return None

    def put(self, key, value):
        return CacheEntry(key, value, self.version, 0.0)
