"""Persistent response cache, the unit of checkpointing for scoring runs.

Layout: one append-only JSONL segment per backend identity plus an
``index.json`` mapping identities to segment files. Entries are keyed by
(identity, operation, content hash); values are the JSON-serialized
responses, so a hit replays the original response byte for byte. Appends
are flushed immediately: killing a run loses at most the entry being
written, and a rerun resumes from whatever made it to disk.

Re-writing an existing key appends a new line; the loader takes the last
occurrence (last writer wins, and deterministic backends only ever rewrite
identical values). The cache is safe for concurrent use from worker threads
of one process.
"""

from __future__ import annotations

import hashlib
import json
import re
import threading
from pathlib import Path
from typing import IO, Any

from ..errors import DataError

_INDEX_FILE = "index.json"
_SANITIZE_RE = re.compile(r"[^A-Za-z0-9._-]+")


def _segment_name(identity: str) -> str:
    stem = _SANITIZE_RE.sub("_", identity)[:80].strip("_") or "segment"
    digest = hashlib.sha256(identity.encode("utf-8")).hexdigest()[:10]
    return f"{stem}-{digest}.jsonl"


class ScoreCache:
    """(identity, op, key) -> JSON value store backed by per-identity segments."""

    def __init__(self, cache_dir: str | Path):
        self._dir = Path(cache_dir)
        self._dir.mkdir(parents=True, exist_ok=True)
        self._lock = threading.RLock()
        self._store: dict[tuple[str, str, str], Any] = {}
        self._segments: dict[str, str] = {}
        self._handles: dict[str, IO[str]] = {}
        self.hits = 0
        self.misses = 0
        self._load()

    @property
    def directory(self) -> Path:
        return self._dir

    def _load(self) -> None:
        index_path = self._dir / _INDEX_FILE
        if not index_path.exists():
            return
        try:
            index = json.loads(index_path.read_text(encoding="utf-8"))
            segments = dict(index["segments"])
        except (OSError, json.JSONDecodeError, KeyError, TypeError) as exc:
            raise DataError(f"corrupt cache index {index_path}: {exc}") from exc
        for identity, filename in segments.items():
            path = self._dir / filename
            if not path.exists():
                continue  # purged or partially copied cache; just skip
            self._segments[identity] = filename
            with path.open("r", encoding="utf-8") as handle:
                for lineno, line in enumerate(handle, start=1):
                    line = line.strip()
                    if not line:
                        continue
                    try:
                        record = json.loads(line)
                        self._store[(identity, record["op"], record["key"])] = record["value"]
                    except (json.JSONDecodeError, KeyError, TypeError):
                        # A torn final line from a killed run is expected;
                        # drop it and let the entry be recomputed.
                        continue

    def _write_index(self) -> None:
        index_path = self._dir / _INDEX_FILE
        tmp_path = index_path.with_suffix(".json.tmp")
        tmp_path.write_text(
            json.dumps({"segments": self._segments}, sort_keys=True, indent=2) + "\n",
            encoding="utf-8",
        )
        tmp_path.replace(index_path)

    def _handle_for(self, identity: str) -> IO[str]:
        handle = self._handles.get(identity)
        if handle is None:
            if identity not in self._segments:
                self._segments[identity] = _segment_name(identity)
                self._write_index()
            path = self._dir / self._segments[identity]
            handle = path.open("a", encoding="utf-8")
            self._handles[identity] = handle
        return handle

    def lookup(self, identity: str, op: str, key: str) -> tuple[bool, Any]:
        with self._lock:
            entry = (identity, op, key)
            if entry in self._store:
                self.hits += 1
                return True, self._store[entry]
            self.misses += 1
            return False, None

    def store(self, identity: str, op: str, key: str, value: Any) -> None:
        line = json.dumps({"op": op, "key": key, "value": value}, sort_keys=True)
        with self._lock:
            self._store[(identity, op, key)] = value
            handle = self._handle_for(identity)
            handle.write(line + "\n")
            handle.flush()

    def flush(self) -> None:
        with self._lock:
            for handle in self._handles.values():
                handle.flush()

    def close(self) -> None:
        with self._lock:
            for handle in self._handles.values():
                handle.close()
            self._handles.clear()

    def __enter__(self) -> ScoreCache:
        return self

    def __exit__(self, *exc_info) -> None:
        self.close()

    def stats(self) -> dict:
        with self._lock:
            by_identity: dict[str, int] = {}
            for identity, _, _ in self._store:
                by_identity[identity] = by_identity.get(identity, 0) + 1
            total_bytes = sum(
                (self._dir / name).stat().st_size
                for name in self._segments.values()
                if (self._dir / name).exists()
            )
            attempts = self.hits + self.misses
            return {
                "directory": str(self._dir),
                "entries": len(self._store),
                "entries_by_identity": dict(sorted(by_identity.items())),
                "segment_bytes": total_bytes,
                "hits": self.hits,
                "misses": self.misses,
                "hit_ratio": (self.hits / attempts) if attempts else None,
            }

    def purge(self) -> int:
        """Delete all segments and the index; returns entries removed."""
        with self._lock:
            removed = len(self._store)
            self.close()
            for filename in self._segments.values():
                path = self._dir / filename
                if path.exists():
                    path.unlink()
            index_path = self._dir / _INDEX_FILE
            if index_path.exists():
                index_path.unlink()
            self._segments.clear()
            self._store.clear()
            return removed
