"""Append-only JSON-lines cache of provider translations.

One line per stored result: {"provider", "src", "tgt", "text", "result", "ts"}.
Lookups are keyed by the hash of all four request components, so a hit means
no network call for that (provider, source, target, text) quadruple.
"""
from __future__ import annotations
import json
import logging
import threading
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Dict, Optional

from .utils import ensure_dir, stable_key

log = logging.getLogger(__name__)


def cache_key(provider: str, src: str, tgt: str, text: str) -> str:
    return stable_key(provider, src, tgt, text)


@dataclass
class TranslationCache:
    """In-memory index over an optional on-disk JSON-lines file.

    Reads are lock-free dict lookups; appends are serialized by a lock.
    `path=None` keeps the cache in memory only.
    """

    path: Optional[Path] = None
    hits: int = 0
    misses: int = 0
    _entries: Dict[str, str] = field(default_factory=dict, repr=False)
    _lock: threading.Lock = field(default_factory=threading.Lock, repr=False)
    skipped_lines: int = 0

    def __post_init__(self) -> None:
        if self.path is not None:
            self.path = Path(self.path).expanduser()
            self._load()

    def _load(self) -> None:
        if self.path is None or not self.path.exists():
            return
        with self.path.open("r", encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if not line:
                    continue
                try:
                    rec = json.loads(line)
                    key = cache_key(rec["provider"], rec["src"], rec["tgt"], rec["text"])
                    self._entries[key] = rec["result"]
                except (ValueError, KeyError, TypeError):
                    # a torn final line from an interrupted run
                    self.skipped_lines += 1
        if self.skipped_lines:
            log.warning("Ignored %d unreadable line(s) in cache %s", self.skipped_lines, self.path)
        log.debug("Loaded %d cached translations from %s", len(self._entries), self.path)

    def __len__(self) -> int:
        return len(self._entries)

    def get(self, provider: str, src: str, tgt: str, text: str) -> Optional[str]:
        value = self._entries.get(cache_key(provider, src, tgt, text))
        with self._lock:
            if value is None:
                self.misses += 1
            else:
                self.hits += 1
        return value

    def put(self, provider: str, src: str, tgt: str, text: str, result: str) -> None:
        key = cache_key(provider, src, tgt, text)
        with self._lock:
            if self._entries.get(key) == result:
                return
            self._entries[key] = result
            if self.path is None:
                return
            rec = {
                "provider": provider, "src": src, "tgt": tgt, "text": text, "result": result,
                "ts": datetime.now(timezone.utc).isoformat(timespec="seconds"),
            }
            ensure_dir(self.path.parent)
            with self.path.open("a", encoding="utf-8") as fh:
                fh.write(json.dumps(rec, ensure_ascii=False) + "\n")

    def stats(self) -> Dict[str, object]:
        size = self.path.stat().st_size if self.path is not None and self.path.exists() else 0
        lookups = self.hits + self.misses
        return {
            "path": str(self.path) if self.path is not None else None,
            "entries": len(self._entries),
            "bytes": size,
            "hits": self.hits,
            "misses": self.misses,
            "hit_rate": self.hits / lookups if lookups else 0.0,
        }

    def clear(self) -> int:
        """Drop every entry (and the file). Returns the number of entries removed."""
        with self._lock:
            n = len(self._entries)
            self._entries.clear()
            self.hits = self.misses = 0
            if self.path is not None and self.path.exists():
                self.path.unlink()
        return n
