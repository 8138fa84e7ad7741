"""Content-addressed response cache.

Entries live at ``<root>/<first-2-hex>/<digest>.json`` and hold both the
request and the response, so a cache directory doubles as an audit log and
as the replay source for offline runs.
"""

from __future__ import annotations

import hashlib
import json
import os
import tempfile
import threading
from dataclasses import dataclass
from pathlib import Path


@dataclass(frozen=True)
class CacheKey:
    digest: str

    def __str__(self) -> str:
        return self.digest


def canonical_json(obj) -> str:
    return json.dumps(obj, ensure_ascii=False, sort_keys=True, separators=(",", ":"))


def digest_of(obj) -> str:
    return hashlib.sha256(canonical_json(obj).encode("utf-8")).hexdigest()


class MemoryCache:
    """Process-local cache with the same interface as :class:`ResponseCache`."""

    def __init__(self):
        self._entries: dict[str, dict] = {}
        self._lock = threading.Lock()

    def get(self, key: CacheKey) -> dict | None:
        with self._lock:
            return self._entries.get(key.digest)

    def put(self, key: CacheKey, entry: dict) -> None:
        with self._lock:
            self._entries[key.digest] = entry

    def __len__(self) -> int:
        return len(self._entries)


class ResponseCache:
    def __init__(self, root):
        self.root = Path(root)

    def path_for(self, key: CacheKey) -> Path:
        return self.root / key.digest[:2] / f"{key.digest}.json"

    def get(self, key: CacheKey) -> dict | None:
        path = self.path_for(key)
        try:
            with open(path, encoding="utf-8") as fh:
                return json.load(fh)
        except FileNotFoundError:
            return None
        except (OSError, json.JSONDecodeError):
            # a torn or corrupt entry behaves as a miss; `gc` removes it
            return None

    def put(self, key: CacheKey, entry: dict) -> None:
        path = self.path_for(key)
        path.parent.mkdir(parents=True, exist_ok=True)
        fd, tmp = tempfile.mkstemp(prefix=".", suffix=".tmp", dir=path.parent)
        try:
            with os.fdopen(fd, "w", encoding="utf-8") as fh:
                json.dump(entry, fh, ensure_ascii=False, indent=2, sort_keys=True)
                fh.write("\n")
            os.replace(tmp, path)
        except BaseException:
            try:
                os.unlink(tmp)
            except OSError:
                pass
            raise

    def entries(self):
        if not self.root.is_dir():
            return
        yield from sorted(self.root.glob("??/*.json"))

    def stats(self) -> dict:
        files = list(self.entries())
        return {
            "root": str(self.root),
            "entries": len(files),
            "bytes": sum(f.stat().st_size for f in files),
            "stray_tmp": len(list(self.root.glob("??/.*.tmp"))) if self.root.is_dir() else 0,
        }

    def gc(self) -> int:
        """Delete interrupted temp files and unreadable or misfiled entries."""
        removed = 0
        if not self.root.is_dir():
            return 0
        for tmp in self.root.glob("??/.*.tmp"):
            tmp.unlink(missing_ok=True)
            removed += 1
        for path in list(self.entries()):
            ok = path.parent.name == path.stem[:2]
            if ok:
                try:
                    with open(path, encoding="utf-8") as fh:
                        entry = json.load(fh)
                    ok = isinstance(entry, dict) and "response" in entry
                except (OSError, json.JSONDecodeError):
                    ok = False
            if not ok:
                path.unlink(missing_ok=True)
                removed += 1
        return removed
