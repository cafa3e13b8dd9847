"""Content-addressed on-disk store for provider outputs.

Entries live at ``<root>/<d[:2]>/<d[2:4]>/<d>.entry`` where ``d`` is the
SHA-256 of the canonical key. Each file is one JSON header line
(format version, key fields, payload checksum) followed by the payload.
Writes go to a temporary file in the same directory and are renamed into
place, so concurrent writers never expose a torn entry.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import tempfile
import threading
from dataclasses import asdict, dataclass
from enum import Enum
from pathlib import Path
from typing import Any

from filelock import FileLock

from .errors import StoreCorrupt, StoreUnwritable
from .types import text_digest

logger = logging.getLogger(__name__)

FORMAT_VERSION = 1
CACHE_DIR_ENV = "VARYBALANCE_CACHE_DIR"


class CacheKind(str, Enum):
    REWRITE = "rewrite"
    SCORE = "score"
    GENERATE = "generate"


def params_digest(params: dict[str, Any]) -> str:
    blob = json.dumps(params, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()[:16]


@dataclass(frozen=True)
class CacheKey:
    kind: CacheKind
    provider_id: str
    model_id: str
    text_digest: str
    prompt: str = ""
    params_digest: str = ""
    index: int = 0

    @classmethod
    def for_rewrite(cls, provider_id: str, model_id: str, prompt: str, params: dict[str, Any], text: str, index: int) -> CacheKey:
        return cls(CacheKind.REWRITE, provider_id, model_id, text_digest(text), prompt, params_digest(params), index)

    @classmethod
    def for_generation(cls, provider_id: str, model_id: str, params: dict[str, Any], question: str, index: int = 0) -> CacheKey:
        return cls(CacheKind.GENERATE, provider_id, model_id, text_digest(question), "", params_digest(params), index)

    @classmethod
    def for_score(cls, provider_id: str, model_id: str, text: str) -> CacheKey:
        return cls(CacheKind.SCORE, provider_id, model_id, text_digest(text))

    def fields(self) -> dict[str, Any]:
        out = asdict(self)
        out["kind"] = self.kind.value
        return out

    @property
    def digest(self) -> str:
        blob = json.dumps(self.fields(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode("utf-8")).hexdigest()


class DiskCache:
    """Durable key/value store keyed by :class:`CacheKey`.

    Values are JSON-serializable objects. ``hits`` and ``misses`` count
    lookups made through this instance.
    """

    def __init__(self, root: str | os.PathLike[str], *, version: int = FORMAT_VERSION) -> None:
        self.root = Path(root)
        self.version = version
        self.hits = 0
        self.misses = 0
        self._lock = threading.Lock()
        try:
            self.root.mkdir(parents=True, exist_ok=True)
        except OSError as exc:
            raise StoreUnwritable(f"cannot create cache root {self.root}: {exc}") from exc

    def path_for(self, key: CacheKey) -> Path:
        d = key.digest
        return self.root / d[:2] / d[2:4] / f"{d}.entry"

    def _count(self, hit: bool) -> None:
        with self._lock:
            if hit:
                self.hits += 1
            else:
                self.misses += 1

    def get(self, key: CacheKey) -> Any | None:
        path = self.path_for(key)
        try:
            raw = path.read_bytes()
        except FileNotFoundError:
            self._count(False)
            return None
        try:
            value = self._decode(raw, key)
        except StoreCorrupt as exc:
            logger.warning("quarantining corrupt cache entry %s: %s", path, exc)
            self._quarantine(path)
            value = None
        self._count(value is not None)
        return value

    def _decode(self, raw: bytes, key: CacheKey) -> Any | None:
        head, sep, payload = raw.partition(b"\n")
        if not sep:
            raise StoreCorrupt("missing header terminator")
        try:
            header = json.loads(head)
        except json.JSONDecodeError as exc:
            raise StoreCorrupt(f"unreadable header: {exc}") from exc
        if header.get("version") != self.version:
            return None
        if header.get("key") != key.fields():
            return None
        if hashlib.sha256(payload).hexdigest() != header.get("checksum"):
            raise StoreCorrupt("checksum mismatch")
        return json.loads(payload)

    def _quarantine(self, path: Path) -> None:
        qdir = self.root / "quarantine"
        try:
            qdir.mkdir(exist_ok=True)
            os.replace(path, qdir / path.name)
        except OSError:
            logger.warning("could not quarantine %s", path)

    def put(self, key: CacheKey, value: Any) -> None:
        payload = json.dumps(value, sort_keys=True, ensure_ascii=False, separators=(",", ":")).encode("utf-8")
        header = {"version": self.version, "key": key.fields(), "checksum": hashlib.sha256(payload).hexdigest()}
        data = json.dumps(header, sort_keys=True).encode("utf-8") + b"\n" + payload
        path = self.path_for(key)
        try:
            path.parent.mkdir(parents=True, exist_ok=True)
            fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=".tmp-")
            try:
                with os.fdopen(fd, "wb") as fh:
                    fh.write(data)
                    fh.flush()
                    os.fsync(fh.fileno())
                os.replace(tmp, path)
            except BaseException:
                Path(tmp).unlink(missing_ok=True)
                raise
        except OSError as exc:
            raise StoreUnwritable(f"cannot write cache entry {path}: {exc}") from exc

    def __contains__(self, key: CacheKey) -> bool:
        return self.path_for(key).exists()

    # -- statistics ---------------------------------------------------------

    def entries(self) -> dict[str, int]:
        counts: dict[str, int] = {}
        for path in self.root.glob("??/??/*.entry"):
            try:
                with path.open("rb") as fh:
                    header = json.loads(fh.readline())
                kind = header["key"]["kind"]
            except (OSError, ValueError, KeyError):
                kind = "unreadable"
            counts[kind] = counts.get(kind, 0) + 1
        return dict(sorted(counts.items()))

    @property
    def _stats_path(self) -> Path:
        return self.root / "stats.json"

    def flush_stats(self) -> None:
        """Fold this instance's hit/miss counters into the persistent totals."""
        with FileLock(str(self.root / "stats.lock")):
            totals = self.load_stats()
            totals["hits"] += self.hits
            totals["misses"] += self.misses
            totals["runs"] += 1
            tmp = self._stats_path.with_suffix(".tmp")
            tmp.write_text(json.dumps(totals, sort_keys=True))
            os.replace(tmp, self._stats_path)
        with self._lock:
            self.hits = self.misses = 0

    def load_stats(self) -> dict[str, int]:
        try:
            data = json.loads(self._stats_path.read_text())
        except (FileNotFoundError, ValueError):
            data = {}
        return {"hits": int(data.get("hits", 0)), "misses": int(data.get("misses", 0)), "runs": int(data.get("runs", 0))}

    def stats(self) -> dict[str, Any]:
        totals = self.load_stats()
        lookups = totals["hits"] + totals["misses"]
        return {
            "root": str(self.root),
            "entries": self.entries(),
            "hits": totals["hits"],
            "misses": totals["misses"],
            "runs": totals["runs"],
            "hit_rate": totals["hits"] / lookups if lookups else None,
        }


def default_cache_dir() -> Path:
    env = os.environ.get(CACHE_DIR_ENV)
    if env:
        return Path(env)
    return Path(os.environ.get("XDG_CACHE_HOME", Path.home() / ".cache")) / "varybalance"
