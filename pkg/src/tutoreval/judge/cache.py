"""Content-addressed on-disk store of raw judge replies."""
from __future__ import annotations

import hashlib
import json
import os
import tempfile
import threading
from collections import defaultdict
from pathlib import Path


def cache_key(identity: dict, template_hash: str, task: str, inputs: dict) -> str:
    material = {"identity": identity, "template": template_hash, "task": task, "inputs": inputs}
    blob = json.dumps(material, sort_keys=True, ensure_ascii=False, separators=(",", ":"))
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()


class ReplyCache:
    """One JSON file per key under ``root/<first two hex chars>/``.

    Writes go through a temp file and ``os.replace`` so concurrent readers
    never see a partial entry; writers to the same key are serialised by a
    per-key lock.
    """

    def __init__(self, root: str | Path):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        self.hits = 0
        self.misses = 0
        self._locks: dict[str, threading.Lock] = defaultdict(threading.Lock)
        self._guard = threading.Lock()

    def _path(self, key: str) -> Path:
        return self.root / key[:2] / f"{key}.json"

    def lock(self, key: str) -> threading.Lock:
        with self._guard:
            return self._locks[key]

    def get(self, key: str) -> list[str] | None:
        path = self._path(key)
        try:
            with open(path, encoding="utf-8") as fh:
                entry = json.load(fh)
        except FileNotFoundError:
            with self._guard:
                self.misses += 1
            return None
        with self._guard:
            self.hits += 1
        return list(entry["replies"])

    def put(self, key: str, replies: list[str], meta: dict | None = None) -> None:
        path = self._path(key)
        path.parent.mkdir(parents=True, exist_ok=True)
        entry = {"key": key, "replies": list(replies), "meta": meta or {}}
        fd, tmp = tempfile.mkstemp(dir=path.parent, suffix=".tmp")
        try:
            with os.fdopen(fd, "w", encoding="utf-8") as fh:
                json.dump(entry, fh, sort_keys=True, ensure_ascii=False)
            os.replace(tmp, path)
        except BaseException:
            if os.path.exists(tmp):
                os.unlink(tmp)
            raise

    def __contains__(self, key: str) -> bool:
        return self._path(key).exists()
