"""Content-addressed on-disk embedding cache.

Keyed by (model tag, text content hash); never invalidated implicitly.
Embedding cost dominates re-runs over a book-sized corpus, so cached vectors
are kept bit-exact (.npy) and written atomically.
"""

from __future__ import annotations

import hashlib
import os
import tempfile
from pathlib import Path

import numpy as np


def cache_key(model_tag: str, text: str) -> str:
    return hashlib.sha256(f"{model_tag}\x00{text}".encode("utf-8")).hexdigest()


class EmbeddingCache:
    def __init__(self, directory: str | Path):
        self.directory = Path(directory)

    def _path(self, key: str) -> Path:
        return self.directory / key[:2] / f"{key}.npy"

    def get(self, key: str) -> np.ndarray | None:
        path = self._path(key)
        if not path.is_file():
            return None
        return np.load(path)

    def put(self, key: str, vector: np.ndarray) -> None:
        path = self._path(key)
        path.parent.mkdir(parents=True, exist_ok=True)
        fd, tmp = tempfile.mkstemp(dir=path.parent, suffix=".tmp")
        try:
            with os.fdopen(fd, "wb") as fh:
                np.save(fh, np.asarray(vector, dtype=np.float64))
            os.replace(tmp, path)
        except BaseException:
            if os.path.exists(tmp):
                os.unlink(tmp)
            raise
