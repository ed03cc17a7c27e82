"""Exact cosine search over unit vectors.

This is the reference structure the quantized index is tested against, and
the re-scoring backend for citation tracing.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import IntegrityError, ValidationError

UNIT_NORM_TOL = 1e-6


@dataclass
class SearchHit:
    key: str
    score: float


def check_unit_rows(vectors: np.ndarray, what: str) -> np.ndarray:
    vectors = np.asarray(vectors, dtype=np.float64)
    if vectors.ndim != 2:
        raise IntegrityError(f"{what} must be a 2-d array, got shape {vectors.shape}")
    norms = np.linalg.norm(vectors, axis=1)
    if not np.all(np.abs(norms - 1.0) <= UNIT_NORM_TOL):
        raise IntegrityError(f"{what} rows must be unit norm (tolerance {UNIT_NORM_TOL})")
    return vectors


def check_query(query: np.ndarray, dim: int) -> np.ndarray:
    query = np.asarray(query, dtype=np.float64).reshape(-1)
    if query.shape[0] != dim:
        raise IntegrityError(f"query dim {query.shape[0]} does not match index dim {dim}")
    if abs(float(np.linalg.norm(query)) - 1.0) > UNIT_NORM_TOL:
        raise ValidationError("query must be unit norm")
    return query


def rank_hits(scores: np.ndarray, ids: np.ndarray, k: int) -> list[SearchHit]:
    """Top-k by descending score, ties broken by ascending key."""
    order = np.lexsort((ids, -scores))
    top = order[: min(k, len(order))]
    return [SearchHit(key=str(ids[i]), score=float(scores[i])) for i in top]


@dataclass
class FlatIndex:
    vectors: np.ndarray  # (N, dim) float64 unit rows
    ids: np.ndarray  # (N,) unicode keys

    @property
    def dim(self) -> int:
        return int(self.vectors.shape[1])

    def __len__(self) -> int:
        return int(self.vectors.shape[0])

    def search(self, query: np.ndarray, k: int) -> list[SearchHit]:
        if k <= 0:
            raise ValidationError("k must be positive")
        q = check_query(query, self.dim)
        scores = np.clip(self.vectors @ q, -1.0, 1.0)
        return rank_hits(scores, self.ids, k)


def build_flat(vectors: np.ndarray, ids: list[str]) -> FlatIndex:
    vectors = check_unit_rows(vectors, "flat index vectors")
    if len(ids) != vectors.shape[0]:
        raise IntegrityError(f"{len(ids)} ids for {vectors.shape[0]} vectors")
    if len(set(ids)) != len(ids):
        raise IntegrityError("index ids must be unique")
    return FlatIndex(vectors=vectors, ids=np.asarray(ids, dtype=np.str_))
