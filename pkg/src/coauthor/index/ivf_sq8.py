"""Inverted-file index with 8-bit scalar quantization.

Rows are partitioned into nlist k-means clusters; each stored vector is
encoded per dimension as an unsigned byte over the corpus min/max range. A
query scans only the nprobe posting lists whose centroids are nearest (by
Euclidean distance, the same metric that assigned rows to lists), scoring
candidates on their decoded vectors. Build is deterministic for a fixed
seed, and result ordering breaks ties by ascending key, so searches are
reproducible bit for bit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..errors import IntegrityError, ValidationError
from .flat import SearchHit, check_query, check_unit_rows, rank_hits

KMEANS_MAX_ITER = 25
KMEANS_TOL = 1e-4


def default_nlist(n: int) -> int:
    return max(1, round(math.sqrt(n)))


def default_nprobe(nlist: int) -> int:
    return max(1, nlist // 8)


def kmeans(
    vectors: np.ndarray, k: int, seed: int, max_iter: int = KMEANS_MAX_ITER, tol: float = KMEANS_TOL
) -> tuple[np.ndarray, np.ndarray]:
    """Lloyd iterations with k-means++ seeding; returns (centroids, assignments).

    Deterministic for a fixed seed: ties in assignment go to the lowest
    cluster id, and an emptied cluster is reseeded on the point currently
    farthest from its centroid.
    """
    n = vectors.shape[0]
    rng = np.random.default_rng(seed)

    centroids = np.empty((k, vectors.shape[1]), dtype=np.float64)
    centroids[0] = vectors[rng.integers(n)]
    d2 = np.sum((vectors - centroids[0]) ** 2, axis=1)
    for j in range(1, k):
        total = float(d2.sum())
        if total <= 0:
            centroids[j] = vectors[rng.integers(n)]
        else:
            centroids[j] = vectors[rng.choice(n, p=d2 / total)]
        d2 = np.minimum(d2, np.sum((vectors - centroids[j]) ** 2, axis=1))

    assignments = np.zeros(n, dtype=np.int64)
    for _ in range(max_iter):
        dists = _sq_distances(vectors, centroids)
        assignments = np.argmin(dists, axis=1)
        new_centroids = centroids.copy()
        for j in range(k):
            members = assignments == j
            if members.any():
                new_centroids[j] = vectors[members].mean(axis=0)
        # reseed empty clusters on the currently worst-served points
        point_d2 = dists[np.arange(n), assignments]
        for j in range(k):
            if not (assignments == j).any():
                worst = int(np.argmax(point_d2))
                new_centroids[j] = vectors[worst]
                assignments[worst] = j
                point_d2[worst] = 0.0
        shift = float(np.max(np.linalg.norm(new_centroids - centroids, axis=1)))
        centroids = new_centroids
        if shift < tol:
            break
    dists = _sq_distances(vectors, centroids)
    assignments = np.argmin(dists, axis=1)
    return centroids, assignments


def _sq_distances(vectors: np.ndarray, centroids: np.ndarray) -> np.ndarray:
    # ||v - c||^2 = ||v||^2 - 2 v.c + ||c||^2, computed blockwise-free
    v2 = np.sum(vectors**2, axis=1)[:, None]
    c2 = np.sum(centroids**2, axis=1)[None, :]
    return np.maximum(v2 - 2.0 * (vectors @ centroids.T) + c2, 0.0)


@dataclass
class IvfSq8Index:
    nlist: int
    centroids: np.ndarray  # (nlist, dim) float64
    mins: np.ndarray  # (dim,) float64, per-dimension corpus minimum
    maxs: np.ndarray  # (dim,) float64, per-dimension corpus maximum
    codes: np.ndarray  # (N, dim) uint8
    postings: list[np.ndarray]  # nlist arrays of row indices
    ids: np.ndarray  # (N,) unicode keys

    @property
    def dim(self) -> int:
        return int(self.centroids.shape[1])

    def __len__(self) -> int:
        return int(self.codes.shape[0])

    def decode(self, rows: np.ndarray | None = None) -> np.ndarray:
        """Dequantize stored codes back to float vectors."""
        codes = self.codes if rows is None else self.codes[rows]
        ranges = self.maxs - self.mins
        return self.mins + codes.astype(np.float64) * (ranges / 255.0)

    def search(self, query: np.ndarray, k: int, nprobe: int | None = None) -> list[SearchHit]:
        if k <= 0:
            raise ValidationError("k must be positive")
        nprobe = default_nprobe(self.nlist) if nprobe is None else nprobe
        if not (1 <= nprobe <= self.nlist):
            raise ValidationError(f"nprobe must be in [1, {self.nlist}], got {nprobe}")
        q = check_query(query, self.dim)
        centroid_d2 = np.sum((self.centroids - q) ** 2, axis=1)
        probe = np.argsort(centroid_d2, kind="stable")[:nprobe]
        rows = np.concatenate([self.postings[j] for j in probe]) if len(probe) else np.empty(0)
        rows = rows.astype(np.int64)
        if rows.size == 0:
            return []
        scores = np.clip(self.decode(rows) @ q, -1.0, 1.0)
        return rank_hits(scores, self.ids[rows], k)


def encode_sq8(vectors: np.ndarray, mins: np.ndarray, maxs: np.ndarray) -> np.ndarray:
    """Per-dimension linear codes: round((v - min) / (max - min) * 255) half-up.

    Degenerate dimensions (max == min) encode as 0 and decode back to min.
    """
    ranges = maxs - mins
    scale = np.where(ranges > 0, 255.0 / np.where(ranges > 0, ranges, 1.0), 0.0)
    scaled = (vectors - mins) * scale
    return np.clip(np.floor(scaled + 0.5), 0, 255).astype(np.uint8)


def build_ivfsq8(
    vectors: np.ndarray, ids: list[str], nlist: int | None = None, seed: int = 0
) -> IvfSq8Index:
    vectors = check_unit_rows(vectors, "index vectors")
    n = vectors.shape[0]
    if len(ids) != n:
        raise IntegrityError(f"{len(ids)} ids for {n} vectors")
    if len(set(ids)) != len(ids):
        raise IntegrityError("index ids must be unique")
    nlist = default_nlist(n) if nlist is None else nlist
    if not (1 <= nlist <= n):
        raise ValidationError(f"need N >= nlist >= 1, got N={n} nlist={nlist}")

    if nlist == 1:
        centroids = vectors.mean(axis=0, keepdims=True)
        assignments = np.zeros(n, dtype=np.int64)
    else:
        centroids, assignments = kmeans(vectors, nlist, seed)

    mins = vectors.min(axis=0)
    maxs = vectors.max(axis=0)
    codes = encode_sq8(vectors, mins, maxs)
    postings = [np.flatnonzero(assignments == j).astype(np.int64) for j in range(nlist)]
    return IvfSq8Index(
        nlist=nlist,
        centroids=centroids,
        mins=mins,
        maxs=maxs,
        codes=codes,
        postings=postings,
        ids=np.asarray(ids, dtype=np.str_),
    )
