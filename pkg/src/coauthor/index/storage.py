"""Binary persistence for the quantized index.

Little-endian layout (documented in docs/index-format.md):

    magic    4 bytes  b"IVQ8"
    version  u32      currently 1
    dim      u32
    nlist    u32
    n        u64
    centroids  nlist * dim float64
    mins       dim float64
    maxs       dim float64
    codes      n * dim uint8
    assignments n int32   (posting lists are rebuilt from these)
    ids        n entries, each u16 byte-length + utf-8 bytes
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from ..errors import IntegrityError
from .ivf_sq8 import IvfSq8Index

MAGIC = b"IVQ8"
VERSION = 1
_HEADER = struct.Struct("<4sIIIQ")


def save_index(index: IvfSq8Index, path: str | Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    n = len(index)
    assignments = np.empty(n, dtype=np.int32)
    for j, rows in enumerate(index.postings):
        assignments[rows] = j
    tmp = path.with_suffix(path.suffix + ".tmp")
    with open(tmp, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, VERSION, index.dim, index.nlist, n))
        fh.write(index.centroids.astype("<f8").tobytes())
        fh.write(index.mins.astype("<f8").tobytes())
        fh.write(index.maxs.astype("<f8").tobytes())
        fh.write(index.codes.astype(np.uint8).tobytes())
        fh.write(assignments.astype("<i4").tobytes())
        for key in index.ids:
            raw = str(key).encode("utf-8")
            fh.write(struct.pack("<H", len(raw)))
            fh.write(raw)
    tmp.replace(path)


def load_index(path: str | Path) -> IvfSq8Index:
    path = Path(path)
    data = path.read_bytes()
    if len(data) < _HEADER.size:
        raise IntegrityError(f"index file too short: {path}")
    magic, version, dim, nlist, n = _HEADER.unpack_from(data, 0)
    if magic != MAGIC:
        raise IntegrityError(f"bad magic in index file {path}")
    if version != VERSION:
        raise IntegrityError(f"unsupported index version {version} in {path}")
    offset = _HEADER.size

    def take(count: int, dtype: str):
        nonlocal offset
        arr = np.frombuffer(data, dtype=dtype, count=count, offset=offset)
        offset += arr.nbytes
        return arr

    try:
        centroids = take(nlist * dim, "<f8").reshape(nlist, dim).copy()
        mins = take(dim, "<f8").copy()
        maxs = take(dim, "<f8").copy()
        codes = take(n * dim, np.uint8).reshape(n, dim).copy()
        assignments = take(n, "<i4").astype(np.int64)
        ids = []
        for _ in range(n):
            (length,) = struct.unpack_from("<H", data, offset)
            offset += 2
            ids.append(data[offset : offset + length].decode("utf-8"))
            offset += length
    except (ValueError, struct.error) as exc:
        raise IntegrityError(f"corrupted index file {path}: {exc}") from exc
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
