"""Soft-cardinality heading metrics.

A heading set's soft cardinality generalizes set size by pairwise cosine
similarity: card(T) = sum_i 1 / sum_j Sim(t_i, t_j), so duplicates count
fractionally. Soft heading recall compares the generated headings G against
the reference headings R through the inclusion-exclusion identity
card(R & G) = card(R) + card(G) - card(R | G), where the union is the
concatenated multiset; the recall is card(R & G) / card(R). Matching the
reference is rewarded while internal redundancy in G is punished.

Similarities are clamped to [0, 1] before the cardinality sum: negative
cosines would make the denominators non-monotone and can produce wild
values. Self-similarity is exactly 1. All sums use math.fsum and every
pairwise product is reduced in a shape-independent order, which makes the
duplicate-halving algebra exact in floating point: recall of a set against
itself is 1.0, not 1.0 plus rounding noise.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field

import numpy as np

from ..errors import IntegrityError, ValidationError
from ..providers import EmbeddingProfile, EmbeddingService
from .common import text_sha256

GENERATED = "generated"
REFERENCE = "reference"

_MD_HEADING = re.compile(r"^(#{1,6})\s+(.+?)\s*#*\s*$")


@dataclass
class HeadingSet:
    titles: list[str]
    embeddings: np.ndarray  # (K, dim) unit rows
    role: str  # generated | reference
    model_tag: str = ""

    def validate(self) -> None:
        if len(self.titles) == 0:
            raise ValidationError("heading set must contain at least one title")
        if self.embeddings.shape[0] != len(self.titles):
            raise ValidationError(
                f"{len(self.titles)} titles but {self.embeddings.shape[0]} embeddings"
            )


def build_heading_set(
    titles: list[str],
    embedding: EmbeddingService,
    profile: EmbeddingProfile,
    role: str,
) -> HeadingSet:
    if not titles:
        raise ValidationError("heading set must contain at least one title")
    vectors = embedding.embed_texts(titles, profile)
    return HeadingSet(titles=list(titles), embeddings=vectors, role=role, model_tag=profile.model_tag)


def extract_markdown_headings(markdown: str) -> list[str]:
    """All markdown heading titles in document order."""
    titles = []
    for line in markdown.splitlines():
        m = _MD_HEADING.match(line.strip())
        if m:
            titles.append(m.group(2))
    return titles


def _pair_dots(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    # np.add.reduce over the trailing axis gives every pair the same
    # reduction order regardless of matrix shape, so a similarity computed
    # inside the union table is bit-identical to the one computed in a
    # standalone table. BLAS matmul does not guarantee that.
    return np.add.reduce(a[:, None, :] * b[None, :, :], axis=2)


def similarity_table(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Clamped pairwise cosine table; bit-identical embeddings score exactly 1."""
    table = np.clip(_pair_dots(a, b), 0.0, 1.0)
    identical = np.all(a[:, None, :] == b[None, :, :], axis=2)
    table[identical] = 1.0
    return table


def _card_from_table(table: np.ndarray) -> float:
    terms = []
    for row in table:
        denom = math.fsum(row.tolist())
        terms.append(1.0 / denom)
    return math.fsum(terms)


def soft_cardinality(headings: HeadingSet) -> float:
    """card(T) per the soft-cardinality sum; lies in [1, K] for clamped sims."""
    headings.validate()
    return _card_from_table(similarity_table(headings.embeddings, headings.embeddings))


def soft_heading_recall(generated: HeadingSet, reference: HeadingSet) -> float:
    """card(R & G) / card(R) with the union built as the concatenated multiset.

    All three cardinalities are sliced from one union similarity table so the
    identity case G = R collapses exactly to 1.0.
    """
    generated.validate()
    reference.validate()
    if generated.model_tag != reference.model_tag:
        raise IntegrityError(
            f"embedding profile mismatch: '{generated.model_tag}' vs '{reference.model_tag}'"
        )
    kr = len(reference.titles)
    union = np.concatenate([reference.embeddings, generated.embeddings], axis=0)
    table = similarity_table(union, union)
    card_r = _card_from_table(table[:kr, :kr])
    card_g = _card_from_table(table[kr:, kr:])
    card_union = _card_from_table(table)
    intersection = math.fsum([card_r, card_g, -card_union])
    return intersection / card_r
