"""ROUGE-1/2/L content overlap.

Tokenization is fixed and documented so numbers are comparable across runs:
lowercase, split on non-alphanumeric characters, no stemming, no stopword
removal. Reported triples are (precision, recall, f1); the single headline
number used elsewhere in this project is the F1.
"""

from __future__ import annotations

import re
from collections import Counter
from typing import NamedTuple

import numpy as np

from ..errors import ValidationError

_TOKEN = re.compile(r"[^\W_]+", re.UNICODE)


class RougeScore(NamedTuple):
    precision: float
    recall: float
    f1: float


def tokenize(text: str) -> list[str]:
    return _TOKEN.findall(text.lower())


def _f1(precision: float, recall: float) -> float:
    if precision + recall == 0:
        return 0.0
    return 2.0 * precision * recall / (precision + recall)


def rouge_n(candidate: str, reference: str, n: int) -> RougeScore:
    """Clipped n-gram overlap for n in {1, 2}."""
    if n not in (1, 2):
        raise ValidationError(f"rouge_n supports n in {{1, 2}}, got {n}")
    cand = tokenize(candidate)
    ref = tokenize(reference)
    cand_grams = Counter(tuple(cand[i : i + n]) for i in range(len(cand) - n + 1))
    ref_grams = Counter(tuple(ref[i : i + n]) for i in range(len(ref) - n + 1))
    total_cand = sum(cand_grams.values())
    total_ref = sum(ref_grams.values())
    overlap = sum(min(count, ref_grams[gram]) for gram, count in cand_grams.items())
    precision = overlap / total_cand if total_cand else 0.0
    recall = overlap / total_ref if total_ref else 0.0
    return RougeScore(precision, recall, _f1(precision, recall))


def _lcs_length(a: list[int], b: list[int]) -> int:
    """Longest common subsequence length, one DP row at a time.

    Row update: cur[j] = max(prev[j], prev[j-1] + match_j, cur[j-1]); the
    running max over j folds the left dependency into a cumulative maximum,
    which keeps the whole row vectorized.
    """
    if not a or not b:
        return 0
    prev = np.zeros(len(b) + 1, dtype=np.int32)
    b_arr = np.asarray(b, dtype=np.int64)
    for token in a:
        match = (b_arr == token).astype(np.int32)
        base = np.maximum(prev[1:], prev[:-1] + match)
        cur = np.empty_like(prev)
        cur[0] = 0
        np.maximum.accumulate(base, out=cur[1:])
        prev = cur
    return int(prev[-1])


def rouge_l(candidate: str, reference: str) -> RougeScore:
    """LCS-based overlap: P = LCS/|candidate|, R = LCS/|reference|."""
    cand = tokenize(candidate)
    ref = tokenize(reference)
    if not cand or not ref:
        return RougeScore(0.0, 0.0, 0.0)
    vocab = {token: i for i, token in enumerate(dict.fromkeys(cand + ref))}
    lcs = _lcs_length([vocab[t] for t in cand], [vocab[t] for t in ref])
    precision = lcs / len(cand)
    recall = lcs / len(ref)
    return RougeScore(precision, recall, _f1(precision, recall))
