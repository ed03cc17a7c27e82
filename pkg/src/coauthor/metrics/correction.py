"""Manual correction rate between an initial and a final draft.

Both drafts are segmented at sentence level (n initial sentences, m final
sentences). s counts final-draft sentences whose whitespace-normalized form
also appears in the initial draft, multiset-aware so each initial sentence
can be consumed once. The printed formula is (n - s) / s. Two alternative
normalizations, (n - s) / n and (m - s) / m, are available for sensitivity
analysis and are labeled by mode so they are never mistaken for the default.

Sentence matching is exact equality after whitespace normalization; fuzzy
matching would silently change the metric.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass

from ..errors import UndefinedRateError, ValidationError
from ..ingest import segment_sentences

MODES = ("printed", "initial_fraction", "final_fraction")


@dataclass
class CorrectionStats:
    n: int  # sentences in the initial draft
    m: int  # sentences in the final draft
    s: int  # final-draft sentences retained from the initial draft
    rate: float
    mode: str = "printed"

    def to_dict(self) -> dict:
        return {"n": self.n, "m": self.m, "s": self.s, "rate": self.rate, "mode": self.mode}

    @classmethod
    def from_dict(cls, data: dict) -> "CorrectionStats":
        return cls(
            n=int(data["n"]),
            m=int(data["m"]),
            s=int(data["s"]),
            rate=float(data["rate"]),
            mode=data.get("mode", "printed"),
        )


def _normalize(sentence: str) -> str:
    return " ".join(sentence.split())


def correction_rate(initial: str, final: str, mode: str = "printed") -> CorrectionStats:
    if mode not in MODES:
        raise ValidationError(f"unknown correction mode '{mode}' (choose from {MODES})")
    if not initial.strip() or not final.strip():
        raise ValidationError("both drafts must be non-empty")
    initial_sentences = [_normalize(initial[a:b]) for a, b in segment_sentences(initial)]
    final_sentences = [_normalize(final[a:b]) for a, b in segment_sentences(final)]
    n = len(initial_sentences)
    m = len(final_sentences)
    pool = Counter(initial_sentences)
    s = 0
    for sentence in final_sentences:
        if pool[sentence] > 0:
            pool[sentence] -= 1
            s += 1
    if mode == "printed":
        if s == 0:
            raise UndefinedRateError(
                "no final-draft sentence was retained from the initial draft (s = 0), "
                "the printed rate (n - s) / s is undefined"
            )
        rate = (n - s) / s
    elif mode == "initial_fraction":
        rate = (n - s) / n
    else:
        rate = (m - s) / m
    return CorrectionStats(n=n, m=m, s=s, rate=rate, mode=mode)
