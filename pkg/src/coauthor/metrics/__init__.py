from .correction import MODES, CorrectionStats, correction_rate
from .dataset import ReferenceContent, ReviewRecord, load_review_corpus
from .headings import (
    GENERATED,
    REFERENCE,
    HeadingSet,
    build_heading_set,
    extract_markdown_headings,
    similarity_table,
    soft_cardinality,
    soft_heading_recall,
)
from .report import MetricReport, render_report
from .rouge import RougeScore, rouge_l, rouge_n, tokenize

__all__ = [
    "GENERATED",
    "MODES",
    "REFERENCE",
    "CorrectionStats",
    "HeadingSet",
    "MetricReport",
    "ReferenceContent",
    "ReviewRecord",
    "RougeScore",
    "build_heading_set",
    "correction_rate",
    "extract_markdown_headings",
    "load_review_corpus",
    "render_report",
    "rouge_l",
    "rouge_n",
    "similarity_table",
    "soft_cardinality",
    "soft_heading_recall",
    "tokenize",
]
