"""Loader for the review-corpus record schema.

Each record carries a review article plus its references:
title, article_id, subject (list of areas), abstract, content,
reference (formatted strings) and reference_content (structured entries
with reference_num, reference_title, reference_abstract). Files may be a
JSON array or JSON lines.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from ..errors import NotFoundError, ValidationError


@dataclass
class ReferenceContent:
    reference_num: list[int]
    reference_title: str
    reference_abstract: str


@dataclass
class ReviewRecord:
    title: str
    article_id: str
    subject: list[str]
    abstract: str
    content: str
    reference: list[str] = field(default_factory=list)
    reference_content: list[ReferenceContent] = field(default_factory=list)


_REQUIRED = ("title", "article_id", "subject", "abstract", "content", "reference")


def _parse_record(data: dict, where: str) -> ReviewRecord:
    if not isinstance(data, dict):
        raise ValidationError(f"{where}: record must be an object")
    for key in _REQUIRED:
        if key not in data:
            raise ValidationError(f"{where}: missing field '{key}'")
    if not isinstance(data["subject"], list):
        raise ValidationError(f"{where}: 'subject' must be a list")
    if not isinstance(data["reference"], list):
        raise ValidationError(f"{where}: 'reference' must be a list")
    refs = []
    for i, rc in enumerate(data.get("reference_content", []) or []):
        if not isinstance(rc, dict) or "reference_num" not in rc:
            raise ValidationError(f"{where}: reference_content[{i}] malformed")
        nums = rc["reference_num"]
        if not isinstance(nums, list):
            nums = [nums]
        refs.append(
            ReferenceContent(
                reference_num=[int(x) for x in nums],
                reference_title=str(rc.get("reference_title", "")),
                reference_abstract=str(rc.get("reference_abstract", "")),
            )
        )
    return ReviewRecord(
        title=str(data["title"]),
        article_id=str(data["article_id"]),
        subject=[str(s) for s in data["subject"]],
        abstract=str(data["abstract"]),
        content=str(data["content"]),
        reference=[str(r) for r in data["reference"]],
        reference_content=refs,
    )


def load_review_corpus(path: str | Path) -> list[ReviewRecord]:
    p = Path(path)
    if not p.is_file():
        raise NotFoundError(f"corpus file not found: {p}")
    text = p.read_text(encoding="utf-8").strip()
    if not text:
        return []
    if text.startswith("["):
        try:
            items = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ValidationError(f"{p}: invalid JSON: {exc}") from exc
        return [_parse_record(item, f"{p}[{i}]") for i, item in enumerate(items)]
    records = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            item = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ValidationError(f"{p}:{lineno}: invalid JSON line: {exc}") from exc
        records.append(_parse_record(item, f"{p}:{lineno}"))
    return records
