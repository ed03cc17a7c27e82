"""Per-document content compression.

Each reference document becomes a research report of roughly target_words
words, produced by the compression prompt. Documents larger than the
provider's context budget are split at sentence boundaries, each part is
compressed on its own, and the concatenated part-reports are compressed once
more (stage "merged").

Token counts are estimated at 4 characters per token; requests keep a 10%
safety margin under the configured budget and each split part takes at most
60% of the budget, leaving room for the prompt itself.
"""

from __future__ import annotations

import hashlib
import json
import math
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

from .config import CompressorConfig
from .errors import BatchError, TransportError, ValidationError
from .ingest import ReferenceDoc, segment_sentences
from .prompt_files import COMPRESSION, PromptLibrary
from .providers import ChatRequest, ChatService

CHARS_PER_TOKEN = 4
SAFETY_MARGIN = 0.10
PART_FRACTION = 0.60

SINGLE_PASS = "single_pass"
MERGED = "merged"

_SYSTEM_PROMPT = "You are a careful scientific summarization assistant."


def estimate_tokens(text: str) -> int:
    """Documented estimator: ceil(characters / 4)."""
    return math.ceil(len(text) / CHARS_PER_TOKEN)


@dataclass
class CompressedReport:
    doc_id: str
    idx: int
    report_markdown: str
    word_count: int
    stage: str  # single_pass | merged

    def to_dict(self) -> dict:
        return {
            "doc_id": self.doc_id,
            "idx": self.idx,
            "report_markdown": self.report_markdown,
            "word_count": self.word_count,
            "stage": self.stage,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "CompressedReport":
        return cls(
            doc_id=data["doc_id"],
            idx=int(data["idx"]),
            report_markdown=data["report_markdown"],
            word_count=int(data["word_count"]),
            stage=data["stage"],
        )


@dataclass
class CompressionFailure:
    doc_id: str
    idx: int
    error: str


def split_at_sentences(text: str, max_tokens: int) -> list[str]:
    """Split text into parts of at most max_tokens, cutting at sentence ends.

    A single sentence larger than the limit is split on raw characters as a
    last resort so no part can exceed the budget.
    """
    limit_chars = max_tokens * CHARS_PER_TOKEN
    spans = segment_sentences(text)
    pieces: list[str] = []
    for a, b in spans:
        sentence = text[a:b]
        while len(sentence) > limit_chars:
            pieces.append(sentence[:limit_chars])
            sentence = sentence[limit_chars:]
        pieces.append(sentence)
    if not pieces:
        pieces = [text[i : i + limit_chars] for i in range(0, len(text), limit_chars)]
    parts: list[str] = []
    current: list[str] = []
    size = 0
    for piece in pieces:
        extra = len(piece) + (1 if current else 0)
        if current and size + extra > limit_chars:
            parts.append(" ".join(current))
            current = [piece]
            size = len(piece)
        else:
            current.append(piece)
            size += extra
    if current:
        parts.append(" ".join(current))
    return parts


class Compressor:
    def __init__(
        self,
        chat: ChatService,
        prompts: PromptLibrary,
        cfg: CompressorConfig,
        model_tag: str,
        max_tokens: int = 8192,
        max_workers: int = 4,
        cache_dir: str | Path | None = None,
    ):
        self.chat = chat
        self.prompts = prompts
        self.cfg = cfg
        self.model_tag = model_tag
        self.max_tokens = max_tokens
        self.max_workers = max_workers
        self.cache_dir = Path(cache_dir) if cache_dir else None

    # -- budgets -----------------------------------------------------------

    def _effective_budget(self) -> int:
        return int(self.cfg.context_budget_tokens * (1 - SAFETY_MARGIN))

    def part_capacity_tokens(self) -> int:
        """At most 60% of the budget, shrunk further if the prompt itself is
        larger than the reserve, so part + prompt always fits the margin."""
        overhead = estimate_tokens(self._render(""))
        capacity = min(
            int(self.cfg.context_budget_tokens * PART_FRACTION),
            self._effective_budget() - overhead,
        )
        if capacity < 64:
            raise ValidationError(
                f"context budget {self.cfg.context_budget_tokens} tokens is too small "
                "for the compression prompt"
            )
        return capacity

    def _render(self, document: str) -> str:
        return self.prompts.render(COMPRESSION, document=document)

    def _call(self, document: str, doc_id: str) -> str:
        prompt = self._render(document)
        if estimate_tokens(prompt) > self._effective_budget():
            raise ValidationError(
                f"compression request for {doc_id} exceeds the context budget; "
                "splitting failed to keep it inside the margin"
            )
        request = ChatRequest(
            system_prompt=_SYSTEM_PROMPT,
            user_prompt=prompt,
            model_tag=self.model_tag,
            max_tokens=self.max_tokens,
            temperature=0.2,
        )
        try:
            return self.chat.chat(request).text
        except TransportError as exc:
            raise TransportError(f"document {doc_id}: {exc}") from exc

    # -- cache ---------------------------------------------------------------

    def _cache_key(self, doc: ReferenceDoc) -> str:
        payload = "\x00".join(
            [
                self.model_tag,
                str(self.cfg.target_words),
                hashlib.sha256(self.prompts.text(COMPRESSION).encode("utf-8")).hexdigest(),
                doc.body_markdown,
            ]
        )
        return hashlib.sha256(payload.encode("utf-8")).hexdigest()

    def _cache_get(self, key: str) -> dict | None:
        if not self.cache_dir:
            return None
        path = self.cache_dir / f"{key}.json"
        if not path.is_file():
            return None
        return json.loads(path.read_text(encoding="utf-8"))

    def _cache_put(self, key: str, payload: dict) -> None:
        if not self.cache_dir:
            return
        self.cache_dir.mkdir(parents=True, exist_ok=True)
        path = self.cache_dir / f"{key}.json"
        tmp = path.with_suffix(".tmp")
        tmp.write_text(json.dumps(payload, ensure_ascii=False), encoding="utf-8")
        tmp.replace(path)

    # -- operations ------------------------------------------------------------

    def compress_document(self, doc: ReferenceDoc) -> CompressedReport:
        """Compress one document, splitting and merging when it exceeds the budget."""
        if not doc.body_markdown.strip():
            raise ValidationError(f"document {doc.id} has an empty body")

        key = self._cache_key(doc)
        cached = self._cache_get(key)
        if cached is not None:
            return CompressedReport(
                doc_id=doc.id,
                idx=doc.idx,
                report_markdown=cached["report_markdown"],
                word_count=cached["word_count"],
                stage=cached["stage"],
            )

        text = doc.body_markdown
        stage = SINGLE_PASS
        prompt_overhead = estimate_tokens(self._render(""))
        while estimate_tokens(text) + prompt_overhead > self._effective_budget():
            parts = split_at_sentences(text, self.part_capacity_tokens())
            if len(parts) <= 1:
                break
            part_reports = [self._call(part, doc.id) for part in parts]
            text = "\n\n".join(part_reports)
            stage = MERGED
        report_text = self._call(text, doc.id)

        report = CompressedReport(
            doc_id=doc.id,
            idx=doc.idx,
            report_markdown=report_text,
            word_count=len(report_text.split()),
            stage=stage,
        )
        self._cache_put(
            key,
            {
                "report_markdown": report.report_markdown,
                "word_count": report.word_count,
                "stage": report.stage,
            },
        )
        return report

    def compress_corpus(
        self,
        docs: list[ReferenceDoc],
        progress: Callable[[int, int], None] | None = None,
    ) -> tuple[list[CompressedReport], list[CompressionFailure]]:
        """Compress a corpus with bounded parallelism.

        Output reports are sorted by idx regardless of completion order;
        per-document failures are reported without aborting the batch.
        """
        if not docs:
            raise ValidationError("compress_corpus needs at least one document")
        reports: list[CompressedReport] = []
        failures: list[CompressionFailure] = []
        done = 0
        lock = threading.Lock()

        def work(doc: ReferenceDoc):
            nonlocal done
            try:
                result = self.compress_document(doc)
                with lock:
                    reports.append(result)
            except Exception as exc:  # per-document isolation
                with lock:
                    failures.append(CompressionFailure(doc_id=doc.id, idx=doc.idx, error=str(exc)))
            finally:
                with lock:
                    done += 1
                    if progress:
                        progress(done, len(docs))

        with ThreadPoolExecutor(max_workers=self.max_workers) as pool:
            list(pool.map(work, docs))

        if not reports:
            raise BatchError(
                f"all {len(docs)} documents failed to compress; first error: "
                f"{failures[0].error if failures else 'unknown'}"
            )
        reports.sort(key=lambda r: r.idx)
        failures.sort(key=lambda f: f.idx)
        return reports, failures
