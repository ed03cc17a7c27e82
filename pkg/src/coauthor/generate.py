"""Section content generation.

A section prompt carries the book outline, the heading path of the target
leaf, and the compressed reference reports. At most batch_limit reports go
into a single call. Larger reference lists use the multi-stage path:

  1. one call per batch of at most batch_limit reports, each producing an
     intermediate draft whose citations are local to its batch;
  2. each intermediate's citations are rewritten to the original document
     idx values, then the intermediates become the reference materials of a
     merge call that produces the final draft (already in the global
     citation universe);
  3. the sentence-level correspondence back to the sources is the linker's
     job, downstream.

If the intermediates themselves exceed batch_limit the merge recurses. Every
provider call is recorded in batch_trace. Citations pointing outside the
provided reference universe are flagged as hallucinated, never dropped: the
whole system exists to surface them to the expert.
"""

from __future__ import annotations

import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

from .compress import CompressedReport
from .errors import ValidationError
from .outline import Outline
from .prompt_files import GENERATION, PromptLibrary
from .providers import ChatRequest, ChatService

CITATION_RE = re.compile(r"\[(\d+(?:\s*,\s*\d+)*)\]")

INTERMEDIATE = "intermediate"
FINAL = "final"
EDITED = "edited"

INTRODUCTION = "introduction"
CONCLUSION = "conclusion"

_SYSTEM_PROMPT = "You are a meticulous scholarly writing assistant."


@dataclass
class GenerationConfig:
    model_tag: str
    batch_limit: int = 40
    min_words_hint: int = 8000
    temperature: float = 0.3
    max_tokens: int = 16384

    def validate(self) -> None:
        if self.batch_limit < 1:
            raise ValidationError("batch_limit must be at least 1")


@dataclass
class CitationMark:
    indices: list[int]
    start: int
    end: int

    def to_dict(self) -> dict:
        return {"indices": list(self.indices), "start": self.start, "end": self.end}

    @classmethod
    def from_dict(cls, data: dict) -> "CitationMark":
        return cls(indices=[int(i) for i in data["indices"]], start=int(data["start"]), end=int(data["end"]))


@dataclass
class BatchCall:
    kind: str  # single | batch | merge
    heading: str
    size: int  # number of reference entries in the call
    global_indices: list[int]  # citation universe the call's output maps into

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "heading": self.heading,
            "size": self.size,
            "global_indices": list(self.global_indices),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "BatchCall":
        return cls(
            kind=data["kind"],
            heading=data["heading"],
            size=int(data["size"]),
            global_indices=[int(i) for i in data.get("global_indices", [])],
        )


@dataclass
class SectionDraft:
    chapter_id: str
    heading_path: list[str]
    text_markdown: str
    citations: list[CitationMark] = field(default_factory=list)
    provenance: str = FINAL  # intermediate | final | edited
    batch_trace: list[BatchCall] = field(default_factory=list)
    hallucinated_marks: list[CitationMark] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "chapter_id": self.chapter_id,
            "heading_path": list(self.heading_path),
            "text_markdown": self.text_markdown,
            "citations": [c.to_dict() for c in self.citations],
            "provenance": self.provenance,
            "batch_trace": [b.to_dict() for b in self.batch_trace],
            "hallucinated_marks": [c.to_dict() for c in self.hallucinated_marks],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "SectionDraft":
        return cls(
            chapter_id=data["chapter_id"],
            heading_path=list(data["heading_path"]),
            text_markdown=data["text_markdown"],
            citations=[CitationMark.from_dict(c) for c in data.get("citations", [])],
            provenance=data.get("provenance", FINAL),
            batch_trace=[BatchCall.from_dict(b) for b in data.get("batch_trace", [])],
            hallucinated_marks=[
                CitationMark.from_dict(c) for c in data.get("hallucinated_marks", [])
            ],
        )


def parse_citation_marks(text: str) -> list[CitationMark]:
    """Find every [idx] or [idx_1, idx_2, ...] mark with its span."""
    marks = []
    for m in CITATION_RE.finditer(text):
        indices = [int(part.strip()) for part in m.group(1).split(",")]
        marks.append(CitationMark(indices=indices, start=m.start(), end=m.end()))
    return marks


def plan_batches(n_refs: int, limit: int) -> list[int]:
    """Greedy fill: full batches of `limit`, one smaller final batch."""
    if n_refs < 1:
        raise ValidationError("n_refs must be at least 1")
    if limit < 1:
        raise ValidationError("limit must be at least 1")
    sizes = [limit] * (n_refs // limit)
    if n_refs % limit:
        sizes.append(n_refs % limit)
    return sizes


def remap_citations(text: str, mapping: dict[int, int]) -> tuple[str, list[CitationMark]]:
    """Rewrite citation indices through mapping; unmapped marks are returned.

    Unmapped indices stay verbatim in the text so nothing is silently lost;
    the returned marks carry spans into the rewritten text.
    """
    marks = parse_citation_marks(text)
    unmapped: list[CitationMark] = []
    out: list[str] = []
    cursor = 0
    written = 0
    for mark in marks:
        out.append(text[cursor : mark.start])
        written += mark.start - cursor
        if all(i in mapping for i in mark.indices):
            rendered = f"[{', '.join(str(mapping[i]) for i in mark.indices)}]"
        else:
            rendered = f"[{', '.join(str(i) for i in mark.indices)}]"
            unmapped.append(
                CitationMark(indices=list(mark.indices), start=written, end=written + len(rendered))
            )
        out.append(rendered)
        written += len(rendered)
        cursor = mark.end
    out.append(text[cursor:])
    return "".join(out), unmapped


def check_citation_coverage(draft: SectionDraft, n_refs: int) -> list[int]:
    """Reference indices never cited in the draft (warning level, expert decides)."""
    cited = set()
    for mark in draft.citations:
        cited.update(i for i in mark.indices if 1 <= i <= n_refs)
    return sorted(set(range(1, n_refs + 1)) - cited)


def find_hallucinated_marks(marks: list[CitationMark], universe: set[int]) -> list[CitationMark]:
    return [m for m in marks if any(i not in universe for i in m.indices)]


class Generator:
    def __init__(
        self,
        chat: ChatService,
        prompts: PromptLibrary,
        cfg: GenerationConfig,
        max_workers: int = 4,
    ):
        cfg.validate()
        self.chat = chat
        self.prompts = prompts
        self.cfg = cfg
        self.max_workers = max_workers

    # -- prompt assembly -----------------------------------------------------

    def _render(
        self, book_title: str, outline_text: str, heading_path: list[str], entries: list[str]
    ) -> str:
        return self.prompts.render(
            GENERATION,
            book_title=book_title,
            outline=outline_text,
            heading_path=" > ".join(heading_path),
            references="\n".join(entries),
        )

    def _call(self, prompt: str) -> str:
        request = ChatRequest(
            system_prompt=_SYSTEM_PROMPT,
            user_prompt=prompt,
            model_tag=self.cfg.model_tag,
            max_tokens=self.cfg.max_tokens,
            temperature=self.cfg.temperature,
        )
        return self.chat.chat(request).text

    @staticmethod
    def _entries(labeled: list[tuple[str, str]]) -> list[str]:
        # local numbering: the model cites what it can see, 1..len(batch)
        return [f"{i}. {title} — {body}" for i, (title, body) in enumerate(labeled, start=1)]

    # -- core generation -------------------------------------------------------

    def _generate(
        self,
        chapter_id: str,
        book_title: str,
        outline_text: str,
        heading_path: list[str],
        materials: list[tuple[int, str, str]],  # (global idx, title, body)
    ) -> SectionDraft:
        heading = " > ".join(heading_path)
        universe = {idx for idx, _, _ in materials}
        trace: list[BatchCall] = []
        hallucinated: list[CitationMark] = []

        plan = plan_batches(len(materials), self.cfg.batch_limit)
        if len(plan) == 1:
            prompt = self._render(
                book_title, outline_text, heading_path, self._entries([(t, b) for _, t, b in materials])
            )
            raw = self._call(prompt)
            mapping = {local: idx for local, (idx, _, _) in enumerate(materials, start=1)}
            text, unmapped = remap_citations(raw, mapping)
            hallucinated.extend(unmapped)
            trace.append(
                BatchCall(
                    kind="single",
                    heading=heading,
                    size=len(materials),
                    global_indices=[idx for idx, _, _ in materials],
                )
            )
        else:
            batches: list[list[tuple[int, str, str]]] = []
            cursor = 0
            for size in plan:
                batches.append(materials[cursor : cursor + size])
                cursor += size

            def run_batch(batch: list[tuple[int, str, str]]) -> tuple[str, list[CitationMark]]:
                prompt = self._render(
                    book_title, outline_text, heading_path, self._entries([(t, b) for _, t, b in batch])
                )
                raw = self._call(prompt)
                mapping = {local: idx for local, (idx, _, _) in enumerate(batch, start=1)}
                return remap_citations(raw, mapping)

            with ThreadPoolExecutor(max_workers=self.max_workers) as pool:
                results = list(pool.map(run_batch, batches))
            intermediates: list[str] = []
            for batch, (text_global, unmapped) in zip(batches, results):
                intermediates.append(text_global)
                hallucinated.extend(unmapped)
                trace.append(
                    BatchCall(
                        kind="batch",
                        heading=heading,
                        size=len(batch),
                        global_indices=[idx for idx, _, _ in batch],
                    )
                )
            text = self._merge(
                book_title, outline_text, heading_path, intermediates, sorted(universe), trace
            )

        marks = parse_citation_marks(text)
        hallucinated.extend(find_hallucinated_marks(marks, universe))
        return SectionDraft(
            chapter_id=chapter_id,
            heading_path=list(heading_path),
            text_markdown=text,
            citations=marks,
            provenance=FINAL,
            batch_trace=trace,
            hallucinated_marks=hallucinated,
        )

    def _merge(
        self,
        book_title: str,
        outline_text: str,
        heading_path: list[str],
        intermediates: list[str],
        universe: list[int],
        trace: list[BatchCall],
    ) -> str:
        """Merge intermediates into one draft, recursing when there are too many.

        Intermediates already carry global citation indices, so the merge
        output lives in the global universe and needs no further remapping.
        """
        heading = " > ".join(heading_path)
        while len(intermediates) > self.cfg.batch_limit:
            grouped: list[str] = []
            cursor = 0
            for size in plan_batches(len(intermediates), self.cfg.batch_limit):
                group = intermediates[cursor : cursor + size]
                cursor += size
                grouped.append(
                    self._merge_call(book_title, outline_text, heading_path, group, universe, trace)
                )
            intermediates = grouped
        return self._merge_call(
            book_title, outline_text, heading_path, intermediates, universe, trace
        )

    def _merge_call(
        self,
        book_title: str,
        outline_text: str,
        heading_path: list[str],
        intermediates: list[str],
        universe: list[int],
        trace: list[BatchCall],
    ) -> str:
        labeled = [
            (f"Intermediate draft {i}", text) for i, text in enumerate(intermediates, start=1)
        ]
        prompt = self._render(book_title, outline_text, heading_path, self._entries(labeled))
        prompt += (
            "\n\nThe reference materials above are intermediate drafts whose inline "
            "citation marks already use the final reference numbering. Preserve those "
            "citation marks verbatim when you merge the drafts into the final section."
        )
        text = self._call(prompt)
        trace.append(
            BatchCall(
                kind="merge",
                heading=" > ".join(heading_path),
                size=len(intermediates),
                global_indices=list(universe),
            )
        )
        return text

    # -- public operations -------------------------------------------------------

    def generate_section(
        self,
        chapter_id: str,
        book_title: str,
        outline: Outline,
        heading_path: list[str],
        reports: list[CompressedReport],
        titles: dict[str, str] | None = None,
    ) -> SectionDraft:
        """Generate one leaf section from compressed reference reports."""
        if not reports:
            raise ValidationError("generate_section needs at least one report")
        if heading_path not in outline.leaf_paths():
            raise ValidationError(
                f"heading path {' > '.join(heading_path)} is not a leaf of the outline"
            )
        titles = titles or {}
        materials = [
            (r.idx, titles.get(r.doc_id, f"Reference {r.idx}"), r.report_markdown)
            for r in reports
        ]
        return self._generate(
            chapter_id, book_title, outline.render_indented(), heading_path, materials
        )

    def generate_chapter(
        self,
        chapter_id: str,
        book_title: str,
        outline: Outline,
        reports: list[CompressedReport],
        titles: dict[str, str] | None = None,
        progress=None,
    ) -> SectionDraft:
        """Generate every leaf section and stitch them under their headings."""
        leaves = outline.leaf_paths()
        sections: dict[tuple[str, ...], SectionDraft] = {}
        trace: list[BatchCall] = []
        hallucinated: list[CitationMark] = []
        for i, leaf in enumerate(leaves):
            draft = self.generate_section(chapter_id, book_title, outline, leaf, reports, titles)
            sections[tuple(leaf)] = draft
            trace.extend(draft.batch_trace)
            hallucinated.extend(draft.hallucinated_marks)
            if progress:
                progress(i + 1, len(leaves))

        lines: list[str] = []

        def walk(node, prefix: list[str]) -> None:
            path = prefix + [node.heading]
            lines.append("#" * node.level + " " + node.heading)
            if not node.children:
                lines.append("")
                lines.append(sections[tuple(path)].text_markdown)
                lines.append("")
            else:
                lines.append("")
                for child in node.children:
                    walk(child, path)

        for root in outline.roots:
            walk(root, [])
        text = "\n".join(lines).rstrip() + "\n"
        return SectionDraft(
            chapter_id=chapter_id,
            heading_path=[outline.roots[0].heading],
            text_markdown=text,
            citations=parse_citation_marks(text),
            provenance=FINAL,
            batch_trace=trace,
            hallucinated_marks=hallucinated,
        )

    def generate_head_tail(
        self,
        book_title: str,
        chapter_drafts: list[SectionDraft],
        kind: str,
        chapter_id: str = "",
    ) -> SectionDraft:
        """Introduction or conclusion, using the generated chapters themselves
        as the reference materials; citations refer to chapter numbers."""
        if kind not in (INTRODUCTION, CONCLUSION):
            raise ValidationError(f"kind must be introduction or conclusion, got '{kind}'")
        if not chapter_drafts:
            raise ValidationError(f"cannot generate the {kind} before any chapter exists")
        heading = kind.capitalize()
        materials = [
            (
                i,
                draft.heading_path[-1] if draft.heading_path else f"Chapter {i}",
                draft.text_markdown,
            )
            for i, draft in enumerate(chapter_drafts, start=1)
        ]
        outline_text = "\n".join(f"{idx}. {title}" for idx, title, _ in materials)
        return self._generate(chapter_id, book_title, outline_text, [heading], materials)
