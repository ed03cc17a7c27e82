"""Reference ingestion: raw text to sentences to overlapping blocks.

Sentences are split at terminal punctuation followed by whitespace or end of
text, with guards for common abbreviations and decimal numbers. Blocks are
sliding windows of sentences; consecutive windows share a configurable
number of sentences so no block loses the context at its edges.
"""

from __future__ import annotations

import shlex
import subprocess
import tempfile
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ConversionError, EmptyDocumentError, NotFoundError, ValidationError

TERMINALS = ".!?；。！？"

# Undersplitting is safer than oversplitting for block coherence, so the
# default guard list is generous. Extend it via a config file when a corpus
# needs more.
DEFAULT_ABBREVIATIONS = (
    "Eq.",
    "Eqs.",
    "Fig.",
    "Figs.",
    "Tab.",
    "et al.",
    "e.g.",
    "i.e.",
    "Dr.",
    "Prof.",
    "Mr.",
    "Mrs.",
    "Ms.",
    "vs.",
    "cf.",
)

DOC_KINDS = ("markdown", "text", "pdf_external")


@dataclass
class ReferenceDoc:
    """A source document plus its sentence segmentation.

    idx is the 1-based position in the chapter's reference list and is the
    number cited as [idx] in generated text.
    """

    id: str
    idx: int
    title: str
    body_markdown: str
    sentence_spans: list[tuple[int, int]] = field(default_factory=list)

    def sentences(self) -> list[str]:
        return [self.body_markdown[a:b] for a, b in self.sentence_spans]

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "idx": self.idx,
            "title": self.title,
            "body_markdown": self.body_markdown,
            "sentence_spans": [list(s) for s in self.sentence_spans],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ReferenceDoc":
        return cls(
            id=data["id"],
            idx=int(data["idx"]),
            title=data["title"],
            body_markdown=data["body_markdown"],
            sentence_spans=[(int(a), int(b)) for a, b in data["sentence_spans"]],
        )


@dataclass
class Block:
    """A window of consecutive sentences from one document."""

    doc_id: str
    block_index: int
    sentence_indices: list[int]
    text: str


def load_abbreviations(path: str | Path | None) -> tuple[str, ...]:
    if not path:
        return DEFAULT_ABBREVIATIONS
    p = Path(path)
    if not p.is_file():
        raise NotFoundError(f"abbreviation file not found: {p}")
    lines = [ln.strip() for ln in p.read_text(encoding="utf-8").splitlines()]
    return tuple(ln for ln in lines if ln and not ln.startswith("#"))


def segment_sentences(
    text: str, abbreviations: tuple[str, ...] = DEFAULT_ABBREVIATIONS
) -> list[tuple[int, int]]:
    """Split text into sentence spans (codepoint offsets, end exclusive).

    A split happens after a terminal mark that is followed by whitespace or
    end of text, unless the mark ends a known abbreviation or sits between
    digits. Spans cover every non-whitespace character; whitespace between
    sentences belongs to no span.
    """
    if not text:
        return []
    lowered = text.lower()
    guards = tuple(a.lower() for a in abbreviations)
    n = len(text)
    boundaries: list[int] = []  # position just past the terminal mark
    for i, ch in enumerate(text):
        if ch not in TERMINALS:
            continue
        if i + 1 < n and not text[i + 1].isspace():
            continue
        if ch == ".":
            # decimal guard: a dot framed by digits never ends a sentence
            if 0 < i < n - 1 and text[i - 1].isdigit() and text[i + 1].isdigit():
                continue
            head = lowered[: i + 1]
            guarded = False
            for abbr in guards:
                if not head.endswith(abbr):
                    continue
                before = i - len(abbr)
                if before < 0 or not text[before].isalnum():
                    guarded = True
                    break
            if guarded:
                continue
        boundaries.append(i + 1)

    spans: list[tuple[int, int]] = []
    start = 0
    for b in boundaries + [n]:
        if b <= start:
            continue
        seg = text[start:b]
        lead = len(seg) - len(seg.lstrip())
        trail = len(seg) - len(seg.rstrip())
        if seg.strip():
            spans.append((start + lead, b - trail))
        start = b
    return spans


def chunk_blocks(doc: ReferenceDoc, window: int = 3, overlap: int = 1) -> list[Block]:
    """Cut a document into sliding sentence windows.

    Stride is window - overlap; every sentence lands in at least one block
    and the final block may be shorter than the window.
    """
    if not (window > overlap >= 0):
        raise ValidationError(f"need window > overlap >= 0, got window={window} overlap={overlap}")
    sentences = doc.sentences()
    n = len(sentences)
    if n == 0:
        raise EmptyDocumentError(f"document {doc.id} has no sentences")
    stride = window - overlap
    blocks: list[Block] = []
    for start in range(0, max(n - overlap, 1), stride):
        indices = list(range(start, min(start + window, n)))
        blocks.append(
            Block(
                doc_id=doc.id,
                block_index=len(blocks),
                sentence_indices=indices,
                text=" ".join(sentences[i] for i in indices),
            )
        )
    return blocks


def _read_text(path: Path) -> str:
    return path.read_text(encoding="utf-8")


def _first_heading(markdown: str) -> str | None:
    for line in markdown.splitlines():
        stripped = line.strip()
        if stripped.startswith("#"):
            return stripped.lstrip("#").strip() or None
    return None


def run_pdf_converter(command_template: str, input_path: Path) -> str:
    """Run the configured external PDF-to-Markdown command and read its output.

    The template must contain {input} and {output} placeholders.
    """
    if not command_template:
        raise ValidationError("no PDF converter configured (ingest.pdf_command)")
    if "{input}" not in command_template or "{output}" not in command_template:
        raise ValidationError("ingest.pdf_command must contain {input} and {output}")
    with tempfile.TemporaryDirectory(prefix="coauthor-pdf-") as tmp:
        out_path = Path(tmp) / (input_path.stem + ".md")
        command = command_template.replace("{input}", str(input_path)).replace(
            "{output}", str(out_path)
        )
        proc = subprocess.run(
            shlex.split(command), capture_output=True, text=True, check=False
        )
        if proc.returncode != 0:
            raise ConversionError(
                f"converter exited with status {proc.returncode} for {input_path}",
                stderr=proc.stderr,
            )
        if not out_path.is_file():
            raise ConversionError(
                f"converter produced no output file for {input_path}", stderr=proc.stderr
            )
        return _read_text(out_path)


def ingest_document(
    path: str | Path,
    kind: str,
    idx: int = 0,
    doc_id: str = "",
    pdf_command: str = "",
    abbreviations: tuple[str, ...] = DEFAULT_ABBREVIATIONS,
) -> ReferenceDoc:
    """Convert one file into a segmented ReferenceDoc.

    Markdown and plain text are read directly; pdf_external runs the
    configured converter command first and then proceeds as markdown.
    """
    if kind not in DOC_KINDS:
        raise ValidationError(f"unknown document kind '{kind}'")
    p = Path(path)
    if not p.is_file():
        raise NotFoundError(f"reference file not found: {p}")
    if kind == "pdf_external":
        body = run_pdf_converter(pdf_command, p)
    else:
        body = _read_text(p)
    title = _first_heading(body) or p.stem
    spans = segment_sentences(body, abbreviations)
    return ReferenceDoc(
        id=doc_id or p.stem,
        idx=idx,
        title=title,
        body_markdown=body,
        sentence_spans=spans,
    )
