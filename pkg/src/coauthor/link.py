"""Reference verification: tracing generated sentences back to source blocks.

Every citation mark's enclosing sentence is embedded (with the linking
profile), searched against the chapter's block index, and scored. A citation
is traceable when the best hit comes from the cited document and its cosine
similarity clears the threshold. Requiring the *cited* document, not just
any document, is the stricter and auditable reading; the relaxed rule is
available behind linker.match_any_document.

Candidate retrieval runs on the quantized index; the retrieved candidates
are then re-scored on the exact stored vectors, so a sentence copied
verbatim from a block always scores 1.0 regardless of quantization error.
"""

from __future__ import annotations

import hashlib
import json
import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .config import IndexConfig, LinkerConfig
from .errors import IntegrityError, NotFoundError, ValidationError
from .generate import SectionDraft
from .index import IvfSq8Index, build_ivfsq8, default_nprobe, load_index, save_index
from .ingest import Block, ReferenceDoc, chunk_blocks, segment_sentences
from .providers import EmbeddingProfile, EmbeddingService

_MARK_WITH_SPACE = re.compile(r"\s*\[(\d+(?:\s*,\s*\d+)*)\]")

RETRIEVE_FACTOR = 4  # candidates fetched per requested hit before re-scoring


def block_key(doc_idx: int, block_index: int) -> str:
    return f"{doc_idx:04d}:{block_index:04d}"


@dataclass
class BlockMeta:
    doc_id: str
    doc_idx: int
    block_index: int
    sentence_indices: list[int]
    text: str

    def to_dict(self) -> dict:
        return {
            "doc_id": self.doc_id,
            "doc_idx": self.doc_idx,
            "block_index": self.block_index,
            "sentence_indices": list(self.sentence_indices),
            "text": self.text,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "BlockMeta":
        return cls(
            doc_id=data["doc_id"],
            doc_idx=int(data["doc_idx"]),
            block_index=int(data["block_index"]),
            sentence_indices=[int(i) for i in data["sentence_indices"]],
            text=data["text"],
        )


@dataclass
class LinkHit:
    key: str
    doc_idx: int
    block_index: int
    score: float

    def to_dict(self) -> dict:
        return {
            "key": self.key,
            "doc_idx": self.doc_idx,
            "block_index": self.block_index,
            "score": self.score,
        }


@dataclass
class CorpusIndex:
    """Quantized index plus exact vectors and block metadata for one chapter."""

    ivf: IvfSq8Index
    exact: np.ndarray  # (N, dim) float64 unit rows, for re-scoring
    blocks: dict[str, BlockMeta]
    profile_tag: str
    corpus_fingerprint: str
    nprobe: int

    @property
    def keys(self) -> np.ndarray:
        return self.ivf.ids

    def search(self, query: np.ndarray, k: int) -> list[LinkHit]:
        """IVF candidate retrieval followed by exact re-scoring, top-k."""
        fetch = min(len(self.ivf), max(k * RETRIEVE_FACTOR, k))
        candidates = self.ivf.search(query, k=fetch, nprobe=self.nprobe)
        if not candidates:
            return []
        key_to_row = self._key_rows()
        rows = np.asarray([key_to_row[h.key] for h in candidates], dtype=np.int64)
        scores = np.clip(self.exact[rows] @ np.asarray(query, dtype=np.float64), -1.0, 1.0)
        order = np.lexsort((self.ivf.ids[rows], -scores))[: min(k, rows.size)]
        hits = []
        for i in order:
            meta = self.blocks[str(self.ivf.ids[rows[i]])]
            hits.append(
                LinkHit(
                    key=str(self.ivf.ids[rows[i]]),
                    doc_idx=meta.doc_idx,
                    block_index=meta.block_index,
                    score=float(scores[i]),
                )
            )
        return hits

    def _key_rows(self) -> dict[str, int]:
        if not hasattr(self, "_key_rows_cache"):
            self._key_rows_cache = {str(key): i for i, key in enumerate(self.ivf.ids)}
        return self._key_rows_cache


def corpus_fingerprint(docs: list[ReferenceDoc], window: int, overlap: int, profile_tag: str) -> str:
    h = hashlib.sha256()
    h.update(f"{window}|{overlap}|{profile_tag}".encode("utf-8"))
    for doc in sorted(docs, key=lambda d: d.idx):
        h.update(f"\x00{doc.idx}\x01{doc.body_markdown}".encode("utf-8"))
    return h.hexdigest()


def build_corpus_index(
    docs: list[ReferenceDoc],
    embedding: EmbeddingService,
    profile: EmbeddingProfile,
    index_cfg: IndexConfig,
    window: int = 3,
    overlap: int = 1,
    progress=None,
) -> CorpusIndex:
    """Chunk every document into blocks, embed them, and index the corpus."""
    if not docs:
        raise ValidationError("cannot build an index over zero documents")
    blocks: list[tuple[str, Block, ReferenceDoc]] = []
    for doc in sorted(docs, key=lambda d: d.idx):
        for block in chunk_blocks(doc, window=window, overlap=overlap):
            blocks.append((block_key(doc.idx, block.block_index), block, doc))
    keys = [key for key, _, _ in blocks]
    vectors = embedding.embed_texts([b.text for _, b, _ in blocks], profile, progress=progress)
    nlist = index_cfg.nlist or None
    ivf = build_ivfsq8(vectors, keys, nlist=nlist, seed=index_cfg.seed)
    nprobe = index_cfg.nprobe or default_nprobe(ivf.nlist)
    meta = {
        key: BlockMeta(
            doc_id=doc.id,
            doc_idx=doc.idx,
            block_index=block.block_index,
            sentence_indices=block.sentence_indices,
            text=block.text,
        )
        for key, block, doc in blocks
    }
    return CorpusIndex(
        ivf=ivf,
        exact=vectors,
        blocks=meta,
        profile_tag=profile.model_tag,
        corpus_fingerprint=corpus_fingerprint(docs, window, overlap, profile.model_tag),
        nprobe=min(nprobe, ivf.nlist),
    )


def save_corpus_index(corpus: CorpusIndex, directory: str | Path) -> None:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    save_index(corpus.ivf, directory / "blocks.ivq8")
    np.save(directory / "blocks.vec.npy", corpus.exact)
    meta = {
        "profile_tag": corpus.profile_tag,
        "corpus_fingerprint": corpus.corpus_fingerprint,
        "nprobe": corpus.nprobe,
        "blocks": {key: m.to_dict() for key, m in corpus.blocks.items()},
    }
    tmp = directory / "meta.json.tmp"
    tmp.write_text(json.dumps(meta, ensure_ascii=False, indent=2), encoding="utf-8")
    tmp.replace(directory / "meta.json")


def load_corpus_index(directory: str | Path) -> CorpusIndex:
    directory = Path(directory)
    meta_path = directory / "meta.json"
    if not meta_path.is_file():
        raise NotFoundError(f"no corpus index at {directory}")
    meta = json.loads(meta_path.read_text(encoding="utf-8"))
    ivf = load_index(directory / "blocks.ivq8")
    exact = np.load(directory / "blocks.vec.npy")
    if exact.shape[0] != len(ivf):
        raise IntegrityError(f"corpus index vectors and codes disagree in {directory}")
    return CorpusIndex(
        ivf=ivf,
        exact=exact,
        blocks={k: BlockMeta.from_dict(v) for k, v in meta["blocks"].items()},
        profile_tag=meta["profile_tag"],
        corpus_fingerprint=meta["corpus_fingerprint"],
        nprobe=int(meta["nprobe"]),
    )


@dataclass
class CitationLink:
    sentence_start: int
    sentence_end: int
    sentence_text: str
    cited_indices: list[int] | None  # None for an uncited sentence
    hits: list[LinkHit] = field(default_factory=list)
    best_score: float = 0.0
    traceable: bool = False

    def to_dict(self) -> dict:
        return {
            "sentence_start": self.sentence_start,
            "sentence_end": self.sentence_end,
            "sentence_text": self.sentence_text,
            "cited_indices": list(self.cited_indices) if self.cited_indices else None,
            "hits": [h.to_dict() for h in self.hits],
            "best_score": self.best_score,
            "traceable": self.traceable,
        }


@dataclass
class CitationAccuracyReport:
    chapter_id: str
    n_citations: int
    n_traceable: int
    accuracy: float | None  # None when there are no citations
    threshold: float

    def to_dict(self) -> dict:
        return {
            "chapter_id": self.chapter_id,
            "n_citations": self.n_citations,
            "n_traceable": self.n_traceable,
            "accuracy": self.accuracy,
            "threshold": self.threshold,
        }


def strip_citation_marks(sentence: str) -> str:
    """Remove [idx] marks (and the space before them) from a sentence."""
    return _MARK_WITH_SPACE.sub("", sentence).strip()


def trace_sentence(
    sentence: str,
    corpus: CorpusIndex,
    embedding: EmbeddingService,
    profile: EmbeddingProfile,
    k: int = 5,
) -> list[LinkHit]:
    """Embed one sentence and return its top-k scored source blocks."""
    cleaned = strip_citation_marks(sentence)
    if not cleaned:
        raise ValidationError("cannot trace an empty sentence")
    if profile.model_tag != corpus.profile_tag:
        raise IntegrityError(
            f"index was built with '{corpus.profile_tag}', queried with '{profile.model_tag}'"
        )
    query = embedding.embed_batch([cleaned], profile)[0].values
    return corpus.search(query, k)


def _is_traceable(
    hits: list[LinkHit], cited: list[int], threshold: float, match_any: bool
) -> bool:
    if not hits:
        return False
    best = hits[0]
    if best.score < threshold:
        return False
    return match_any or best.doc_idx in cited


def verify_draft(
    draft: SectionDraft,
    corpus: CorpusIndex,
    embedding: EmbeddingService,
    profile: EmbeddingProfile,
    cfg: LinkerConfig,
    progress=None,
) -> tuple[list[CitationLink], CitationAccuracyReport]:
    """Trace every sentence of a draft and grade its citation marks.

    One link per citation mark (a sentence holding several marks yields
    several links); uncited sentences get a link with cited_indices=None so
    the trace view can show them too. With zero citation marks the accuracy
    is explicitly None, not 0.
    """
    text = draft.text_markdown
    spans = segment_sentences(text)
    marks = draft.citations or []
    links: list[CitationLink] = []
    n_citations = 0
    n_traceable = 0
    for i, (a, b) in enumerate(spans):
        sentence = text[a:b]
        cleaned = strip_citation_marks(sentence)
        in_sentence = [m for m in marks if a <= m.start and m.end <= b]
        if not cleaned and not in_sentence:
            continue
        # a bare mark with no prose around it still counts as a citation,
        # it just cannot be traced anywhere
        hits = (
            trace_sentence(sentence, corpus, embedding, profile, k=cfg.top_k)
            if cleaned
            else []
        )
        best = hits[0].score if hits else 0.0
        if in_sentence:
            for mark in in_sentence:
                traceable = _is_traceable(hits, mark.indices, cfg.threshold, cfg.match_any_document)
                n_citations += 1
                n_traceable += int(traceable)
                links.append(
                    CitationLink(
                        sentence_start=a,
                        sentence_end=b,
                        sentence_text=sentence,
                        cited_indices=list(mark.indices),
                        hits=hits,
                        best_score=best,
                        traceable=traceable,
                    )
                )
        else:
            links.append(
                CitationLink(
                    sentence_start=a,
                    sentence_end=b,
                    sentence_text=sentence,
                    cited_indices=None,
                    hits=hits,
                    best_score=best,
                    traceable=False,
                )
            )
        if progress:
            progress(i + 1, len(spans))
    report = CitationAccuracyReport(
        chapter_id=draft.chapter_id,
        n_citations=n_citations,
        n_traceable=n_traceable,
        accuracy=(n_traceable / n_citations) if n_citations else None,
        threshold=cfg.threshold,
    )
    return links, report


def accuracy_at(
    links: list[CitationLink], threshold: float, match_any: bool = False
) -> CitationAccuracyReport:
    """Re-grade stored links at a different threshold without re-searching."""
    n_citations = 0
    n_traceable = 0
    for link in links:
        if link.cited_indices is None:
            continue
        n_citations += 1
        n_traceable += int(_is_traceable(link.hits, link.cited_indices, threshold, match_any))
    return CitationAccuracyReport(
        chapter_id="",
        n_citations=n_citations,
        n_traceable=n_traceable,
        accuracy=(n_traceable / n_citations) if n_citations else None,
        threshold=threshold,
    )
