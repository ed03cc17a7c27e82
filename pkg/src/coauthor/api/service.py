"""Engine: the glue between the store, providers and pipeline stages.

The CLI calls these methods directly; the HTTP layer wraps them in jobs.
Store mutations take a per-project lock so concurrent jobs cannot interleave
manifest read-modify-write cycles; long provider work runs outside the lock.
"""

from __future__ import annotations

import threading
from pathlib import Path

from ..compress import Compressor
from ..config import Config
from ..errors import NotFoundError, UndefinedRateError, ValidationError
from ..generate import EDITED, GenerationConfig, Generator, parse_citation_marks
from ..ingest import ingest_document, load_abbreviations
from ..link import (
    accuracy_at,
    build_corpus_index,
    load_corpus_index,
    save_corpus_index,
    verify_draft,
)
from ..metrics import (
    MetricReport,
    build_heading_set,
    correction_rate,
    extract_markdown_headings,
    render_report,
    rouge_l,
    rouge_n,
    soft_heading_recall,
)
from ..metrics.common import text_sha256
from ..outline import parse_outline
from ..prompt_files import PromptLibrary
from ..providers import build_services, profile_from_config
from ..store import ChapterStatus, WorkspaceStore, status_rank

TARGETS = ("chapter", "introduction", "conclusion")


class Engine:
    def __init__(self, config: Config):
        self.config = config
        self.store = WorkspaceStore(config.store.root)
        self.embedding, self.chat = build_services(config)
        self.prompts = PromptLibrary(config.prompts.dir or None)
        self._locks: dict[str, threading.Lock] = {}
        self._locks_guard = threading.Lock()

    def project_lock(self, project_id: str) -> threading.Lock:
        with self._locks_guard:
            return self._locks.setdefault(project_id, threading.Lock())

    # -- small builders -----------------------------------------------------

    def _compressor(self) -> Compressor:
        return Compressor(
            self.chat,
            self.prompts,
            self.config.compressor,
            model_tag=self.config.providers.chat_model,
            max_workers=self.config.providers.max_concurrency,
            cache_dir=Path(self.config.store.root) / ".report-cache",
        )

    def _generator(self) -> Generator:
        g = self.config.generator
        return Generator(
            self.chat,
            self.prompts,
            GenerationConfig(
                model_tag=self.config.providers.chat_model,
                batch_limit=g.batch_limit,
                min_words_hint=g.min_words_hint,
                temperature=g.temperature,
                max_tokens=g.max_tokens,
            ),
            max_workers=self.config.providers.max_concurrency,
        )

    def _require_status(self, chapter, minimum: ChapterStatus, action: str) -> None:
        if status_rank(chapter.status) < status_rank(minimum):
            raise ValidationError(
                f"cannot {action}: chapter {chapter.id} is '{chapter.status.value}', "
                f"needs at least '{minimum.value}'"
            )

    # -- project and chapter management ----------------------------------------

    def create_project(self, title: str) -> dict:
        return project_payload(self.store.create_project(title))

    def get_project(self, project_id: str) -> dict:
        return project_payload(self.store.load_project(project_id))

    def list_projects(self) -> list[dict]:
        return [project_payload(p) for p in self.store.list_projects()]

    def add_chapter(self, project_id: str) -> dict:
        with self.project_lock(project_id):
            return chapter_payload(self.store.add_chapter(project_id))

    def set_outline(self, project_id: str, chapter_id: str, text: str, fmt: str) -> dict:
        outline = parse_outline(text, fmt)
        with self.project_lock(project_id):
            self.store.set_outline(project_id, chapter_id, outline)
            return chapter_payload(self.store.load_project(project_id).chapter(chapter_id))

    def stage_upload(
        self, project_id: str, chapter_id: str, filename: str, content: str | bytes, kind: str
    ) -> dict:
        with self.project_lock(project_id):
            record = self.store.stage_upload(project_id, chapter_id, filename, content, kind)
            return record.to_dict()

    def get_chapter(self, project_id: str, chapter_id: str) -> dict:
        return chapter_payload(self.store.load_project(project_id).chapter(chapter_id))

    def finalize_chapter(self, project_id: str, chapter_id: str) -> dict:
        with self.project_lock(project_id):
            chapter = self.store.load_project(project_id).chapter(chapter_id)
            self._require_status(chapter, ChapterStatus.LINKED, "finalize")
            self.store.set_chapter_status(project_id, chapter_id, ChapterStatus.FINALIZED)
            return self.get_chapter(project_id, chapter_id)

    # -- pipeline stages ------------------------------------------------------------

    def run_ingest(self, project_id: str, chapter_id: str, progress=None) -> dict:
        """Parse every staged upload into reference documents."""
        cfg = self.config.ingest
        with self.project_lock(project_id):
            project = self.store.load_project(project_id)
            chapter = project.chapter(chapter_id)
            uploads = list(chapter.pending_uploads)
            if not uploads:
                raise ValidationError(f"chapter {chapter_id} has no staged uploads to parse")
            existing = [
                self.store.load_reference_doc(project_id, d).idx for d in chapter.reference_ids
            ]
            next_idx = max(existing, default=0) + 1
            abbreviations = load_abbreviations(cfg.abbreviations or None)
            added = []
            for i, record in enumerate(uploads):
                path = self.store.upload_path(project_id, chapter_id, record.filename)
                doc = ingest_document(
                    path,
                    record.kind,
                    idx=next_idx,
                    doc_id=f"{chapter_id}-ref{next_idx:04d}",
                    pdf_command=cfg.pdf_command,
                    abbreviations=abbreviations,
                )
                self.store.add_reference_doc(project_id, chapter_id, doc)
                added.append(doc.id)
                next_idx += 1
                if progress:
                    progress(i + 1, len(uploads))
            self.store.clear_uploads(project_id, chapter_id)
            self.store.set_chapter_status(project_id, chapter_id, ChapterStatus.PARSED)
        return {"ingested": len(added), "doc_ids": added}

    def run_compress(self, project_id: str, chapter_id: str, progress=None) -> dict:
        chapter = self.store.load_project(project_id).chapter(chapter_id)
        self._require_status(chapter, ChapterStatus.PARSED, "compress")
        docs = self.store.load_chapter_references(project_id, chapter_id)
        if not docs:
            raise ValidationError(f"chapter {chapter_id} has no reference documents")
        reports, failures = self._compressor().compress_corpus(docs, progress=progress)
        with self.project_lock(project_id):
            for report in reports:
                self.store.save_report(project_id, report)
            self.store.set_chapter_status(project_id, chapter_id, ChapterStatus.COMPRESSED)
        return {
            "compressed": len(reports),
            "failures": [{"doc_id": f.doc_id, "idx": f.idx, "error": f.error} for f in failures],
        }

    def run_generate(
        self, project_id: str, chapter_id: str, target: str = "chapter", progress=None
    ) -> dict:
        if target not in TARGETS:
            raise ValidationError(f"unknown generation target '{target}'")
        project = self.store.load_project(project_id)
        chapter = project.chapter(chapter_id)
        generator = self._generator()
        if target == "chapter":
            self._require_status(chapter, ChapterStatus.COMPRESSED, "generate")
            if not chapter.reference_ids:
                raise ValidationError(f"chapter {chapter_id} has no reference documents")
            if chapter.outline is None:
                raise ValidationError(f"chapter {chapter_id} has no outline")
            docs = self.store.load_chapter_references(project_id, chapter_id)
            reports = self.store.load_chapter_reports(project_id, chapter_id)
            titles = {d.id: d.title for d in docs}
            draft = generator.generate_chapter(
                chapter_id, project.title, chapter.outline, reports, titles, progress=progress
            )
        else:
            sources = []
            for other in project.chapters:
                if other.id != chapter_id and other.draft_revisions:
                    sources.append(self.store.load_draft(project_id, other.id, -1))
            draft = generator.generate_head_tail(project.title, sources, target, chapter_id)
            if progress:
                progress(1, 1)
        with self.project_lock(project_id):
            revision = self.store.append_draft_revision(project_id, chapter_id, draft)
            self.store.set_chapter_status(project_id, chapter_id, ChapterStatus.GENERATED)
        return {
            "revision": revision,
            "citations": len(draft.citations),
            "hallucinated": len(draft.hallucinated_marks),
            "calls": len(draft.batch_trace),
        }

    def _corpus_index(self, project_id: str, chapter_id: str, progress=None):
        from ..link import corpus_fingerprint

        cfg = self.config.ingest
        profile = profile_from_config(self.config, "linking")
        docs = self.store.load_chapter_references(project_id, chapter_id)
        if not docs:
            raise ValidationError(f"chapter {chapter_id} has no reference documents")
        directory = self.store.index_dir(project_id, chapter_id)
        fingerprint = corpus_fingerprint(docs, cfg.window, cfg.overlap, profile.model_tag)
        try:
            corpus = load_corpus_index(directory)
            if corpus.corpus_fingerprint == fingerprint:
                return corpus
        except NotFoundError:
            pass
        corpus = build_corpus_index(
            docs,
            self.embedding,
            profile,
            self.config.index,
            window=cfg.window,
            overlap=cfg.overlap,
            progress=progress,
        )
        save_corpus_index(corpus, directory)
        return corpus

    def run_link(self, project_id: str, chapter_id: str, revision: int = -1, progress=None) -> dict:
        chapter = self.store.load_project(project_id).chapter(chapter_id)
        self._require_status(chapter, ChapterStatus.GENERATED, "link")
        draft = self.store.load_draft(project_id, chapter_id, revision)
        if revision < 0:
            revision += len(chapter.draft_revisions)
        corpus = self._corpus_index(project_id, chapter_id)
        profile = profile_from_config(self.config, "linking")
        links, report = verify_draft(
            draft, corpus, self.embedding, profile, self.config.linker, progress=progress
        )
        payload = {
            "revision": revision,
            "report": report.to_dict(),
            "links": [link.to_dict() for link in links],
        }
        with self.project_lock(project_id):
            self.store.save_links(project_id, chapter_id, revision, payload)
            self.store.set_chapter_status(project_id, chapter_id, ChapterStatus.LINKED)
        return payload

    def get_links(
        self, project_id: str, chapter_id: str, revision: int, threshold: float | None = None
    ) -> dict:
        payload = self.store.load_links(project_id, chapter_id, revision)
        if threshold is None:
            return payload
        from ..link import CitationLink, LinkHit

        links = []
        for raw in payload["links"]:
            hits = [LinkHit(**h) for h in raw["hits"]]
            links.append(
                CitationLink(
                    sentence_start=raw["sentence_start"],
                    sentence_end=raw["sentence_end"],
                    sentence_text=raw["sentence_text"],
                    cited_indices=raw["cited_indices"],
                    hits=hits,
                    best_score=raw["best_score"],
                    traceable=raw["traceable"],
                )
            )
        regraded = accuracy_at(links, threshold, self.config.linker.match_any_document)
        out_links = []
        for link, raw in zip(links, payload["links"]):
            entry = dict(raw)
            entry["traceable"] = bool(
                link.cited_indices
                and link.hits
                and link.hits[0].score >= threshold
                and (
                    self.config.linker.match_any_document
                    or link.hits[0].doc_idx in link.cited_indices
                )
            )
            out_links.append(entry)
        report = dict(regraded.to_dict(), chapter_id=chapter_id)
        return {"revision": payload["revision"], "report": report, "links": out_links}

    def run_evaluate(
        self,
        project_id: str,
        chapter_id: str,
        revision: int = -1,
        reference_text: str | None = None,
        reference_headings: list[str] | None = None,
        progress=None,
    ) -> dict:
        """Assemble the full metric report for a draft revision."""
        project = self.store.load_project(project_id)
        chapter = project.chapter(chapter_id)
        self._require_status(chapter, ChapterStatus.GENERATED, "evaluate")
        draft = self.store.load_draft(project_id, chapter_id, revision)
        if revision < 0:
            revision += len(chapter.draft_revisions)
        report = MetricReport()
        report.inputs["candidate"] = text_sha256(draft.text_markdown)

        generated_headings = extract_markdown_headings(draft.text_markdown)
        if reference_headings is None and chapter.outline is not None:
            reference_headings = chapter.outline.headings()
        if generated_headings and reference_headings:
            profile = profile_from_config(self.config, "heading_eval")
            generated_set = build_heading_set(
                generated_headings, self.embedding, profile, role="generated"
            )
            reference_set = build_heading_set(
                reference_headings, self.embedding, profile, role="reference"
            )
            report.shr = soft_heading_recall(generated_set, reference_set)
            report.inputs["reference_headings"] = text_sha256("\n".join(reference_headings))
        if progress:
            progress(1, 3)

        if reference_text is None:
            reference_text = self.store.load_draft(project_id, chapter_id, 0).text_markdown
        report.rouge1 = rouge_n(draft.text_markdown, reference_text, 1)
        report.rouge2 = rouge_n(draft.text_markdown, reference_text, 2)
        report.rougeL = rouge_l(draft.text_markdown, reference_text)
        report.inputs["reference"] = text_sha256(reference_text)
        if progress:
            progress(2, 3)

        initial = self.store.load_draft(project_id, chapter_id, 0).text_markdown
        try:
            report.correction = correction_rate(
                initial, draft.text_markdown, self.config.metrics.correction_mode
            )
        except UndefinedRateError:
            report.correction = None
        if progress:
            progress(3, 3)

        payload = {"revision": revision, "report": report.to_dict(), "rendered": render_report(report)}
        with self.project_lock(project_id):
            self.store.save_metric_report(project_id, chapter_id, revision, payload)
        return payload

    def save_draft_edit(self, project_id: str, chapter_id: str, text: str) -> dict:
        """Store an expert edit as a new immutable revision, with the
        correction-rate preview against revision 0."""
        if not text.strip():
            raise ValidationError("draft text must not be empty")
        chapter = self.store.load_project(project_id).chapter(chapter_id)
        self._require_status(chapter, ChapterStatus.GENERATED, "edit the draft of")
        if not chapter.draft_revisions:
            raise ValidationError(f"chapter {chapter_id} has no generated draft to edit")
        initial = self.store.load_draft(project_id, chapter_id, 0).text_markdown
        previous = self.store.load_draft(project_id, chapter_id, -1)
        from ..generate import SectionDraft

        edited = SectionDraft(
            chapter_id=chapter_id,
            heading_path=previous.heading_path,
            text_markdown=text,
            citations=parse_citation_marks(text),
            provenance=EDITED,
            batch_trace=[],
            hallucinated_marks=[],
        )
        with self.project_lock(project_id):
            revision = self.store.append_draft_revision(project_id, chapter_id, edited)
        correction = None
        note = None
        try:
            correction = correction_rate(
                initial, text, self.config.metrics.correction_mode
            ).to_dict()
        except UndefinedRateError as exc:
            note = str(exc)
        return {"revision": revision, "correction": correction, "note": note}

    def get_draft(self, project_id: str, chapter_id: str, revision: int) -> dict:
        draft = self.store.load_draft(project_id, chapter_id, revision)
        chapter = self.store.load_project(project_id).chapter(chapter_id)
        if revision < 0:
            revision += len(chapter.draft_revisions)
        return {"revision": revision, "draft": draft.to_dict()}

    def list_drafts(self, project_id: str, chapter_id: str) -> list[dict]:
        chapter = self.store.load_project(project_id).chapter(chapter_id)
        out = []
        for i, rev_id in enumerate(chapter.draft_revisions):
            draft = self.store.load_draft(project_id, chapter_id, i)
            out.append({"revision": i, "id": rev_id, "provenance": draft.provenance})
        return out


def project_payload(project) -> dict:
    return {
        "id": project.id,
        "title": project.title,
        "created_at": project.created_at.isoformat(),
        "chapters": [chapter_payload(c) for c in project.chapters],
    }


def chapter_payload(chapter) -> dict:
    return {
        "id": chapter.id,
        "status": chapter.status.value,
        "outline": chapter.outline.to_dict() if chapter.outline else None,
        "reference_ids": list(chapter.reference_ids),
        "draft_revisions": list(chapter.draft_revisions),
        "pending_uploads": [u.to_dict() for u in chapter.pending_uploads],
    }
