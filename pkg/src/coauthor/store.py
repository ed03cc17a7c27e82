"""On-disk project workspace.

One directory per project: a JSON manifest plus one file per reference
document, compressed report, and draft revision. Everything is UTF-8 JSON so
an expert can inspect or diff any artifact. Writes go to a temp file and are
renamed into place, so a killed process never leaves a torn file behind.

Draft revisions are immutable snapshots, never deltas: computing the manual
correction rate needs the full first and final drafts.
"""

from __future__ import annotations

import json
import os
import re
import tempfile
from dataclasses import dataclass, field
from datetime import datetime, timezone
from enum import Enum
from pathlib import Path

from .errors import ConflictError, IntegrityError, NotFoundError, ValidationError
from .ingest import ReferenceDoc
from .outline import Outline

_SLUG_RE = re.compile(r"[^a-z0-9]+")


class ChapterStatus(str, Enum):
    EMPTY = "empty"
    PARSED = "parsed"
    COMPRESSED = "compressed"
    GENERATED = "generated"
    LINKED = "linked"
    FINALIZED = "finalized"


_STATUS_ORDER = [
    ChapterStatus.EMPTY,
    ChapterStatus.PARSED,
    ChapterStatus.COMPRESSED,
    ChapterStatus.GENERATED,
    ChapterStatus.LINKED,
    ChapterStatus.FINALIZED,
]


def status_rank(status: ChapterStatus) -> int:
    return _STATUS_ORDER.index(status)


@dataclass
class UploadRecord:
    filename: str
    kind: str  # markdown | text | pdf_external

    def to_dict(self) -> dict:
        return {"filename": self.filename, "kind": self.kind}

    @classmethod
    def from_dict(cls, data: dict) -> "UploadRecord":
        return cls(filename=data["filename"], kind=data["kind"])


@dataclass
class Chapter:
    id: str
    outline: Outline | None = None
    reference_ids: list[str] = field(default_factory=list)
    draft_revisions: list[str] = field(default_factory=list)
    status: ChapterStatus = ChapterStatus.EMPTY
    pending_uploads: list[UploadRecord] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "outline": self.outline.to_dict() if self.outline else None,
            "reference_ids": list(self.reference_ids),
            "draft_revisions": list(self.draft_revisions),
            "status": self.status.value,
            "pending_uploads": [u.to_dict() for u in self.pending_uploads],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Chapter":
        return cls(
            id=data["id"],
            outline=Outline.from_dict(data["outline"]) if data.get("outline") else None,
            reference_ids=list(data.get("reference_ids", [])),
            draft_revisions=list(data.get("draft_revisions", [])),
            status=ChapterStatus(data.get("status", "empty")),
            pending_uploads=[UploadRecord.from_dict(u) for u in data.get("pending_uploads", [])],
        )


@dataclass
class Project:
    id: str
    title: str
    created_at: datetime
    chapters: list[Chapter] = field(default_factory=list)

    @property
    def chapter_ids(self) -> list[str]:
        return [c.id for c in self.chapters]

    def chapter(self, chapter_id: str) -> Chapter:
        for c in self.chapters:
            if c.id == chapter_id:
                return c
        raise NotFoundError(f"chapter {chapter_id} not found in project {self.id}")

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "title": self.title,
            "created_at": self.created_at.isoformat(),
            "chapters": [c.to_dict() for c in self.chapters],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Project":
        return cls(
            id=data["id"],
            title=data["title"],
            created_at=datetime.fromisoformat(data["created_at"]),
            chapters=[Chapter.from_dict(c) for c in data.get("chapters", [])],
        )


def slugify(title: str) -> str:
    slug = _SLUG_RE.sub("-", title.lower()).strip("-")
    return slug or "project"


def write_json_atomic(path: Path, payload: dict | list) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            json.dump(payload, fh, ensure_ascii=False, indent=2)
            fh.write("\n")
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def read_json(path: Path):
    if not path.is_file():
        raise NotFoundError(f"file not found: {path}")
    try:
        return json.loads(path.read_text(encoding="utf-8"))
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise IntegrityError(f"corrupted file {path}: {exc}") from exc


class WorkspaceStore:
    """Filesystem-backed store for projects and their artifacts."""

    def __init__(self, root: str | Path):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)

    # -- paths ------------------------------------------------------------

    def project_dir(self, project_id: str) -> Path:
        return self.root / project_id

    def _manifest(self, project_id: str) -> Path:
        return self.project_dir(project_id) / "project.json"

    def reference_path(self, project_id: str, doc_id: str) -> Path:
        return self.project_dir(project_id) / "references" / f"{doc_id}.json"

    def report_path(self, project_id: str, doc_id: str) -> Path:
        return self.project_dir(project_id) / "reports" / f"{doc_id}.json"

    def draft_path(self, project_id: str, chapter_id: str, revision_id: str) -> Path:
        return self.project_dir(project_id) / "drafts" / chapter_id / f"{revision_id}.json"

    def links_path(self, project_id: str, chapter_id: str, revision: int) -> Path:
        return self.project_dir(project_id) / "links" / chapter_id / f"rev-{revision:04d}.json"

    def metrics_path(self, project_id: str, chapter_id: str, revision: int) -> Path:
        return self.project_dir(project_id) / "metrics" / chapter_id / f"rev-{revision:04d}.json"

    def index_dir(self, project_id: str, chapter_id: str) -> Path:
        return self.project_dir(project_id) / "index" / chapter_id

    def upload_path(self, project_id: str, chapter_id: str, filename: str) -> Path:
        return self.project_dir(project_id) / "uploads" / chapter_id / filename

    # -- projects ----------------------------------------------------------

    def create_project(self, title: str) -> Project:
        if not title or not title.strip():
            raise ValidationError("project title must not be empty")
        title = title.strip()
        for existing in self.list_projects():
            if existing.title == title:
                raise ConflictError(f"a project titled '{title}' already exists")
        project_id = slugify(title)
        if self._manifest(project_id).exists():
            raise ConflictError(f"project id '{project_id}' already exists")
        project = Project(id=project_id, title=title, created_at=datetime.now(timezone.utc))
        self.save_project(project)
        return project

    def save_project(self, project: Project) -> None:
        write_json_atomic(self._manifest(project.id), project.to_dict())

    def load_project(self, project_id: str) -> Project:
        manifest = self._manifest(project_id)
        if not manifest.is_file():
            raise NotFoundError(f"project '{project_id}' not found")
        data = read_json(manifest)
        try:
            return Project.from_dict(data)
        except (KeyError, TypeError, ValueError) as exc:
            raise IntegrityError(f"corrupted file {manifest}: {exc}") from exc

    def list_projects(self) -> list[Project]:
        projects = []
        for entry in sorted(self.root.iterdir()) if self.root.is_dir() else []:
            if entry.is_dir() and (entry / "project.json").is_file():
                projects.append(self.load_project(entry.name))
        return projects

    # -- chapters ----------------------------------------------------------

    def add_chapter(self, project_id: str) -> Chapter:
        project = self.load_project(project_id)
        chapter = Chapter(id=f"ch-{len(project.chapters) + 1:04d}")
        project.chapters.append(chapter)
        self.save_project(project)
        return chapter

    def set_outline(self, project_id: str, chapter_id: str, outline: Outline) -> None:
        outline.validate()
        project = self.load_project(project_id)
        project.chapter(chapter_id).outline = outline
        self.save_project(project)

    def set_chapter_status(self, project_id: str, chapter_id: str, status: ChapterStatus) -> None:
        project = self.load_project(project_id)
        chapter = project.chapter(chapter_id)
        if status is not ChapterStatus.PARSED and status_rank(status) < status_rank(chapter.status):
            raise ValidationError(
                f"chapter status can only move forward or reset to parsed "
                f"({chapter.status.value} -> {status.value})"
            )
        chapter.status = status
        self.save_project(project)

    # -- uploads -----------------------------------------------------------

    def stage_upload(
        self, project_id: str, chapter_id: str, filename: str, content: str | bytes, kind: str
    ) -> UploadRecord:
        project = self.load_project(project_id)
        chapter = project.chapter(chapter_id)
        safe = Path(filename).name
        if not safe:
            raise ValidationError("upload filename must not be empty")
        path = self.upload_path(project_id, chapter_id, safe)
        path.parent.mkdir(parents=True, exist_ok=True)
        if isinstance(content, bytes):
            path.write_bytes(content)
        else:
            path.write_text(content, encoding="utf-8")
        record = UploadRecord(filename=safe, kind=kind)
        chapter.pending_uploads = [
            u for u in chapter.pending_uploads if u.filename != safe
        ] + [record]
        self.save_project(project)
        return record

    def clear_uploads(self, project_id: str, chapter_id: str) -> None:
        project = self.load_project(project_id)
        project.chapter(chapter_id).pending_uploads = []
        self.save_project(project)

    # -- reference documents and reports ------------------------------------

    def add_reference_doc(self, project_id: str, chapter_id: str, doc: ReferenceDoc) -> None:
        project = self.load_project(project_id)
        chapter = project.chapter(chapter_id)
        if doc.id in chapter.reference_ids:
            raise ConflictError(f"reference {doc.id} already attached to {chapter_id}")
        existing = {self.load_reference_doc(project_id, d).idx for d in chapter.reference_ids}
        if doc.idx in existing:
            raise ConflictError(f"citation index {doc.idx} already used in {chapter_id}")
        write_json_atomic(self.reference_path(project_id, doc.id), doc.to_dict())
        chapter.reference_ids.append(doc.id)
        self.save_project(project)

    def load_reference_doc(self, project_id: str, doc_id: str) -> ReferenceDoc:
        data = read_json(self.reference_path(project_id, doc_id))
        return ReferenceDoc.from_dict(data)

    def load_chapter_references(self, project_id: str, chapter_id: str) -> list[ReferenceDoc]:
        project = self.load_project(project_id)
        chapter = project.chapter(chapter_id)
        docs = [self.load_reference_doc(project_id, d) for d in chapter.reference_ids]
        return sorted(docs, key=lambda d: d.idx)

    def save_report(self, project_id: str, report) -> None:
        write_json_atomic(self.report_path(project_id, report.doc_id), report.to_dict())

    def load_report(self, project_id: str, doc_id: str):
        from .compress import CompressedReport

        return CompressedReport.from_dict(read_json(self.report_path(project_id, doc_id)))

    def load_chapter_reports(self, project_id: str, chapter_id: str) -> list:
        docs = self.load_chapter_references(project_id, chapter_id)
        return [self.load_report(project_id, d.id) for d in docs]

    # -- drafts --------------------------------------------------------------

    def append_draft_revision(self, project_id: str, chapter_id: str, draft) -> int:
        """Append an immutable draft snapshot; returns its 0-based index."""
        project = self.load_project(project_id)
        chapter = project.chapter(chapter_id)
        revision = len(chapter.draft_revisions)
        revision_id = f"rev-{revision:04d}"
        path = self.draft_path(project_id, chapter_id, revision_id)
        if path.exists():
            raise IntegrityError(f"revision file already exists: {path}")
        write_json_atomic(path, draft.to_dict())
        chapter.draft_revisions.append(revision_id)
        self.save_project(project)
        return revision

    def load_draft(self, project_id: str, chapter_id: str, revision: int):
        from .generate import SectionDraft

        project = self.load_project(project_id)
        chapter = project.chapter(chapter_id)
        if revision < 0:
            revision += len(chapter.draft_revisions)
        if not (0 <= revision < len(chapter.draft_revisions)):
            raise NotFoundError(
                f"revision {revision} not found for chapter {chapter_id} "
                f"({len(chapter.draft_revisions)} revisions)"
            )
        data = read_json(self.draft_path(project_id, chapter_id, chapter.draft_revisions[revision]))
        return SectionDraft.from_dict(data)

    # -- links, metrics, jobs -------------------------------------------------

    def save_links(self, project_id: str, chapter_id: str, revision: int, payload: dict) -> None:
        write_json_atomic(self.links_path(project_id, chapter_id, revision), payload)

    def load_links(self, project_id: str, chapter_id: str, revision: int) -> dict:
        return read_json(self.links_path(project_id, chapter_id, revision))

    def save_metric_report(
        self, project_id: str, chapter_id: str, revision: int, payload: dict
    ) -> None:
        write_json_atomic(self.metrics_path(project_id, chapter_id, revision), payload)

    def load_metric_report(self, project_id: str, chapter_id: str, revision: int) -> dict:
        return read_json(self.metrics_path(project_id, chapter_id, revision))

    def save_jobs(self, project_id: str, jobs: list[dict]) -> None:
        write_json_atomic(self.project_dir(project_id) / "jobs.json", jobs)

    def load_jobs(self, project_id: str) -> list[dict]:
        path = self.project_dir(project_id) / "jobs.json"
        if not path.is_file():
            return []
        return read_json(path)
