"""In-process job orchestration with persisted state.

Long-running stages (ingest, compress, generate, link, evaluate) run on a
bounded worker pool. At most one mutating job per chapter may be queued or
running; state transitions are queued -> running -> done | failed, progress
is monotone non-decreasing, and every transition is persisted so a restart
finds a consistent picture (interrupted jobs are marked failed on load).
"""

from __future__ import annotations

import threading
import uuid
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from datetime import datetime, timezone

from ..errors import ConflictError, NotFoundError, ValidationError
from .service import TARGETS, Engine

KINDS = ("ingest", "compress", "generate", "link", "evaluate")

QUEUED = "queued"
RUNNING = "running"
DONE = "done"
FAILED = "failed"


@dataclass
class Job:
    id: str
    kind: str
    project_id: str
    chapter_id: str
    state: str = QUEUED
    done_units: int = 0
    total_units: int = 0
    error: str | None = None
    result: dict | None = None
    params: dict = field(default_factory=dict)
    created_at: str = ""

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "kind": self.kind,
            "project_id": self.project_id,
            "chapter_id": self.chapter_id,
            "state": self.state,
            "progress": [self.done_units, self.total_units],
            "error": self.error,
            "result": self.result,
            "params": dict(self.params),
            "created_at": self.created_at,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Job":
        job = cls(
            id=data["id"],
            kind=data["kind"],
            project_id=data["project_id"],
            chapter_id=data.get("chapter_id", ""),
            state=data["state"],
            error=data.get("error"),
            result=data.get("result"),
            params=dict(data.get("params", {})),
            created_at=data.get("created_at", ""),
        )
        job.done_units, job.total_units = data.get("progress", [0, 0])
        return job


class JobManager:
    def __init__(self, engine: Engine, workers: int = 2):
        self.engine = engine
        self._executor = ThreadPoolExecutor(max_workers=workers, thread_name_prefix="job")
        self._jobs: dict[str, Job] = {}
        self._lock = threading.Lock()
        self._load_persisted()

    # -- persistence -------------------------------------------------------

    def _load_persisted(self) -> None:
        for project in self.engine.store.list_projects():
            dirty = False
            for raw in self.engine.store.load_jobs(project.id):
                job = Job.from_dict(raw)
                if job.state in (QUEUED, RUNNING):
                    job.state = FAILED
                    job.error = "interrupted by service restart"
                    dirty = True
                self._jobs[job.id] = job
            if dirty:
                self._persist(project.id)

    def _persist(self, project_id: str) -> None:
        jobs = [j.to_dict() for j in self._jobs.values() if j.project_id == project_id]
        jobs.sort(key=lambda j: j["created_at"])
        self.engine.store.save_jobs(project_id, jobs)

    # -- submission ----------------------------------------------------------

    def _total_units(self, kind: str, chapter, params: dict) -> int:
        if kind == "ingest":
            return len(chapter.pending_uploads)
        if kind == "compress":
            return len(chapter.reference_ids)
        if kind == "generate":
            if params.get("target", "chapter") != "chapter":
                return 1
            return len(chapter.outline.leaf_paths()) if chapter.outline else 0
        if kind == "evaluate":
            return 3
        return 0  # link: set while running (sentence count)

    def _validate(self, kind: str, chapter, params: dict) -> None:
        if kind == "ingest" and not chapter.pending_uploads:
            raise ValidationError(f"chapter {chapter.id} has no staged uploads")
        if kind in ("compress",) and not chapter.reference_ids:
            raise ValidationError(f"chapter {chapter.id} has no reference documents")
        if kind == "generate":
            target = params.get("target", "chapter")
            if target not in TARGETS:
                raise ValidationError(f"unknown generation target '{target}'")
            if target == "chapter":
                if not chapter.reference_ids:
                    raise ValidationError(f"chapter {chapter.id} has no reference documents")
                if chapter.outline is None:
                    raise ValidationError(f"chapter {chapter.id} has no outline")
        if kind in ("link", "evaluate") and not chapter.draft_revisions:
            raise ValidationError(f"chapter {chapter.id} has no draft revisions")

    def submit(self, kind: str, project_id: str, chapter_id: str, params: dict | None = None) -> Job:
        if kind not in KINDS:
            raise ValidationError(f"unknown job kind '{kind}' (choose from {KINDS})")
        params = dict(params or {})
        project = self.engine.store.load_project(project_id)
        chapter = project.chapter(chapter_id)
        self._validate(kind, chapter, params)
        with self._lock:
            for other in self._jobs.values():
                if (
                    other.project_id == project_id
                    and other.chapter_id == chapter_id
                    and other.state in (QUEUED, RUNNING)
                ):
                    raise ConflictError(
                        f"chapter {chapter_id} already has a {other.kind} job "
                        f"({other.id}) in state {other.state}"
                    )
            job = Job(
                id=uuid.uuid4().hex[:12],
                kind=kind,
                project_id=project_id,
                chapter_id=chapter_id,
                params=params,
                total_units=self._total_units(kind, chapter, params),
                created_at=datetime.now(timezone.utc).isoformat(),
            )
            self._jobs[job.id] = job
            self._persist(project_id)
        self._executor.submit(self._run, job)
        return job

    def get(self, job_id: str) -> Job:
        with self._lock:
            job = self._jobs.get(job_id)
            if job is None:
                raise NotFoundError(f"job '{job_id}' not found")
            return Job.from_dict(job.to_dict())  # snapshot

    def list_for_project(self, project_id: str) -> list[Job]:
        with self._lock:
            jobs = [j for j in self._jobs.values() if j.project_id == project_id]
        return sorted(jobs, key=lambda j: j.created_at)

    # -- execution ---------------------------------------------------------------

    def _set_progress(self, job: Job, done: int, total: int) -> None:
        with self._lock:
            # monotone non-decreasing, whatever a stage reports
            job.done_units = max(job.done_units, done)
            job.total_units = max(job.total_units, total)

    def _run(self, job: Job) -> None:
        with self._lock:
            job.state = RUNNING
            self._persist(job.project_id)

        def progress(done: int, total: int) -> None:
            self._set_progress(job, done, total)

        try:
            engine = self.engine
            if job.kind == "ingest":
                result = engine.run_ingest(job.project_id, job.chapter_id, progress)
            elif job.kind == "compress":
                result = engine.run_compress(job.project_id, job.chapter_id, progress)
            elif job.kind == "generate":
                result = engine.run_generate(
                    job.project_id, job.chapter_id, job.params.get("target", "chapter"), progress
                )
            elif job.kind == "link":
                result = engine.run_link(
                    job.project_id, job.chapter_id, int(job.params.get("revision", -1)), progress
                )
                result = {"revision": result["revision"], "report": result["report"]}
            else:
                result = engine.run_evaluate(
                    job.project_id,
                    job.chapter_id,
                    int(job.params.get("revision", -1)),
                    job.params.get("reference_text"),
                    job.params.get("reference_headings"),
                    progress,
                )
        except Exception as exc:
            with self._lock:
                job.state = FAILED
                job.error = str(exc)
                self._persist(job.project_id)
            return
        with self._lock:
            job.state = DONE
            job.result = result
            job.done_units = max(job.done_units, job.total_units)
            if job.total_units == 0:
                job.total_units = job.done_units = max(job.done_units, 1)
            self._persist(job.project_id)
