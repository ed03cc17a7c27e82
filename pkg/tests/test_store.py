import pytest

from coauthor.errors import ConflictError, IntegrityError, NotFoundError, ValidationError
from coauthor.generate import SectionDraft
from coauthor.ingest import ReferenceDoc, segment_sentences
from coauthor.outline import parse_indented
from coauthor.store import ChapterStatus, WorkspaceStore


@pytest.fixture
def store(tmp_path):
    return WorkspaceStore(tmp_path / "workspace")


def make_doc(idx: int, body: str = "One sentence. Another sentence.") -> ReferenceDoc:
    return ReferenceDoc(
        id=f"doc-{idx:03d}",
        idx=idx,
        title=f"Document {idx}",
        body_markdown=body,
        sentence_spans=segment_sentences(body),
    )


def make_draft(chapter_id: str, text: str = "Generated body [1].") -> SectionDraft:
    return SectionDraft(chapter_id=chapter_id, heading_path=["Intro"], text_markdown=text)


def test_create_project_round_trip(store):
    project = store.create_project("AI for Rock Dynamics")
    assert project.title == "AI for Rock Dynamics"
    assert project.chapters == []
    loaded = store.load_project(project.id)
    assert loaded == project


def test_create_project_empty_title(store):
    with pytest.raises(ValidationError):
        store.create_project("   ")


def test_create_project_duplicate_title(store):
    store.create_project("AI for Rock Dynamics")
    with pytest.raises(ConflictError):
        store.create_project("AI for Rock Dynamics")


def test_load_unknown_project(store):
    with pytest.raises(NotFoundError):
        store.load_project("nope")


def test_truncated_manifest_is_integrity_error(store):
    project = store.create_project("Broken")
    manifest = store.project_dir(project.id) / "project.json"
    raw = manifest.read_text(encoding="utf-8")
    manifest.write_text(raw[: len(raw) // 2], encoding="utf-8")
    with pytest.raises(IntegrityError) as err:
        store.load_project(project.id)
    assert "project.json" in str(err.value)


def test_append_draft_revisions(store):
    project = store.create_project("Book")
    chapter = store.add_chapter(project.id)
    assert store.append_draft_revision(project.id, chapter.id, make_draft(chapter.id)) == 0
    assert store.append_draft_revision(project.id, chapter.id, make_draft(chapter.id, "v2")) == 1
    loaded = store.load_project(project.id)
    assert loaded.chapter(chapter.id).draft_revisions == ["rev-0000", "rev-0001"]
    assert store.load_draft(project.id, chapter.id, 1).text_markdown == "v2"
    assert store.load_draft(project.id, chapter.id, -1).text_markdown == "v2"


def test_append_draft_unknown_chapter(store):
    project = store.create_project("Book")
    with pytest.raises(NotFoundError):
        store.append_draft_revision(project.id, "ch-9999", make_draft("ch-9999"))


def test_draft_revision_files_are_immutable_snapshots(store):
    project = store.create_project("Book")
    chapter = store.add_chapter(project.id)
    store.append_draft_revision(project.id, chapter.id, make_draft(chapter.id, "first"))
    before = store.draft_path(project.id, chapter.id, "rev-0000").read_bytes()
    store.append_draft_revision(project.id, chapter.id, make_draft(chapter.id, "second"))
    assert store.draft_path(project.id, chapter.id, "rev-0000").read_bytes() == before
    assert store.load_draft(project.id, chapter.id, 0).text_markdown == "first"


def test_reference_docs_sorted_by_idx(store):
    project = store.create_project("Book")
    chapter = store.add_chapter(project.id)
    store.add_reference_doc(project.id, chapter.id, make_doc(2))
    store.add_reference_doc(project.id, chapter.id, make_doc(1))
    docs = store.load_chapter_references(project.id, chapter.id)
    assert [d.idx for d in docs] == [1, 2]


def test_duplicate_reference_rejected(store):
    project = store.create_project("Book")
    chapter = store.add_chapter(project.id)
    store.add_reference_doc(project.id, chapter.id, make_doc(1))
    with pytest.raises(ConflictError):
        store.add_reference_doc(project.id, chapter.id, make_doc(1))


def test_status_moves_forward_or_resets_to_parsed(store):
    project = store.create_project("Book")
    chapter = store.add_chapter(project.id)
    store.set_chapter_status(project.id, chapter.id, ChapterStatus.PARSED)
    store.set_chapter_status(project.id, chapter.id, ChapterStatus.COMPRESSED)
    store.set_chapter_status(project.id, chapter.id, ChapterStatus.GENERATED)
    # reset to parsed is always allowed
    store.set_chapter_status(project.id, chapter.id, ChapterStatus.PARSED)
    store.set_chapter_status(project.id, chapter.id, ChapterStatus.COMPRESSED)
    with pytest.raises(ValidationError):
        store.set_chapter_status(project.id, chapter.id, ChapterStatus.EMPTY)


def test_outline_is_validated_on_write(store):
    project = store.create_project("Book")
    chapter = store.add_chapter(project.id)
    outline = parse_indented("Root\n  Leaf\n")
    outline.roots[0].children[0].level = 5  # corrupt levels
    with pytest.raises(ValidationError):
        store.set_outline(project.id, chapter.id, outline)


def test_outline_round_trip(store):
    project = store.create_project("Book")
    chapter = store.add_chapter(project.id)
    outline = parse_indented("Root\n  Leaf One\n  Leaf Two\n")
    store.set_outline(project.id, chapter.id, outline)
    assert store.load_project(project.id).chapter(chapter.id).outline == outline


def test_uploads_staging(store):
    project = store.create_project("Book")
    chapter = store.add_chapter(project.id)
    store.stage_upload(project.id, chapter.id, "ref.md", "# Title\nBody.", "markdown")
    loaded = store.load_project(project.id).chapter(chapter.id)
    assert [u.filename for u in loaded.pending_uploads] == ["ref.md"]
    assert store.upload_path(project.id, chapter.id, "ref.md").read_text(encoding="utf-8").startswith("# Title")
    store.clear_uploads(project.id, chapter.id)
    assert store.load_project(project.id).chapter(chapter.id).pending_uploads == []


def test_draft_round_trip_preserves_structure(store):
    project = store.create_project("Book")
    chapter = store.add_chapter(project.id)
    draft = make_draft(chapter.id, "Body cites [1] and [2, 3].")
    from coauthor.generate import parse_citation_marks

    draft.citations = parse_citation_marks(draft.text_markdown)
    store.append_draft_revision(project.id, chapter.id, draft)
    loaded = store.load_draft(project.id, chapter.id, 0)
    assert loaded == draft
