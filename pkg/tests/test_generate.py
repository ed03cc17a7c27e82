import re

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from coauthor.compress import CompressedReport
from coauthor.errors import ValidationError
from coauthor.generate import (
    GenerationConfig,
    Generator,
    SectionDraft,
    check_citation_coverage,
    parse_citation_marks,
    plan_batches,
    remap_citations,
)
from coauthor.outline import parse_indented
from coauthor.prompt_files import PromptLibrary
from coauthor.providers import ChatService, MockChatProvider

OUTLINE = parse_indented("Impact Mechanics\n  Wave Fronts\n  Energy Budgets\n")
LEAF = ["Impact Mechanics", "Wave Fronts"]

_ENTRY = re.compile(r"^(\d+)\. ", re.MULTILINE)
_MARK = re.compile(r"\[(\d+(?:\s*,\s*\d+)*)\]")


def pattern_mock():
    """Pattern-emitting mock: echoes the citation marks found inside the
    provided reference materials; if the materials carry no marks (plain
    compressed reports), it cites every numbered entry it can see."""

    def handler(request):
        refs_block = request.user_prompt.split("References:", 1)[-1]
        entry_numbers, inline = [], []
        for line in refs_block.splitlines():
            m = _ENTRY.match(line)
            if not m:
                continue
            entry_numbers.append(int(m.group(1)))
            body = line.split(" — ", 1)[1] if " — " in line else ""
            for mk in _MARK.finditer(body):
                inline.extend(int(x) for x in mk.group(1).split(","))
        cited = sorted(set(inline)) if inline else sorted(set(entry_numbers))
        return " ".join(f"Claim supported by source [{n}]." for n in cited)

    return MockChatProvider(handler=handler)


def make_generator(provider, limit=40):
    chat = ChatService(provider, max_retries=1, sleep=lambda _: None)
    cfg = GenerationConfig(model_tag="m1", batch_limit=limit)
    return Generator(chat, PromptLibrary(), cfg, max_workers=4)


def reports(n, start=1):
    return [
        CompressedReport(
            doc_id=f"doc-{i:03d}",
            idx=i,
            report_markdown=f"Report body {i}.",
            word_count=3,
            stage="single_pass",
        )
        for i in range(start, start + n)
    ]


# -- plan_batches -----------------------------------------------------------


def test_plan_100_refs_limit_40():
    assert plan_batches(100, 40) == [40, 40, 20]


def test_plan_exactly_at_limit_single_stage():
    assert plan_batches(40, 40) == [40]


def test_plan_single_ref():
    assert plan_batches(1, 40) == [1]


def test_plan_zero_refs_rejected():
    with pytest.raises(ValidationError):
        plan_batches(0, 40)


@settings(max_examples=200)
@given(n=st.integers(1, 2000), limit=st.integers(1, 60))
def test_plan_properties(n, limit):
    sizes = plan_batches(n, limit)
    assert sum(sizes) == n
    assert all(s <= limit for s in sizes)
    assert len([s for s in sizes if s < limit]) <= 1


# -- citation parsing and remap ------------------------------------------------


def test_parse_single_and_group_marks():
    marks = parse_citation_marks("Text [3] and [3, 49] and [12,5].")
    assert [m.indices for m in marks] == [[3], [3, 49], [12, 5]]
    assert all(
        "Text [3] and [3, 49] and [12,5]."[m.start : m.end].startswith("[") for m in marks
    )


def test_parse_ignores_non_numeric_brackets():
    assert parse_citation_marks("See [table] and [eq 4].") == []


def test_remap_rewrites_and_flags():
    text = "One [1]. Two [2, 3]. Bad [9]."
    out, unmapped = remap_citations(text, {1: 41, 2: 42, 3: 43})
    assert out == "One [41]. Two [42, 43]. Bad [9]."
    assert len(unmapped) == 1
    assert unmapped[0].indices == [9]
    assert out[unmapped[0].start : unmapped[0].end] == "[9]"


# -- single-stage generation -------------------------------------------------------


def test_five_reports_single_stage():
    provider = MockChatProvider(mode="template")
    gen = make_generator(provider)
    draft = gen.generate_section("ch-0001", "Book", OUTLINE, LEAF, reports(5))
    assert len(provider.calls) == 1
    assert len(draft.batch_trace) == 1
    assert draft.batch_trace[0].kind == "single"
    cited = sorted({i for m in draft.citations for i in m.indices})
    assert cited == [1, 2, 3, 4, 5]
    assert draft.hallucinated_marks == []
    assert draft.provenance == "final"
    assert "Wave Fronts" in draft.text_markdown


def test_empty_reports_rejected():
    gen = make_generator(MockChatProvider(mode="template"))
    with pytest.raises(ValidationError):
        gen.generate_section("ch", "Book", OUTLINE, LEAF, [])


def test_non_leaf_heading_rejected():
    gen = make_generator(MockChatProvider(mode="template"))
    with pytest.raises(ValidationError):
        gen.generate_section("ch", "Book", OUTLINE, ["Impact Mechanics"], reports(3))


def test_out_of_range_citation_flagged_not_dropped():
    provider = MockChatProvider(handler=lambda req: "Claim [1]. Wild claim [150].")
    gen = make_generator(provider)
    draft = gen.generate_section("ch", "Book", OUTLINE, LEAF, reports(5))
    assert "[150]" in draft.text_markdown  # never silently dropped
    assert any(m.indices == [150] for m in draft.hallucinated_marks)


# -- multi-stage generation ----------------------------------------------------------


def test_100_reports_call_counts_and_remap():
    provider = pattern_mock()
    gen = make_generator(provider, limit=40)
    draft = gen.generate_section("ch-0001", "Book", OUTLINE, LEAF, reports(100))
    assert len(provider.calls) == 4  # 3 batch calls + 1 merge call
    kinds = [b.kind for b in draft.batch_trace]
    assert kinds == ["batch", "batch", "batch", "merge"]
    assert [b.size for b in draft.batch_trace] == [40, 40, 20, 3]
    cited = sorted({i for m in draft.citations for i in m.indices})
    assert cited == list(range(1, 101))  # remapped into the full universe
    assert draft.hallucinated_marks == []


def test_remap_correctness_with_non_contiguous_universe():
    # global universe {2, 4, ..., 20}: batch-local [1..5] must land on evens
    provider = pattern_mock()
    gen = make_generator(provider, limit=5)
    evens = [
        CompressedReport(
            doc_id=f"doc-{i:03d}",
            idx=i,
            report_markdown=f"Report {i}.",
            word_count=2,
            stage="single_pass",
        )
        for i in range(2, 21, 2)
    ]
    draft = gen.generate_section("ch", "Book", OUTLINE, LEAF, evens)
    cited = sorted({i for m in draft.citations for i in m.indices})
    assert cited == list(range(2, 21, 2))
    assert draft.hallucinated_marks == []


def test_batch_trace_records_global_indices():
    provider = pattern_mock()
    gen = make_generator(provider, limit=40)
    draft = gen.generate_section("ch", "Book", OUTLINE, LEAF, reports(100))
    assert draft.batch_trace[0].global_indices == list(range(1, 41))
    assert draft.batch_trace[1].global_indices == list(range(41, 81))
    assert draft.batch_trace[2].global_indices == list(range(81, 101))
    assert draft.batch_trace[3].global_indices == list(range(1, 101))


def test_recursion_when_intermediates_exceed_limit():
    provider = pattern_mock()
    gen = make_generator(provider, limit=2)
    draft = gen.generate_section("ch", "Book", OUTLINE, LEAF, reports(8))
    # 4 batches of 2, then merge groups of 2: 2 calls, then final merge: 1
    kinds = [b.kind for b in draft.batch_trace]
    assert kinds.count("batch") == 4
    assert kinds.count("merge") == 3
    assert len(provider.calls) == 7
    cited = sorted({i for m in draft.citations for i in m.indices})
    assert cited == list(range(1, 9))


def test_byte_identical_across_runs():
    drafts = []
    for _ in range(2):
        gen = make_generator(pattern_mock(), limit=40)
        drafts.append(gen.generate_section("ch", "Book", OUTLINE, LEAF, reports(100)))
    assert drafts[0].text_markdown == drafts[1].text_markdown
    assert drafts[0].to_dict() == drafts[1].to_dict()


# -- coverage check --------------------------------------------------------------------


def test_coverage_reports_uncited():
    draft = SectionDraft(
        chapter_id="ch",
        heading_path=LEAF,
        text_markdown="Cites [1] and [2].",
        citations=parse_citation_marks("Cites [1] and [2]."),
    )
    assert check_citation_coverage(draft, 3) == [3]


def test_coverage_all_cited():
    text = "Cites [1] then [2] then [3]."
    draft = SectionDraft(
        chapter_id="ch", heading_path=LEAF, text_markdown=text, citations=parse_citation_marks(text)
    )
    assert check_citation_coverage(draft, 3) == []


def test_coverage_group_marks_count_each_index():
    text = "Group cite [1, 3]."
    draft = SectionDraft(
        chapter_id="ch", heading_path=LEAF, text_markdown=text, citations=parse_citation_marks(text)
    )
    assert check_citation_coverage(draft, 3) == [2]


# -- chapter stitching and head/tail ------------------------------------------------------


def test_generate_chapter_stitches_headings():
    gen = make_generator(MockChatProvider(mode="template"))
    draft = gen.generate_chapter("ch-0001", "Book", OUTLINE, reports(4))
    text = draft.text_markdown
    assert "# Impact Mechanics" in text
    assert "## Wave Fronts" in text
    assert "## Energy Budgets" in text
    assert text.index("# Impact Mechanics") < text.index("## Wave Fronts") < text.index(
        "## Energy Budgets"
    )
    assert len(draft.batch_trace) == 2  # one call per leaf
    assert draft.heading_path == ["Impact Mechanics"]


def test_head_tail_universe_is_chapter_count():
    gen = make_generator(MockChatProvider(mode="template"))
    chapters = [
        SectionDraft(
            chapter_id=f"ch-{i:04d}",
            heading_path=[f"Chapter {i}"],
            text_markdown=f"Chapter {i} body text.",
        )
        for i in range(1, 8)
    ]
    intro = gen.generate_head_tail("Book", chapters, "introduction")
    assert intro.heading_path == ["Introduction"]
    assert intro.batch_trace[0].global_indices == list(range(1, 8))
    cited = {i for m in intro.citations for i in m.indices}
    assert cited <= set(range(1, 8)) and cited
    assert intro.hallucinated_marks == []


def test_head_tail_single_chapter():
    gen = make_generator(MockChatProvider(mode="template"))
    chapters = [
        SectionDraft(chapter_id="ch-0001", heading_path=["Only"], text_markdown="Body.")
    ]
    conclusion = gen.generate_head_tail("Book", chapters, "conclusion")
    assert conclusion.batch_trace[0].size == 1


def test_head_tail_zero_chapters_rejected():
    gen = make_generator(MockChatProvider(mode="template"))
    with pytest.raises(ValidationError):
        gen.generate_head_tail("Book", [], "introduction")


def test_draft_round_trip():
    gen = make_generator(pattern_mock(), limit=40)
    draft = gen.generate_section("ch", "Book", OUTLINE, LEAF, reports(45))
    assert SectionDraft.from_dict(draft.to_dict()) == draft
