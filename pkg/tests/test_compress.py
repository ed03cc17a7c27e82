import threading

import pytest

from coauthor.compress import (
    CHARS_PER_TOKEN,
    Compressor,
    estimate_tokens,
    split_at_sentences,
)
from coauthor.config import CompressorConfig
from coauthor.errors import BatchError, TransportError, ValidationError
from coauthor.ingest import ReferenceDoc, segment_sentences
from coauthor.prompt_files import PromptLibrary
from coauthor.providers import ChatService, MockChatProvider


def make_doc(idx, body):
    return ReferenceDoc(
        id=f"doc-{idx:03d}",
        idx=idx,
        title=f"Doc {idx}",
        body_markdown=body,
        sentence_spans=segment_sentences(body),
    )


def make_compressor(provider, budget=2000, cache_dir=None, max_workers=4):
    chat = ChatService(provider, max_retries=1, sleep=lambda _: None)
    return Compressor(
        chat,
        PromptLibrary(),
        CompressorConfig(target_words=4000, context_budget_tokens=budget),
        model_tag="m1",
        max_workers=max_workers,
        cache_dir=cache_dir,
    )


def fixed_report(text="A compact research report of the supplied document."):
    return lambda request: text


def test_short_document_single_pass():
    provider = MockChatProvider(handler=fixed_report("Fixed 100-word style report."))
    compressor = make_compressor(provider)
    report = compressor.compress_document(make_doc(1, "Short body. Two sentences."))
    assert report.stage == "single_pass"
    assert report.report_markdown == "Fixed 100-word style report."
    assert report.word_count == 4
    assert len(provider.calls) == 1


def test_oversized_document_split_then_merge_call_count():
    provider = MockChatProvider(handler=fixed_report())
    compressor = make_compressor(provider, budget=2000)
    capacity_chars = compressor.part_capacity_tokens() * CHARS_PER_TOKEN
    sentence = "x" * (capacity_chars - 2) + ". "
    body = (sentence * 3).strip()  # three part-capacity sentences
    report = compressor.compress_document(make_doc(1, body))
    assert report.stage == "merged"
    assert len(provider.calls) == 4  # ceil(3) part calls + 1 merge call


def test_empty_document_rejected():
    compressor = make_compressor(MockChatProvider(handler=fixed_report()))
    with pytest.raises(ValidationError):
        compressor.compress_document(make_doc(1, "   "))


def test_no_single_request_exceeds_budget():
    seen = []

    def handler(request):
        seen.append(request.user_prompt)
        return "report text"

    provider = MockChatProvider(handler=handler)
    compressor = make_compressor(provider, budget=1500)
    body = " ".join(f"Sentence number {i} fills space in the body." for i in range(600))
    compressor.compress_document(make_doc(1, body))
    budget = compressor.cfg.context_budget_tokens
    assert len(seen) > 1
    for prompt in seen:
        assert estimate_tokens(prompt) <= budget


def test_split_points_fall_at_sentence_boundaries():
    body = " ".join(f"Sentence number {i} sits here." for i in range(100))
    parts = split_at_sentences(body, 120)
    for part in parts:
        assert part.endswith(".")
    assert " ".join(parts) == body


def test_transport_error_carries_doc_id():
    provider = MockChatProvider(mode="echo", fail_times=10)
    compressor = make_compressor(provider)
    with pytest.raises(TransportError) as err:
        compressor.compress_document(make_doc(7, "Body text."))
    assert "doc-007" in str(err.value)


def test_corpus_order_preserved_by_idx():
    provider = MockChatProvider(handler=fixed_report())
    compressor = make_compressor(provider)
    docs = [make_doc(i, f"Body of document {i}.") for i in (3, 1, 5, 2, 4)]
    reports, failures = compressor.compress_corpus(docs)
    assert failures == []
    assert [r.idx for r in reports] == [1, 2, 3, 4, 5]


def test_corpus_partial_failure():
    provider = MockChatProvider(handler=fixed_report())
    compressor = make_compressor(provider)
    docs = [make_doc(i, f"Body {i}.") for i in range(1, 5)] + [make_doc(5, "")]
    reports, failures = compressor.compress_corpus(docs)
    assert len(reports) == 4
    assert len(failures) == 1
    assert failures[0].doc_id == "doc-005"


def test_corpus_all_failed_is_batch_error():
    provider = MockChatProvider(handler=fixed_report())
    compressor = make_compressor(provider)
    with pytest.raises(BatchError):
        compressor.compress_corpus([make_doc(1, ""), make_doc(2, " ")])


def test_corpus_empty_rejected():
    compressor = make_compressor(MockChatProvider(handler=fixed_report()))
    with pytest.raises(ValidationError):
        compressor.compress_corpus([])


def test_book_scale_corpus_bounded_concurrency():
    # corpus at published-book scale: 910 references, concurrency capped
    gate = threading.Semaphore(0)

    def handler(request):
        return "tiny report"

    provider = MockChatProvider(handler=handler)
    compressor = make_compressor(provider, max_workers=8)
    docs = [make_doc(i, f"Stub body {i}.") for i in range(1, 911)]
    progress = []
    reports, failures = compressor.compress_corpus(docs, progress=lambda d, t: progress.append((d, t)))
    assert len(reports) == 910
    assert failures == []
    assert [r.idx for r in reports] == list(range(1, 911))
    assert provider.peak_in_flight <= 8
    assert progress[-1] == (910, 910)
    assert [d for d, _ in progress] == sorted(d for d, _ in progress)


def test_cache_makes_recompression_free(tmp_path):
    class Counting(MockChatProvider):
        pass

    provider = MockChatProvider(handler=fixed_report())
    compressor = make_compressor(provider, cache_dir=tmp_path / "reports")
    doc = make_doc(1, "Stable body. More text.")
    first = compressor.compress_document(doc)
    calls_after_first = len(provider.calls)
    second = compressor.compress_document(doc)
    assert len(provider.calls) == calls_after_first  # zero new provider calls
    assert second.report_markdown == first.report_markdown
    assert second.stage == first.stage


def test_cache_misses_on_changed_body(tmp_path):
    provider = MockChatProvider(handler=fixed_report())
    compressor = make_compressor(provider, cache_dir=tmp_path / "reports")
    compressor.compress_document(make_doc(1, "Version one."))
    n = len(provider.calls)
    compressor.compress_document(make_doc(1, "Version two."))
    assert len(provider.calls) == n + 1
