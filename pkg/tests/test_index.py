import numpy as np
import pytest

from coauthor.errors import IntegrityError, ValidationError
from coauthor.index import (
    build_flat,
    build_ivfsq8,
    default_nlist,
    default_nprobe,
    encode_sq8,
    load_index,
    save_index,
)


def unit_rows(n, dim, seed):
    rng = np.random.default_rng(seed)
    m = rng.standard_normal((n, dim))
    return m / np.linalg.norm(m, axis=1)[:, None]


def keys(n):
    return [f"{i:05d}" for i in range(n)]


def brute_force_top_k(vectors, ids, query, k):
    """Independent oracle: plain dot-product scan, sort by (-score, id)."""
    scores = [(float(np.dot(v, query)), ids[i]) for i, v in enumerate(vectors)]
    scores.sort(key=lambda t: (-t[0], t[1]))
    return [key for _, key in scores[:k]]


def decoded_exhaustive_top_k(index, query, k):
    """Oracle for full-probe identity: scan every decoded code."""
    decoded = index.decode()
    scores = np.clip(decoded @ query, -1.0, 1.0)
    order = sorted(range(len(index)), key=lambda i: (-scores[i], str(index.ids[i])))
    return [str(index.ids[i]) for i in order[:k]]


# -- flat ---------------------------------------------------------------------


def test_flat_orthonormal_basis():
    vectors = np.eye(3)
    index = build_flat(vectors, ["e1", "e2", "e3"])
    hits = index.search(np.array([1.0, 0.0, 0.0]), k=1)
    assert hits[0].key == "e1"
    assert hits[0].score == pytest.approx(1.0)


def test_flat_antipodal_score():
    index = build_flat(np.eye(3), ["e1", "e2", "e3"])
    hits = index.search(np.array([-1.0, 0.0, 0.0]), k=3)
    assert hits[-1].key == "e1"
    assert hits[-1].score == pytest.approx(-1.0)


def test_flat_matches_brute_force_oracle():
    vectors = unit_rows(1000, 32, seed=7)
    ids = keys(1000)
    index = build_flat(vectors, ids)
    rng = np.random.default_rng(8)
    for _ in range(20):
        q = rng.standard_normal(32)
        q /= np.linalg.norm(q)
        got = [h.key for h in index.search(q, k=10)]
        assert got == brute_force_top_k(vectors, ids, q, 10)


def test_flat_rejects_non_unit_rows():
    with pytest.raises(IntegrityError):
        build_flat(np.ones((3, 4)), ["a", "b", "c"])


def test_flat_rejects_duplicate_ids():
    with pytest.raises(IntegrityError):
        build_flat(np.eye(2), ["a", "a"])


def test_flat_k_saturation():
    index = build_flat(np.eye(4), keys(4))
    assert len(index.search(np.eye(4)[0], k=100)) == 4


def test_flat_k_validation():
    index = build_flat(np.eye(2), ["a", "b"])
    with pytest.raises(ValidationError):
        index.search(np.eye(2)[0], k=0)


def test_flat_tie_break_ascending_key():
    v = np.array([[1.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
    index = build_flat(v, ["bbb", "aaa", "ccc"])
    got = [h.key for h in index.search(np.array([1.0, 0.0]), k=2)]
    assert got == ["aaa", "bbb"]


# -- quantizer ---------------------------------------------------------------------


def test_quantizer_midpoint_half_up():
    mins = np.array([0.0])
    maxs = np.array([1.0])
    code = encode_sq8(np.array([[0.5]]), mins, maxs)
    assert code[0, 0] == 128  # round(127.5) half-up
    decoded = mins + code.astype(float) * (maxs - mins) / 255.0
    assert decoded[0, 0] == pytest.approx(128 / 255)


def test_quantizer_constant_dimension():
    vectors = np.full((5, 1), 0.7)
    codes = encode_sq8(vectors, np.array([0.7]), np.array([0.7]))
    assert (codes == 0).all()
    # decode of a degenerate dimension is exactly the minimum
    decoded = np.array([0.7]) + codes.astype(float) * 0.0
    assert (decoded == 0.7).all()


def test_reconstruction_error_bound():
    vectors = unit_rows(500, 16, seed=3)
    index = build_ivfsq8(vectors, keys(500), nlist=10, seed=0)
    decoded = index.decode()
    step = (index.maxs - index.mins) / 255.0
    assert np.all(np.abs(decoded - vectors) <= step / 2 + 1e-9)


# -- ivf-sq8 ------------------------------------------------------------------------


def test_nlist_one_single_posting_list():
    vectors = unit_rows(50, 8, seed=1)
    index = build_ivfsq8(vectors, keys(50), nlist=1, seed=0)
    assert index.nlist == 1
    assert sorted(index.postings[0].tolist()) == list(range(50))


def test_every_row_in_exactly_one_posting():
    vectors = unit_rows(200, 16, seed=2)
    index = build_ivfsq8(vectors, keys(200), nlist=13, seed=0)
    seen = np.concatenate(index.postings)
    assert sorted(seen.tolist()) == list(range(200))


def test_full_probe_equals_exhaustive_decoded_search():
    vectors = unit_rows(300, 24, seed=5)
    index = build_ivfsq8(vectors, keys(300), nlist=17, seed=0)
    rng = np.random.default_rng(6)
    for _ in range(10):
        q = rng.standard_normal(24)
        q /= np.linalg.norm(q)
        got = [h.key for h in index.search(q, k=15, nprobe=index.nlist)]
        assert got == decoded_exhaustive_top_k(index, q, 15)


def test_build_is_deterministic():
    vectors = unit_rows(150, 12, seed=9)
    a = build_ivfsq8(vectors, keys(150), nlist=9, seed=42)
    b = build_ivfsq8(vectors, keys(150), nlist=9, seed=42)
    np.testing.assert_array_equal(a.centroids, b.centroids)
    np.testing.assert_array_equal(a.codes, b.codes)
    for pa, pb in zip(a.postings, b.postings):
        np.testing.assert_array_equal(pa, pb)


def test_recall_monotone_in_nprobe():
    vectors = unit_rows(600, 16, seed=11)
    ids = keys(600)
    index = build_ivfsq8(vectors, ids, nlist=24, seed=0)
    rng = np.random.default_rng(12)
    queries = rng.standard_normal((15, 16))
    queries /= np.linalg.norm(queries, axis=1)[:, None]
    truth = [set(brute_force_top_k(vectors, ids, q, 10)) for q in queries]
    last = -1.0
    for nprobe in (1, 2, 4, 8, 16, 24):
        hits = [set(h.key for h in index.search(q, k=10, nprobe=nprobe)) for q in queries]
        recall = float(np.mean([len(h & t) / len(t) for h, t in zip(hits, truth)]))
        assert recall >= last - 1e-12
        last = recall


def test_n_less_than_nlist_rejected():
    with pytest.raises(ValidationError):
        build_ivfsq8(unit_rows(3, 4, seed=0), keys(3), nlist=5)


def test_nprobe_bounds():
    index = build_ivfsq8(unit_rows(20, 4, seed=0), keys(20), nlist=4)
    q = unit_rows(1, 4, seed=1)[0]
    with pytest.raises(ValidationError):
        index.search(q, k=1, nprobe=0)
    with pytest.raises(ValidationError):
        index.search(q, k=1, nprobe=5)


def test_default_parameters():
    assert default_nlist(10000) == 100
    assert default_nlist(1) == 1
    assert default_nprobe(100) == 12
    assert default_nprobe(4) == 1


def test_k_larger_than_n_returns_all():
    index = build_ivfsq8(unit_rows(12, 6, seed=4), keys(12), nlist=3)
    q = unit_rows(1, 6, seed=5)[0]
    assert len(index.search(q, k=50, nprobe=3)) == 12


# -- persistence -----------------------------------------------------------------------


def test_save_load_round_trip(tmp_path):
    vectors = unit_rows(80, 10, seed=21)
    index = build_ivfsq8(vectors, keys(80), nlist=7, seed=1)
    path = tmp_path / "chapter.ivq8"
    save_index(index, path)
    loaded = load_index(path)
    np.testing.assert_array_equal(loaded.centroids, index.centroids)
    np.testing.assert_array_equal(loaded.codes, index.codes)
    np.testing.assert_array_equal(loaded.mins, index.mins)
    np.testing.assert_array_equal(loaded.maxs, index.maxs)
    assert [p.tolist() for p in loaded.postings] == [p.tolist() for p in index.postings]
    assert loaded.ids.tolist() == index.ids.tolist()
    q = unit_rows(1, 10, seed=22)[0]
    assert [h.key for h in loaded.search(q, 5, nprobe=7)] == [
        h.key for h in index.search(q, 5, nprobe=7)
    ]


def test_load_rejects_bad_magic(tmp_path):
    path = tmp_path / "bad.ivq8"
    path.write_bytes(b"NOPE" + b"\x00" * 64)
    with pytest.raises(IntegrityError):
        load_index(path)


def test_load_rejects_truncated_file(tmp_path):
    vectors = unit_rows(30, 6, seed=30)
    index = build_ivfsq8(vectors, keys(30), nlist=3, seed=1)
    path = tmp_path / "t.ivq8"
    save_index(index, path)
    raw = path.read_bytes()
    path.write_bytes(raw[: len(raw) // 2])
    with pytest.raises(IntegrityError):
        load_index(path)
