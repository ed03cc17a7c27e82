import pytest

from coauthor.errors import ValidationError
from coauthor.metrics import rouge_l, rouge_n, tokenize


def lcs_oracle(a, b):
    """Quadratic reference DP, independent of the implementation."""
    dp = [[0] * (len(b) + 1) for _ in range(len(a) + 1)]
    for i in range(1, len(a) + 1):
        for j in range(1, len(b) + 1):
            if a[i - 1] == b[j - 1]:
                dp[i][j] = dp[i - 1][j - 1] + 1
            else:
                dp[i][j] = max(dp[i - 1][j], dp[i][j - 1])
    return dp[-1][-1]


def test_tokenization_contract():
    assert tokenize("The CAT, sat-down. 42 times_") == ["the", "cat", "sat", "down", "42", "times"]


def test_rouge_n_identical():
    assert rouge_n("same text here", "same text here", 1) == (1.0, 1.0, 1.0)
    assert rouge_n("same text here", "same text here", 2) == (1.0, 1.0, 1.0)


def test_rouge_n_disjoint():
    assert rouge_n("alpha beta", "gamma delta", 1) == (0.0, 0.0, 0.0)


def test_rouge_1_hand_enumeration():
    # candidate "the cat" vs reference "the cat sat": overlap 2,
    # P = 2/2 = 1, R = 2/3, F1 = 2 * 1 * (2/3) / (1 + 2/3) = 0.8
    p, r, f1 = rouge_n("the cat", "the cat sat", 1)
    assert p == pytest.approx(1.0, abs=1e-9)
    assert r == pytest.approx(2 / 3, abs=1e-9)
    assert f1 == pytest.approx(0.8, abs=1e-9)


def test_rouge_2_clipping_is_multiset_aware():
    # candidate repeats a bigram that appears once in the reference
    p, r, f1 = rouge_n("a b a b", "a b c", 2)
    # candidate bigrams: (a,b) x2, (b,a) x1; reference: (a,b), (b,c)
    assert p == pytest.approx(1 / 3, abs=1e-9)
    assert r == pytest.approx(1 / 2, abs=1e-9)


def test_rouge_n_empty_texts():
    assert rouge_n("", "", 1) == (0.0, 0.0, 0.0)
    assert rouge_n("x", "", 1) == (0.0, 0.0, 0.0)


def test_rouge_n_rejects_other_n():
    with pytest.raises(ValidationError):
        rouge_n("a", "b", 3)


def test_rouge_l_identical():
    assert rouge_l("one two three", "one two three") == (1.0, 1.0, 1.0)


def test_rouge_l_hand_case():
    p, r, f1 = rouge_l("a b c d", "a x c y")
    assert p == pytest.approx(0.5, abs=1e-9)
    assert r == pytest.approx(0.5, abs=1e-9)
    assert f1 == pytest.approx(0.5, abs=1e-9)


def test_rouge_l_empty_candidate():
    assert rouge_l("", "reference text") == (0.0, 0.0, 0.0)


def test_rouge_l_matches_quadratic_oracle_on_random_texts():
    import random

    rng = random.Random(7)
    vocab = ["rock", "wave", "strain", "blast", "core", "fault", "shear", "joint"]
    for _ in range(50):
        cand = " ".join(rng.choices(vocab, k=rng.randint(1, 60)))
        ref = " ".join(rng.choices(vocab, k=rng.randint(1, 60)))
        lcs = lcs_oracle(tokenize(cand), tokenize(ref))
        p, r, _ = rouge_l(cand, ref)
        assert p == pytest.approx(lcs / len(tokenize(cand)), abs=1e-12)
        assert r == pytest.approx(lcs / len(tokenize(ref)), abs=1e-12)


def test_scores_within_unit_interval_and_f1_zero_iff_pr_zero():
    import random

    rng = random.Random(8)
    vocab = ["a", "b", "c", "d"]
    for _ in range(100):
        cand = " ".join(rng.choices(vocab, k=rng.randint(0, 20)))
        ref = " ".join(rng.choices(vocab, k=rng.randint(0, 20)))
        for score in (rouge_n(cand, ref, 1), rouge_n(cand, ref, 2), rouge_l(cand, ref)):
            assert 0.0 <= score.precision <= 1.0
            assert 0.0 <= score.recall <= 1.0
            assert 0.0 <= score.f1 <= 1.0
            assert (score.f1 == 0.0) == (score.precision == 0.0 and score.recall == 0.0)
