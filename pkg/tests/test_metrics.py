import functools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from alignbench.errors import ContractError
from alignbench.metrics import (QAResult, RankingTable, accuracy, anls, levenshtein, recall_at_k, rsum,
                                vqa_soft_score)
from alignbench.rng import Rng64


def sort_oracle(sim, gt, k):
    hits = 0
    for q, row in enumerate(sim):
        order = sorted(range(len(row)), key=lambda c: (-row[c], c))
        hits += gt[q] in order[:k]
    return 100.0 * hits / len(sim)


def test_perfect_and_reversed():
    eye = RankingTable(np.eye(10), np.arange(10))
    assert recall_at_k(eye, 1) == 100.0
    assert rsum(eye) == 300.0
    rev = RankingTable(np.tile(np.arange(10.0), (10, 1)), np.zeros(10, dtype=int))
    assert recall_at_k(rev, 1) == 0.0
    assert recall_at_k(rev, 10) == 100.0
    worst = RankingTable(np.tile(np.arange(12.0), (12, 1)), np.zeros(12, dtype=int))
    assert rsum(worst) == 0.0


@pytest.mark.parametrize("seed", range(10))
def test_recall_matches_sort_oracle(seed):
    rng = Rng64(seed)
    sim = np.round(rng.normal((20, 20)), 1)  # rounding forces ties
    gt = rng.integers(20, 20)
    t = RankingTable(sim, gt)
    for k in (1, 5, 10, 20):
        assert recall_at_k(t, k) == sort_oracle(sim.tolist(), gt.tolist(), k)
    assert rsum(t) == recall_at_k(t, 1) + recall_at_k(t, 5) + recall_at_k(t, 10)


def test_tie_goes_to_lower_index():
    t = RankingTable(np.ones((2, 3)), np.array([0, 2]))
    assert recall_at_k(t, 1) == 50.0


def test_recall_errors():
    t = RankingTable(np.eye(5), np.arange(5))
    with pytest.raises(ContractError):
        recall_at_k(t, 0)
    with pytest.raises(ContractError):
        recall_at_k(t, 6)
    with pytest.raises(ContractError):
        rsum(t)
    with pytest.raises(ContractError):
        RankingTable(np.eye(3), np.array([0, 1, 3]))


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**32))
def test_recall_monotone_and_transform_invariant(seed):
    rng = Rng64(seed)
    sim, gt = rng.normal((8, 12)), rng.integers(12, 8)
    t = RankingTable(sim, gt)
    vals = [recall_at_k(t, k) for k in range(1, 13)]
    assert vals == sorted(vals) and vals[-1] == 100.0
    warped = RankingTable(np.exp(3 * sim) - 5, gt)
    assert [recall_at_k(warped, k) for k in range(1, 13)] == vals


def test_vqa_soft_score():
    gts = ("cat",) * 3 + ("dog",) * 7
    assert vqa_soft_score(QAResult("cat", gts)) == 1.0
    assert vqa_soft_score(QAResult("dog", gts)) == 1.0
    assert vqa_soft_score(QAResult("emu", gts)) == 0.0
    assert vqa_soft_score(QAResult("cat", ("cat",) + ("dog",) * 9)) == 1 / 3
    with pytest.raises(ContractError):
        QAResult("cat", ())


@functools.lru_cache(maxsize=None)
def recursive_edit(a, b):
    if not a or not b:
        return len(a) + len(b)
    return min(recursive_edit(a[1:], b) + 1, recursive_edit(a, b[1:]) + 1,
               recursive_edit(a[1:], b[1:]) + (a[0] != b[0]))


def test_levenshtein_examples():
    assert levenshtein("same", "same") == 0
    assert levenshtein("", "abc") == 3
    assert levenshtein("kitten", "sitting") == 3


words = st.text(alphabet="abc", max_size=6)


@settings(max_examples=500, deadline=None)
@given(words, words, words)
def test_levenshtein_metric_axioms(a, b, c):
    ab = levenshtein(a, b)
    assert ab == levenshtein(b, a) == recursive_edit(a, b)
    assert (ab == 0) == (a == b)
    assert levenshtein(a, c) <= ab + levenshtein(b, c)


def test_anls_examples():
    assert anls(QAResult("Paris", ("paris ",))) == 1.0
    assert anls(QAResult("abc", ("xyz",))) == 0.0
    assert anls(QAResult("kitten", ("sitting",))) == pytest.approx(4 / 7, abs=1e-4)
    assert anls(QAResult("kitten", ("sitting",))) == pytest.approx(0.5714, abs=1e-4)
    assert anls(QAResult("kitten", ("zzz", "sitting", "kitten"))) == 1.0
    assert anls(QAResult("", ("",))) == 1.0


@settings(max_examples=200, deadline=None)
@given(words, words)
def test_anls_bounds_and_zero_threshold(a, b):
    assert 0.0 <= anls(QAResult(a, (b,))) <= 1.0
    assert anls(QAResult(a, (b,)), threshold=0.0) == 0.0
    if a:
        assert anls(QAResult(a, (a,)), threshold=0.0) == 0.0


def test_accuracy():
    assert accuracy([1, 2, 3], [1, 0, 3]) == pytest.approx(2 / 3)
