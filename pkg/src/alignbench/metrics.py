"""Retrieval and QA evaluation measures."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ContractError, DimensionError


@dataclass(frozen=True)
class RankingTable:
    """Similarity of each query (row) to each candidate (column) plus the true candidate per query."""

    similarity: np.ndarray
    ground_truth: np.ndarray

    def __post_init__(self):
        sim = np.asarray(self.similarity, dtype=np.float64)
        gt = np.asarray(self.ground_truth, dtype=np.int64)
        if sim.ndim != 2:
            raise DimensionError(f"similarity must be 2-D, got {sim.shape}")
        if gt.shape != (sim.shape[0],):
            raise DimensionError(f"need one ground-truth index per query, got {gt.shape}")
        if gt.size and (gt.min() < 0 or gt.max() >= sim.shape[1]):
            raise ContractError("ground-truth index out of range")
        object.__setattr__(self, "similarity", sim)
        object.__setattr__(self, "ground_truth", gt)

    @property
    def n_candidates(self) -> int:
        return self.similarity.shape[1]


def ground_truth_ranks(t: RankingTable) -> np.ndarray:
    """0-based rank of each query's true candidate; ties favour the lower candidate index."""
    sim = t.similarity
    rows = np.arange(sim.shape[0])
    true = sim[rows, t.ground_truth][:, None]
    cols = np.arange(sim.shape[1])[None, :]
    ahead = (sim > true) | ((sim == true) & (cols < t.ground_truth[:, None]))
    return ahead.sum(axis=1)


def recall_at_k(t: RankingTable, k: int) -> float:
    """Percentage of queries whose true candidate is among the top ``k``."""
    if not 1 <= k <= t.n_candidates:
        raise ContractError(f"k={k} outside 1..{t.n_candidates}")
    if t.similarity.shape[0] == 0:
        return 0.0
    hits = int(np.count_nonzero(ground_truth_ranks(t) < k))
    return 100.0 * hits / t.similarity.shape[0]


def rsum(t: RankingTable) -> float:
    if t.n_candidates < 10:
        raise ContractError(f"Rsum needs at least 10 candidates, got {t.n_candidates}")
    return recall_at_k(t, 1) + recall_at_k(t, 5) + recall_at_k(t, 10)


@dataclass(frozen=True)
class QAResult:
    prediction: str
    ground_truths: tuple[str, ...] = field(default_factory=tuple)

    def __post_init__(self):
        gts = (self.ground_truths,) if isinstance(self.ground_truths, str) else tuple(self.ground_truths)
        if not gts:
            raise ContractError("at least one ground-truth answer is required")
        object.__setattr__(self, "ground_truths", gts)


def vqa_soft_score(r: QAResult) -> float:
    """``min(matches / 3, 1)`` over the annotator answers."""
    matches = sum(1 for gt in r.ground_truths if gt == r.prediction)
    return min(matches / 3.0, 1.0)


def levenshtein(a: str, b: str) -> int:
    """Unit-cost edit distance (insert, delete, substitute)."""
    if len(a) < len(b):
        a, b = b, a
    prev = list(range(len(b) + 1))
    for i, ca in enumerate(a, 1):
        cur = [i]
        for j, cb in enumerate(b, 1):
            cur.append(min(prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (ca != cb)))
        prev = cur
    return prev[-1]


def normalized_levenshtein(a: str, b: str) -> float:
    longest = max(len(a), len(b))
    return 0.0 if longest == 0 else levenshtein(a, b) / longest


def anls(r: QAResult, threshold: float = 0.5) -> float:
    """Best thresholded normalised Levenshtein similarity against any ground truth."""
    if not 0.0 <= threshold <= 1.0:
        raise ContractError(f"threshold {threshold} outside [0, 1]")
    pred = r.prediction.strip().lower()
    best = 0.0
    for gt in r.ground_truths:
        nl = normalized_levenshtein(pred, gt.strip().lower())
        best = max(best, 1.0 - nl if nl < threshold else 0.0)
    return best


def accuracy(predicted, target) -> float:
    predicted = np.asarray(predicted)
    target = np.asarray(target)
    if predicted.shape != target.shape:
        raise DimensionError(f"{predicted.shape} predictions vs {target.shape} targets")
    return float(np.mean(predicted == target)) if target.size else 0.0
