"""Fast property and oracle checks behind ``align-bench check``."""

from __future__ import annotations

import itertools
from typing import Callable

import numpy as np

from . import autodiff as ad
from .alignment import ALIGNMENT_NAMES, AlignmentSpec, Kind, score
from .attention import (MacScoreParams, MultiHeadConfig, cross_attend, cross_attend_nodes,
                        encoder_block_nodes, mac_score, mac_score_nodes, self_attend)
from .gradcheck import check_gradients
from .metrics import QAResult, RankingTable, anls, levenshtein, recall_at_k, rsum, vqa_soft_score
from .numeric import row_softmax
from .rng import Rng64

Check = Callable[[], tuple[bool, str]]


def _spec(kind, swap, W=None, b=None):
    return AlignmentSpec(kind, swap, W if kind.has_weight else None, b if kind.has_bias else None)


def check_algebra(draws: int = 60) -> tuple[bool, str]:
    rng = Rng64(11)
    worst = 0.0
    for i in range(draws):
        d = (3, 8, 16)[i % 3]
        Q, K = rng.normal((4, d)), rng.normal((5, d))
        W = rng.normal((d, d))
        worst = max(worst, np.abs(score(_spec(Kind.GENERAL, True, W), Q, K)
                                  - score(_spec(Kind.GENERAL, False, W.T), Q, K)).max() / 1e-10)
        worst = max(worst, np.abs(score(_spec(Kind.GENERAL, False, np.eye(d)), Q, K)
                                  - score(_spec(Kind.DOT, False), Q, K)).max() / 1e-12)
        for swap in (False, True):
            worst = max(worst, np.abs(score(_spec(Kind.BIASED_GENERAL, swap, W, np.zeros((1, d))), Q, K)
                                      - score(_spec(Kind.GENERAL, swap, W), Q, K)).max() / 1e-12)
        dot = score(_spec(Kind.DOT, False), Q, K)
        worst = max(worst, np.abs(score(_spec(Kind.SCALED_DOT, False), Q, K) - dot / np.sqrt(d)).max() / 1e-12)
    return worst <= 1.0, f"worst error / tolerance = {worst:.3g}"


def check_softmax_bias() -> tuple[bool, str]:
    rng = Rng64(12)
    d = 6
    Q, K = rng.normal((4, d)), rng.normal((7, d))
    W, b = rng.normal((d, d)), rng.normal((1, d))
    sums = []
    for name, (kind, swap) in ALIGNMENT_NAMES.items():
        sums.append(np.abs(cross_attend(_spec(kind, swap, W, b), Q, K).weights.sum(-1) - 1).max())
    # positive queries against a negative bias and zero W: every pre-activation score is negative
    zero_rows = cross_attend(_spec(Kind.ACTIVATED_GENERAL, False, np.zeros((d, d)), -np.ones((1, d))),
                             np.abs(Q) + 0.1, K)
    uniform = np.abs(zero_rows.weights - 1 / K.shape[0]).max()
    dagger = np.abs(row_softmax(score(_spec(Kind.BIASED_GENERAL, False, W, b), Q, K))
                    - row_softmax(score(_spec(Kind.GENERAL, False, W), Q, K))).max()
    star = np.abs(row_softmax(score(_spec(Kind.BIASED_GENERAL, True, W, b), Q, K))
                  - row_softmax(score(_spec(Kind.GENERAL, True, W), Q, K))).max()
    ok = max(sums) <= 1e-9 and uniform <= 1e-12 and dagger <= 1e-9 and star > 1e-3
    return ok, f"row sums {max(sums):.1e}, dagger diff {dagger:.1e}, star diff {star:.3g}"


def _probe(out, r):
    return ad.sum(out * r)


def check_gradients_suite() -> tuple[bool, str]:
    rng = Rng64(13)
    worst = 0.0
    d = 3
    base = {"Q": rng.normal((2, d)), "K": rng.normal((3, d))}
    for name, (kind, swap) in ALIGNMENT_NAMES.items():
        inputs = dict(base)
        if kind.has_weight:
            inputs["W"] = rng.normal((d, d))
        if kind.has_bias:
            inputs["b"] = rng.normal((1, d))
        spec = _spec(kind, swap, np.eye(d), np.zeros((1, d)))
        r1, r2, r3 = rng.normal((2, 3)), rng.normal((2, 3)), rng.normal((2, d))

        def build(g, n, spec=spec, r1=r1, r2=r2, r3=r3):
            params = {k: n[k] for k in ("W", "b") if k in n}
            s, w, c = cross_attend_nodes(spec, n["Q"], n["K"], params)
            return _probe(s, r1) + _probe(w, r2) + _probe(c, r3)

        worst = max(worst, check_gradients(build, inputs).max_error)

    e, K, Wp = rng.normal((1, d)), rng.normal((4, d)), rng.normal((1, d))
    r = rng.normal((1, 4))
    worst = max(worst, check_gradients(
        lambda g, n: _probe(mac_score_nodes(AlignmentSpec(Kind.SCALED_DOT), n["e"], n["K"], n["Wp"], n["bp"]), r),
        {"e": e, "K": K, "Wp": Wp, "bp": np.array([[0.3]])}).max_error)

    dm = 4
    S = rng.normal((3, dm))
    block = {k: rng.normal((dm, dm)) * 0.7 for k in ("Wq", "Wk", "Wv", "Wo")}
    block.update(W1=rng.normal((dm, 2 * dm)) * 0.5, W2=rng.normal((2 * dm, dm)) * 0.5,
                 ln1_gain=1 + 0.1 * rng.normal((1, dm)), ln1_shift=0.1 * rng.normal((1, dm)),
                 ln2_gain=1 + 0.1 * rng.normal((1, dm)), ln2_shift=0.1 * rng.normal((1, dm)))
    rb = rng.normal((3, dm))
    worst = max(worst, check_gradients(
        lambda g, n: _probe(encoder_block_nodes(AlignmentSpec(Kind.SCALED_DOT), n["S"], n, 2), rb),
        {"S": S, **block}).max_error)

    sim = rng.normal((4, 4))
    worst = max(worst, check_gradients(
        lambda g, n: ad.sum(ad.hinge(n["s"], 0.2)) + ad.sum(ad.hinge(n["s"].T, 0.2)), {"s": sim}).max_error)
    logits = rng.normal((5, 3))
    worst = max(worst, check_gradients(
        lambda g, n: ad.cross_entropy(n["z"], np.array([0, 2, 1, 1, 0])), {"z": logits}).max_error)
    return worst <= 1e-4, f"worst relative error {worst:.2e}"


def check_mechanisms() -> tuple[bool, str]:
    rng = Rng64(14)
    d = 5
    Q, K = rng.normal((3, d)), rng.normal((6, d))
    single = cross_attend(AlignmentSpec(Kind.DOT), Q, K[:1]).contexts
    e1 = np.abs(single - K[:1]).max()
    hull = 0.0
    W, b = rng.normal((d, d)), rng.normal((1, d))
    for kind, swap in ALIGNMENT_NAMES.values():
        c = cross_attend(_spec(kind, swap, W, b), Q, K).contexts
        hull = max(hull, float(np.max(K.min(0) - c)), float(np.max(c - K.max(0))))
    S = rng.normal((4, d))
    sa = self_attend(MultiHeadConfig.identity(d), AlignmentSpec(Kind.DOT), S)
    e3 = np.abs(sa - cross_attend(AlignmentSpec(Kind.DOT), S, S).contexts).max()
    e = rng.normal((1, d))
    e4 = np.abs(mac_score(e, K, MacScoreParams(np.ones((1, d)), 0.0)) - score(AlignmentSpec(Kind.DOT), e, K)).max()
    ok = e1 <= 1e-12 and hull <= 1e-9 and e3 <= 1e-10 and e4 <= 1e-12
    return ok, f"single-key {e1:.1e}, hull {hull:.1e}, self/cross {e3:.1e}, mac/dot {e4:.1e}"


def check_metrics() -> tuple[bool, str]:
    rng = Rng64(15)
    for _ in range(20):
        sim = rng.normal((20, 20))
        truth = rng.integers(20, 20)
        t = RankingTable(sim, truth)
        for k in (1, 5, 10):
            expected = 0
            for q in range(20):
                order = sorted(range(20), key=lambda j: (-sim[q, j], j))
                expected += truth[q] in order[:k]
            if recall_at_k(t, k) != 100.0 * expected / 20:
                return False, "recall_at_k disagrees with sort oracle"
    ok = rsum(RankingTable(np.eye(12), np.arange(12))) == 300.0
    ok &= levenshtein("kitten", "sitting") == 3
    ok &= abs(anls(QAResult("kitten", ("sitting",))) - 4 / 7) <= 1e-4
    ok &= vqa_soft_score(QAResult("a", ("a",) * 3 + ("b",) * 7)) == 1.0
    ok &= vqa_soft_score(QAResult("a", ("b",) * 10)) == 0.0
    words = ["", "a", "ab", "ba", "abc", "kitten", "sitting"]
    for x, y, z in itertools.product(words, repeat=3):
        ok &= levenshtein(x, y) == levenshtein(y, x)
        ok &= levenshtein(x, z) <= levenshtein(x, y) + levenshtein(y, z)
    return bool(ok), "recall oracle, Rsum, Levenshtein, ANLS, soft score"


CHECKS: dict[str, Check] = {
    "algebraic equivalences": check_algebra,
    "softmax and bias": check_softmax_bias,
    "gradients vs finite differences": check_gradients_suite,
    "mechanism consistency": check_mechanisms,
    "metric oracles": check_metrics,
}


def run_checks(echo=print) -> bool:
    all_ok = True
    for name, fn in CHECKS.items():
        ok, detail = fn()
        all_ok &= ok
        echo(f"{'PASS' if ok else 'FAIL'}  {name}: {detail}")
    return all_ok
