import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from alignbench.alignment import ALIGNMENT_NAMES, AlignmentSpec, Kind, init_params, score, score_nodes
from alignbench.autodiff import sum as ad_sum
from alignbench.errors import ContractError, DimensionError
from alignbench.gradcheck import check_gradients
from alignbench.numeric import row_softmax
from alignbench.rng import Rng64

DOT = AlignmentSpec(Kind.DOT)
SCALED = AlignmentSpec(Kind.SCALED_DOT)
COSINE = AlignmentSpec(Kind.COSINE)


def general(W, swap=False):
    return AlignmentSpec(Kind.GENERAL, swap, W)


def biased(W, b, swap=False, activated=False):
    kind = Kind.ACTIVATED_GENERAL if activated else Kind.BIASED_GENERAL
    return AlignmentSpec(kind, swap, W, b)


def draw(seed, nq=3, nk=4, d=3):
    rng = Rng64(seed)
    return rng.normal((nq, d)), rng.normal((nk, d)), rng.normal((d, d)), rng.normal((1, d))


def test_dot_example():
    np.testing.assert_array_equal(score(DOT, [[1, 0]], [[1, 0], [0, 1]]), [[1, 0]])


def test_scaled_dot_example():
    assert score(SCALED, [[2, 0, 0, 0]], [[2, 0, 0, 0]])[0, 0] == 2.0


def test_general_identity_is_dot():
    Q, K, _, _ = draw(1)
    np.testing.assert_allclose(score(general(np.eye(3)), Q, K), score(DOT, Q, K), atol=1e-12)


def test_cosine_examples():
    q = np.array([[1.0, 2.0]])
    assert score(COSINE, q, 3 * q)[0, 0] == pytest.approx(1.0, abs=1e-15)
    assert score(COSINE, q, [[-2.0, 1.0]])[0, 0] == pytest.approx(0.0, abs=1e-15)
    assert score(COSINE, q, -q)[0, 0] == pytest.approx(-1.0, abs=1e-15)
    zeros = score(COSINE, [[0.0, 0.0]], [[1.0, 1.0], [0.0, 0.0]])
    np.testing.assert_array_equal(zeros, [[0.0, 0.0]])


def scalar_oracle(Q, K, W, b, swap, relu=False):
    out = np.zeros((len(Q), len(K)))
    d = len(W)
    for x in range(len(Q)):
        for y in range(len(K)):
            src, other = (Q[x], K[y]) if swap else (K[y], Q[x])
            moved = [sum(W[i][j] * src[j] for j in range(d)) + b[0][i] for i in range(d)]
            val = sum(other[i] * moved[i] for i in range(d))
            out[x, y] = max(val, 0.0) if relu else val
    return out


def test_biased_general_star_matches_scalar_loop():
    Q, K, W, b = draw(2)
    got = score(biased(W, b, swap=True), Q, K)
    np.testing.assert_allclose(got, scalar_oracle(Q, K, W, b, True), rtol=0, atol=1e-12)


@pytest.mark.parametrize("swap", [False, True])
def test_biased_and_activated_match_scalar_loop(swap):
    Q, K, W, b = draw(3 + swap)
    np.testing.assert_allclose(score(biased(W, b, swap), Q, K),
                               scalar_oracle(Q, K, W, b, swap), atol=1e-12)
    np.testing.assert_allclose(score(biased(W, b, swap, activated=True), Q, K),
                               scalar_oracle(Q, K, W, b, swap, relu=True), atol=1e-12)


def test_shape_is_nq_by_nk_for_every_kind():
    Q, K, W, b = draw(5, nq=2, nk=5)
    for name in ALIGNMENT_NAMES:
        spec = AlignmentSpec.from_name(name, d=3, seed=1)
        assert score(spec, Q, K).shape == (2, 5)


def test_errors():
    with pytest.raises(DimensionError):
        score(DOT, np.ones((2, 3)), np.ones((2, 4)))
    with pytest.raises(ContractError):
        AlignmentSpec(Kind.DOT, swap=True)
    with pytest.raises(ContractError):
        AlignmentSpec(Kind.COSINE, swap=True)
    with pytest.raises(DimensionError):
        general(np.ones((2, 3)))
    with pytest.raises(DimensionError):
        score(general(np.eye(2)), np.ones((1, 3)), np.ones((1, 3)))
    with pytest.raises(ContractError):
        AlignmentSpec.from_name("bahdanau")


def test_init_params():
    W1, b1 = init_params(Kind.BIASED_GENERAL, 64, seed=7)
    W2, b2 = init_params(Kind.BIASED_GENERAL, 64, seed=7)
    assert W1.tobytes() == W2.tobytes() and b1.tobytes() == b2.tobytes()
    np.testing.assert_array_equal(b1, np.zeros((1, 64)))
    assert abs(W1.std() - 1 / 8) <= 0.15 / 8
    assert init_params(Kind.DOT, 4, 0) == (None, None)
    W, b = init_params(Kind.GENERAL, 4, 0)
    assert b is None and W.shape == (4, 4)


seeds = st.integers(0, 2**32)


@settings(max_examples=60, deadline=None)
@given(seeds)
def test_swap_transpose_identity(seed):
    Q, K, W, _ = draw(seed)
    np.testing.assert_allclose(score(general(W, swap=True), Q, K), score(general(W.T), Q, K), atol=1e-12)


@settings(max_examples=60, deadline=None)
@given(seeds, st.booleans())
def test_zero_bias_reduces_to_general(seed, swap):
    Q, K, W, _ = draw(seed)
    np.testing.assert_allclose(score(biased(W, np.zeros((1, 3)), swap), Q, K),
                               score(general(W, swap), Q, K), atol=1e-12)


@settings(max_examples=60, deadline=None)
@given(seeds, st.booleans())
def test_activation_is_identity_on_nonnegative_scores(seed, swap):
    rng = Rng64(seed)
    Q, K = np.abs(rng.normal((3, 3))), np.abs(rng.normal((4, 3)))
    W, b = np.abs(rng.normal((3, 3))), np.abs(rng.normal((1, 3)))
    np.testing.assert_allclose(score(biased(W, b, swap, True), Q, K), score(biased(W, b, swap), Q, K),
                               atol=1e-12)


@settings(max_examples=60, deadline=None)
@given(seeds, st.integers(1, 8))
def test_scaled_dot_relation(seed, d):
    rng = Rng64(seed)
    Q, K = rng.normal((3, d)), rng.normal((5, d))
    dot, scaled = score(DOT, Q, K), score(SCALED, Q, K)
    np.testing.assert_array_equal(scaled, dot * (1.0 / np.sqrt(d)))
    np.testing.assert_array_equal(np.argsort(scaled, axis=1, kind="stable"),
                                  np.argsort(dot, axis=1, kind="stable"))


@settings(max_examples=60, deadline=None)
@given(seeds)
def test_dagger_bias_is_row_constant(seed):
    Q, K, W, b = draw(seed)
    np.testing.assert_allclose(row_softmax(score(biased(W, b), Q, K)),
                               row_softmax(score(general(W), Q, K)), atol=1e-9)


def test_star_bias_changes_weights():
    Q, K, W, _ = draw(11)
    b = np.array([[3.0, -2.0, 1.0]])
    diff = row_softmax(score(biased(W, b, swap=True), Q, K)) - row_softmax(score(general(W, True), Q, K))
    assert np.abs(diff).max() > 1e-3


@settings(max_examples=60, deadline=None)
@given(seeds, st.floats(1e-3, 1e3), st.floats(1e-3, 1e3))
def test_cosine_bounded_and_scale_invariant(seed, cq, ck):
    Q, K, _, _ = draw(seed)
    base = score(COSINE, Q, K)
    assert np.all(np.abs(base) <= 1.0 + 1e-15)
    Q2, K2 = Q.copy(), K.copy()
    Q2[0] *= cq
    K2[1] *= ck
    np.testing.assert_allclose(score(COSINE, Q2, K2), base, atol=1e-12)


@pytest.mark.parametrize("name", [n for n in ALIGNMENT_NAMES])
def test_gradients_every_kind(name):
    rng = Rng64(len(name))
    spec = AlignmentSpec.from_name(name, d=3, seed=2)
    inputs = {"Q": rng.normal((2, 3)), "K": rng.normal((4, 3))}
    if spec.W is not None:
        inputs["W"] = rng.normal((3, 3))
    if spec.b is not None:
        inputs["b"] = rng.normal((1, 3))
    r = rng.normal((2, 4))

    def build(g, n):
        params = {k: n[k] for k in ("W", "b") if k in n}
        return ad_sum(score_nodes(spec, n["Q"], n["K"], params) * r)

    res = check_gradients(build, inputs)
    assert res.passed, res.errors
