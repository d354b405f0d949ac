"""Cross attention, MAC read-unit scoring and multi-head self attention.

Each mechanism comes in two forms: a ``*_nodes`` function that builds onto a
:class:`~alignbench.autodiff.Graph` (used for training and gradient checks)
and a plain-array wrapper that evaluates it once.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping

import numpy as np

from . import autodiff as ad
from .alignment import AlignmentSpec, Kind, elementwise_nodes, score_nodes
from .autodiff import Graph, Node
from .errors import ContractError, DimensionError, UnsupportedCombinationError
from .numeric import DEFAULT_LN_EPS, as_matrix
from .rng import Rng64


@dataclass(frozen=True)
class CrossAttentionOutput:
    scores: np.ndarray
    weights: np.ndarray
    contexts: np.ndarray


def cross_attend_nodes(spec: AlignmentSpec, q: Node, k, params=None, values=None):
    """Scores, softmax weights and contexts (weights @ values, values defaulting to keys)."""
    k = q.graph.lift(k)
    scores = score_nodes(spec, q, k, params)
    weights = ad.row_softmax(scores)
    contexts = weights @ (k if values is None else q.graph.lift(values))
    return scores, weights, contexts


def cross_attend(spec: AlignmentSpec, Q, K) -> CrossAttentionOutput:
    Q = as_matrix(Q, "Q")
    K = as_matrix(K, "K")
    if Q.shape[-1] != K.shape[-1]:
        raise DimensionError(f"Q {Q.shape} and K {K.shape} differ in feature width")
    g = Graph()
    s, w, c = cross_attend_nodes(spec, g.constant(Q), g.constant(K))
    return CrossAttentionOutput(s.value, w.value, c.value)


# -- MAC read unit --------------------------------------------------------------

@dataclass(frozen=True)
class MacScoreParams:
    """Row map ``Wp`` (1 x d) and scalar offset ``bp`` turning a similarity vector into a score."""

    Wp: np.ndarray
    bp: float = 0.0

    def __post_init__(self):
        Wp = as_matrix(self.Wp, "Wp")
        if Wp.shape[0] != 1:
            raise DimensionError(f"Wp must be a single row, got {Wp.shape}")
        object.__setattr__(self, "Wp", Wp)
        object.__setattr__(self, "bp", float(self.bp))

    @classmethod
    def init(cls, d: int, seed: int) -> "MacScoreParams":
        return cls(Rng64(seed).normal((1, d), 1.0 / np.sqrt(d)), 0.0)


def mac_score_nodes(spec: AlignmentSpec, e: Node, k, Wp, bp, params=None) -> Node:
    """``a_y = Wp . f(e, k_y) + bp`` with ``f`` the element-wise form of ``spec``.

    ``e`` is a single row (or a stack of single rows); the result is ``1 x n``.
    """
    if e.shape[-2] != 1:
        raise ContractError(f"control state must be a single row, got shape {e.shape}")
    g = e.graph
    v = elementwise_nodes(spec, e, k, params)
    return (v @ g.lift(Wp).T).T + g.lift(bp)


DOT = AlignmentSpec(Kind.DOT)


def mac_score(e, K, p: MacScoreParams, spec: AlignmentSpec = DOT) -> np.ndarray:
    e = as_matrix(e, "e")
    K = as_matrix(K, "K")
    if e.shape[0] != 1:
        raise ContractError(f"control state must be a single row, got {e.shape[0]} rows")
    if e.shape[1] != K.shape[1] or p.Wp.shape[1] != K.shape[1]:
        raise DimensionError(f"e {e.shape}, K {K.shape} and Wp {p.Wp.shape} disagree on width")
    g = Graph()
    return mac_score_nodes(spec, g.constant(e), g.constant(K), p.Wp, np.array([[p.bp]])).value


# -- self attention -------------------------------------------------------------

@dataclass(frozen=True)
class MultiHeadConfig:
    """Head count plus the four ``d x d`` projections (query, key, value, output)."""

    heads: int
    Wq: np.ndarray
    Wk: np.ndarray
    Wv: np.ndarray
    Wo: np.ndarray

    def __post_init__(self):
        d = np.asarray(self.Wq).shape[0]
        if self.heads < 1 or d % self.heads:
            raise ContractError(f"model dim {d} is not divisible by {self.heads} heads")
        for name in ("Wq", "Wk", "Wv", "Wo"):
            W = as_matrix(getattr(self, name), name)
            if W.shape != (d, d):
                raise DimensionError(f"{name} must be {d}x{d}, got {W.shape}")
            object.__setattr__(self, name, W)

    @property
    def model_dim(self) -> int:
        return self.Wq.shape[0]

    @property
    def head_dim(self) -> int:
        return self.model_dim // self.heads

    @classmethod
    def init(cls, d: int, heads: int, seed: int) -> "MultiHeadConfig":
        rng = Rng64(seed)
        mats = [rng.normal((d, d), 1.0 / np.sqrt(d)) for _ in range(4)]
        return cls(heads, *mats)

    @classmethod
    def identity(cls, d: int, heads: int = 1) -> "MultiHeadConfig":
        eye = np.eye(d)
        return cls(heads, eye, eye, eye, eye)

    def params(self) -> dict[str, np.ndarray]:
        return {"Wq": self.Wq, "Wk": self.Wk, "Wv": self.Wv, "Wo": self.Wo}


def _check_self_attention_spec(spec: AlignmentSpec, head_dim: int):
    if spec.kind is Kind.COSINE:
        raise UnsupportedCombinationError("cosine alignment is not supported in self attention")
    if spec.dim is not None and spec.dim != head_dim:
        raise DimensionError(f"alignment W is {spec.W.shape} but heads are {head_dim} wide")


def self_attend_nodes(spec: AlignmentSpec, s: Node, proj: Mapping, heads: int,
                      align_params=None) -> Node:
    """Multi-head attention over the rows of ``s``; alignment params are shared by all heads.

    Scaled-dot scoring divides by the square root of the per-head width.
    """
    g = s.graph
    d = s.shape[-1]
    head_dim = d // heads
    _check_self_attention_spec(spec, head_dim)
    q = s @ g.lift(proj["Wq"])
    k = s @ g.lift(proj["Wk"])
    v = s @ g.lift(proj["Wv"])
    if heads == 1:
        qs, ks, vs = [q], [k], [v]
    else:
        sizes = [head_dim] * heads
        qs, ks, vs = ad.split(q, sizes), ad.split(k, sizes), ad.split(v, sizes)
    outs = []
    for qh, kh, vh in zip(qs, ks, vs):
        weights = ad.row_softmax(score_nodes(spec, qh, kh, align_params))
        outs.append(weights @ vh)
    joined = outs[0] if heads == 1 else ad.concat(outs)
    return joined @ g.lift(proj["Wo"])


def self_attend(cfg: MultiHeadConfig, spec: AlignmentSpec, S) -> np.ndarray:
    S = as_matrix(S, "S")
    if S.shape[-1] != cfg.model_dim:
        raise DimensionError(f"S has width {S.shape[-1]}, config expects {cfg.model_dim}")
    _check_self_attention_spec(spec, cfg.head_dim)
    g = Graph()
    return self_attend_nodes(spec, g.constant(S), cfg.params(), cfg.heads).value


@dataclass(frozen=True)
class EncoderBlockParams:
    attention: MultiHeadConfig
    W1: np.ndarray
    W2: np.ndarray
    ln1_gain: np.ndarray
    ln1_shift: np.ndarray
    ln2_gain: np.ndarray
    ln2_shift: np.ndarray
    eps: float = DEFAULT_LN_EPS

    @classmethod
    def init(cls, d: int, heads: int, d_ff: int, seed: int) -> "EncoderBlockParams":
        rng = Rng64(seed)
        attn = MultiHeadConfig.init(d, heads, int(rng.next_u64(1)[0]))
        return cls(
            attn,
            rng.normal((d, d_ff), 1.0 / np.sqrt(d)),
            rng.normal((d_ff, d), 1.0 / np.sqrt(d_ff)),
            np.ones((1, d)), np.zeros((1, d)), np.ones((1, d)), np.zeros((1, d)),
        )

    def params(self) -> dict[str, np.ndarray]:
        out = dict(self.attention.params())
        out.update(W1=self.W1, W2=self.W2, ln1_gain=self.ln1_gain, ln1_shift=self.ln1_shift,
                   ln2_gain=self.ln2_gain, ln2_shift=self.ln2_shift)
        return out


def encoder_block_nodes(spec: AlignmentSpec, s: Node, p: Mapping, heads: int,
                        align_params=None, eps: float = DEFAULT_LN_EPS) -> Node:
    """Post-norm block: ``h = LN(s + MHA(s))`` then ``LN(h + relu(h W1) W2)``."""
    g = s.graph
    h = ad.layer_norm(s + self_attend_nodes(spec, s, p, heads, align_params),
                      p["ln1_gain"], p["ln1_shift"], eps)
    ffn = ad.relu(h @ g.lift(p["W1"])) @ g.lift(p["W2"])
    return ad.layer_norm(h + ffn, p["ln2_gain"], p["ln2_shift"], eps)


def encoder_block(p: EncoderBlockParams, spec: AlignmentSpec, S) -> np.ndarray:
    S = as_matrix(S, "S")
    if S.shape[-1] != p.attention.model_dim:
        raise DimensionError(f"S has width {S.shape[-1]}, block expects {p.attention.model_dim}")
    _check_self_attention_spec(spec, p.attention.head_dim)
    g = Graph()
    return encoder_block_nodes(spec, g.constant(S), p.params(), p.attention.heads,
                               eps=p.eps).value
