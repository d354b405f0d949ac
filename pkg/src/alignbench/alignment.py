"""Alignment score functions f(Q, K).

Each score matrix is ``n_Q x n_K`` with entry ``(x, y)`` comparing query row
``x`` to key row ``y``. The learnable general forms take a square ``W`` and
(for the biased forms) a ``1 x d`` bias ``b``; ``swap`` picks which side the
transform is applied to:

==========================  ======================  =====================
kind                        swap=False (dagger)     swap=True (star)
==========================  ======================  =====================
GENERAL                     q . (W k)               k . (W q)
BIASED_GENERAL              q . (W k + b)           k . (W q + b)
ACTIVATED_GENERAL           relu of the biased score with the same swap
==========================  ======================  =====================

DOT is ``q . k``, SCALED_DOT is ``q . k / sqrt(d)`` and COSINE is
``q . k / (|q| |k|)`` with zero-norm rows scoring 0.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import Graph, Node
from .errors import ContractError, DimensionError
from .numeric import as_matrix
from .rng import Rng64


class Kind(enum.Enum):
    DOT = "dot"
    SCALED_DOT = "scaled_dot"
    GENERAL = "general"
    BIASED_GENERAL = "biased_general"
    ACTIVATED_GENERAL = "activated_general"
    COSINE = "cosine"

    @property
    def has_weight(self) -> bool:
        return self in (Kind.GENERAL, Kind.BIASED_GENERAL, Kind.ACTIVATED_GENERAL)

    @property
    def has_bias(self) -> bool:
        return self in (Kind.BIASED_GENERAL, Kind.ACTIVATED_GENERAL)


class Activation(enum.Enum):
    RELU = "relu"


# CLI / config vocabulary -> (kind, swap)
ALIGNMENT_NAMES: dict[str, tuple[Kind, bool]] = {
    "dot": (Kind.DOT, False),
    "scaled_dot": (Kind.SCALED_DOT, False),
    "general_star": (Kind.GENERAL, True),
    "general_dagger": (Kind.GENERAL, False),
    "biased_general_star": (Kind.BIASED_GENERAL, True),
    "biased_general_dagger": (Kind.BIASED_GENERAL, False),
    "activated_general": (Kind.ACTIVATED_GENERAL, False),
    "cosine": (Kind.COSINE, False),
}


def variant_label(kind: Kind, swap: bool) -> str:
    if not kind.has_weight:
        return "none"
    return "star" if swap else "dagger"


@dataclass(frozen=True)
class AlignmentSpec:
    kind: Kind
    swap: bool = False
    W: np.ndarray | None = None
    b: np.ndarray | None = None
    activation: Activation = Activation.RELU

    def __post_init__(self):
        if self.swap and not self.kind.has_weight:
            raise ContractError(f"swap is meaningless for {self.kind.value}")
        if self.kind.has_weight:
            if self.W is None:
                raise ContractError(f"{self.kind.value} needs a weight matrix W")
            W = as_matrix(self.W, "W")
            if W.shape[0] != W.shape[1]:
                raise DimensionError(f"W must be square, got {W.shape}")
            object.__setattr__(self, "W", W)
        elif self.W is not None:
            raise ContractError(f"{self.kind.value} takes no weight matrix")
        if self.kind.has_bias:
            if self.b is None:
                raise ContractError(f"{self.kind.value} needs a bias b")
            b = as_matrix(self.b, "b")
            if b.shape != (1, self.W.shape[0]):
                raise DimensionError(f"b must be 1x{self.W.shape[0]}, got {b.shape}")
            object.__setattr__(self, "b", b)
        elif self.b is not None:
            raise ContractError(f"{self.kind.value} takes no bias")

    @property
    def dim(self) -> int | None:
        return None if self.W is None else self.W.shape[0]

    @property
    def name(self) -> str:
        for name, (kind, swap) in ALIGNMENT_NAMES.items():
            if kind is self.kind and swap == self.swap:
                return name
        return f"{self.kind.value}_{'star' if self.swap else 'dagger'}"

    @classmethod
    def from_name(cls, name: str, d: int | None = None, seed: int = 0) -> "AlignmentSpec":
        """Build a spec from its config name, initialising W/b for dimension ``d``."""
        if name not in ALIGNMENT_NAMES:
            raise ContractError(f"unknown alignment {name!r}")
        kind, swap = ALIGNMENT_NAMES[name]
        if kind.has_weight and d is None:
            raise ContractError(f"{name} needs a dimension to initialise W")
        W, b = init_params(kind, d, seed) if kind.has_weight else (None, None)
        return cls(kind, swap, W, b)

    def params(self) -> dict[str, np.ndarray]:
        out = {}
        if self.W is not None:
            out["W"] = self.W
        if self.b is not None:
            out["b"] = self.b
        return out

    def with_params(self, params: dict[str, np.ndarray]) -> "AlignmentSpec":
        return AlignmentSpec(self.kind, self.swap, params.get("W"), params.get("b"), self.activation)


def init_params(kind: Kind, d: int, seed: int) -> tuple[np.ndarray | None, np.ndarray | None]:
    """Scaled-Gaussian ``W`` (std ``1/sqrt(d)``) and zero ``b`` for the kinds that use them."""
    if d < 1:
        raise ContractError("dimension must be at least 1")
    W = Rng64(seed).normal((d, d), 1.0 / np.sqrt(d)) if kind.has_weight else None
    b = np.zeros((1, d)) if kind.has_bias else None
    return W, b


def _bind_params(g: Graph, spec: AlignmentSpec, params: dict | None) -> tuple:
    params = params or {}
    W = params.get("W", spec.W)
    b = params.get("b", spec.b)
    return (None if W is None else g.lift(W), None if b is None else g.lift(b))


def score_nodes(spec: AlignmentSpec, q: Node, k, params: dict | None = None) -> Node:
    """Graph version of :func:`score`. ``params`` may override W/b with nodes."""
    g = q.graph
    k = g.lift(k)
    if q.shape[-1] != k.shape[-1]:
        raise DimensionError(f"query width {q.shape} does not match key width {k.shape}")
    d = q.shape[-1]
    kind = spec.kind
    if kind is Kind.DOT:
        return q @ k.T
    if kind is Kind.SCALED_DOT:
        return ad.scale(q @ k.T, 1.0 / np.sqrt(d))
    if kind is Kind.COSINE:
        return ad.cosine_matrix(q, k)
    W, b = _bind_params(g, spec, params)
    if W.shape[-1] != d:
        raise DimensionError(f"W {W.shape} does not match feature width {d}")
    # q . (W k) for every pair is Q (K W^T)^T; the star form swaps the roles.
    if spec.swap:
        moved = q @ W.T
        if b is not None:
            moved = moved + b
        s = moved @ k.T
    else:
        moved = k @ W.T
        if b is not None:
            moved = moved + b
        s = q @ moved.T
    if kind is Kind.ACTIVATED_GENERAL:
        s = ad.relu(s)
    return s


def elementwise_nodes(spec: AlignmentSpec, e: Node, k, params: dict | None = None) -> Node:
    """Per-key d-dimensional similarity vectors: the element-wise form of each kind.

    Row ``y`` is the Hadamard analogue of the score: ``e * k_y`` for DOT,
    scaled by ``1/sqrt(d)`` for SCALED_DOT, ``e * (W k_y [+ b])`` (dagger) or
    ``(W e [+ b]) * k_y`` (star) for the general family, relu'd for
    ACTIVATED_GENERAL, and ``e * k_y / (|e| |k_y|)`` for COSINE. Except for
    the activated form, summing a row recovers the scalar score.
    """
    g = e.graph
    k = g.lift(k)
    if e.shape[-1] != k.shape[-1]:
        raise DimensionError(f"control width {e.shape} does not match key width {k.shape}")
    d = e.shape[-1]
    kind = spec.kind
    if kind is Kind.DOT:
        return e * k
    if kind is Kind.SCALED_DOT:
        return ad.scale(e * k, 1.0 / np.sqrt(d))
    if kind is Kind.COSINE:
        return ad.normalize_rows(e) * ad.normalize_rows(k)
    W, b = _bind_params(g, spec, params)
    if spec.swap:
        moved = e @ W.T
        if b is not None:
            moved = moved + b
        v = moved * k
    else:
        moved = k @ W.T
        if b is not None:
            moved = moved + b
        v = e * moved
    if kind is Kind.ACTIVATED_GENERAL:
        v = ad.relu(v)
    return v


def score(spec: AlignmentSpec, Q, K) -> np.ndarray:
    """Raw alignment scores ``a[x, y] = f(Q_x, K_y)`` as an ``n_Q x n_K`` matrix."""
    Q = as_matrix(Q, "Q")
    K = as_matrix(K, "K")
    if Q.shape[-1] != K.shape[-1]:
        raise DimensionError(f"Q {Q.shape} and K {K.shape} differ in feature width")
    if spec.dim is not None and spec.dim != Q.shape[-1]:
        raise DimensionError(f"W is {spec.W.shape} but features have width {Q.shape[-1]}")
    g = Graph()
    return score_nodes(spec, g.constant(Q), g.constant(K)).value
