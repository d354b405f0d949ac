"""Tiny trainable models for the three synthetic tasks.

Each model keeps its trainable arrays in a flat ``params`` dict. ``loss_nodes``
builds a batched forward pass on a fresh graph; parameters named ``align.W``
and ``align.b`` are the alignment function's own weights.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .alignment import AlignmentSpec, score_nodes
from .attention import encoder_block_nodes, mac_score_nodes
from .autodiff import Graph, Node
from .errors import ContractError, DimensionError
from .numeric import row_softmax
from .rng import Rng64, derive_seed
from .tasks import D_ATTR, N_TYPES, CountingInstance, PointerInstance, RetrievalInstance

TRIPLET_MARGIN = 0.2


def _glorot(rng: Rng64, rows: int, cols: int) -> np.ndarray:
    return rng.normal((rows, cols), 1.0 / np.sqrt(rows))


def _alignment_params(name: str, d: int, seed: int) -> tuple[AlignmentSpec, dict]:
    spec = AlignmentSpec.from_name(name, d, derive_seed(seed, 101))
    return spec, {f"align.{k}": v for k, v in spec.params().items()}


def _align_nodes(p: dict) -> dict:
    return {k.split(".", 1)[1]: v for k, v in p.items() if k.startswith("align.")}


class _Model:
    alignment: AlignmentSpec
    params: dict[str, np.ndarray]

    def bind(self, g: Graph, params=None, trainable: bool = True) -> dict[str, Node]:
        params = self.params if params is None else params
        make = g.param if trainable else (lambda v, name=None: g.constant(v))
        return {k: make(v, name=k) for k, v in params.items()}


# -- retrieval ------------------------------------------------------------------

def similarity_nodes(spec: AlignmentSpec, tokens: Node, regions: Node, align=None) -> Node:
    """Text-to-image attention, per-token cosine with its image context, mean-pooled.

    ``tokens`` is ``(..., M, d)`` and ``regions`` ``(..., N, d)``; leading axes
    broadcast, and the result drops the two trailing matrix axes.
    """
    scores = score_nodes(spec, tokens, regions, align)
    contexts = ad.row_softmax(scores) @ regions
    cos = ad.cosine_rowwise(tokens, contexts)            # (..., M, 1)
    pooled = ad.sum(ad.sum(cos, axis=-1, keepdims=False), axis=-1, keepdims=False)
    return ad.scale(pooled, 1.0 / tokens.shape[-2])


def triplet_loss_nodes(sim: Node, margin: float = TRIPLET_MARGIN) -> Node:
    """Hardest-negative hinge in both directions, summed over the batch; ``sim[image, caption]``."""
    return ad.sum(ad.hinge(sim, margin)) + ad.sum(ad.hinge(sim.T, margin))


def per_pair_triplet_losses(sim: np.ndarray, margin: float = TRIPLET_MARGIN) -> np.ndarray:
    sim = np.asarray(sim, dtype=np.float64)
    g = Graph()
    s = g.constant(sim)
    return (ad.hinge(s, margin).value + ad.hinge(s.T, margin).value)[:, 0]


def triplet_loss(sim, pairs=None, margin: float = TRIPLET_MARGIN) -> float:
    """Triplet loss from a similarity matrix, or from a similarity function and matched pairs.

    With a function, ``pairs`` is a sequence of ``(tokens, regions)`` and
    ``sim(tokens_j, regions_i)`` fills entry ``[i, j]``.
    """
    if callable(sim):
        if pairs is None or len(pairs) < 2:
            raise ContractError("triplet loss needs a batch of at least 2 pairs")
        sim = np.array([[sim(pairs[j][0], pairs[i][1]) for j in range(len(pairs))]
                        for i in range(len(pairs))])
    sim = np.asarray(sim, dtype=np.float64)
    if sim.ndim != 2 or sim.shape[0] != sim.shape[1]:
        raise DimensionError(f"similarity must be square, got {sim.shape}")
    if sim.shape[0] < 2:
        raise ContractError("triplet loss needs a batch of at least 2 pairs")
    return float(per_pair_triplet_losses(sim, margin).sum())


@dataclass
class RetrievalModel(_Model):
    alignment: AlignmentSpec
    params: dict[str, np.ndarray]

    @classmethod
    def init(cls, alignment: str, d_in: int, d: int, seed: int) -> "RetrievalModel":
        rng = Rng64(derive_seed(seed, 100))
        spec, align = _alignment_params(alignment, d, seed)
        params = {"token_proj": _glorot(rng, d_in, d), "region_proj": _glorot(rng, d_in, d), **align}
        return cls(spec, params)

    @staticmethod
    def prepare(instances: list[RetrievalInstance]) -> dict[str, np.ndarray]:
        return {"tokens": np.stack([i.tokens for i in instances]),
                "regions": np.stack([i.regions for i in instances])}

    def project(self, g: Graph, p: dict, tokens, regions) -> tuple[Node, Node]:
        return g.lift(tokens) @ p["token_proj"], g.lift(regions) @ p["region_proj"]

    def similarity_matrix_nodes(self, g: Graph, p: dict, tokens, regions) -> Node:
        """``(B_img, B_cap)`` similarities for every image/caption combination."""
        # captions broadcast along axis 1, images along axis 0
        t, r = self.project(g, p, np.asarray(tokens)[None], np.asarray(regions)[:, None])
        return similarity_nodes(self.alignment, t, r, _align_nodes(p))

    def loss_nodes(self, g: Graph, p: dict, batch: dict) -> Node:
        return triplet_loss_nodes(self.similarity_matrix_nodes(g, p, batch["tokens"], batch["regions"]))

    def similarity_matrix(self, tokens: np.ndarray, regions: np.ndarray, chunk: int = 25) -> np.ndarray:
        """Evaluation similarities ``[image, caption]``, computed in image chunks."""
        rows = []
        for start in range(0, len(regions), chunk):
            g = Graph()
            p = self.bind(g, trainable=False)
            rows.append(self.similarity_matrix_nodes(g, p, tokens, regions[start:start + chunk]).value)
        return np.concatenate(rows, axis=0)


def scan_similarity(m: RetrievalModel, tokens, regions) -> float:
    """Pooled similarity of one caption/image pair."""
    g = Graph()
    p = m.bind(g, trainable=False)
    t, r = m.project(g, p, np.asarray(tokens, dtype=np.float64), np.asarray(regions, dtype=np.float64))
    if t.shape[-1] != r.shape[-1]:
        raise DimensionError("projected token and region widths differ")
    return float(similarity_nodes(m.alignment, t, r, _align_nodes(p)).value)


# -- counting -------------------------------------------------------------------

@dataclass
class CountingModel(_Model):
    alignment: AlignmentSpec
    params: dict[str, np.ndarray]
    n_objects: int

    @classmethod
    def init(cls, alignment: str, n_objects: int, d: int, seed: int) -> "CountingModel":
        rng = Rng64(derive_seed(seed, 200))
        spec, align = _alignment_params(alignment, d, seed)
        params = {
            "control_proj": _glorot(rng, D_ATTR, d),
            "object_proj": _glorot(rng, D_ATTR, d),
            "mac.Wp": _glorot(rng, 1, d) / np.sqrt(d),
            "mac.bp": np.zeros((1, 1)),
            "head.W": _glorot(rng, d + 1, n_objects + 1),
            "head.b": np.zeros((1, n_objects + 1)),
            **align,
        }
        return cls(spec, params, n_objects)

    @staticmethod
    def prepare(instances: list[CountingInstance]) -> dict[str, np.ndarray]:
        return {"objects": np.stack([i.objects for i in instances]),
                "query": np.stack([i.query for i in instances]),
                "target": np.array([[i.count] for i in instances])}

    def logits_nodes(self, g: Graph, p: dict, query, objects) -> Node:
        e = g.lift(query) @ p["control_proj"]           # (B, 1, d)
        k = g.lift(objects) @ p["object_proj"]          # (B, N, d)
        a = mac_score_nodes(self.alignment, e, k, p["mac.Wp"], p["mac.bp"], _align_nodes(p))
        context = ad.row_softmax(a) @ k                 # (B, 1, d)
        soft_count = ad.sum(ad.sigmoid(a), axis=-1)     # (B, 1, 1)
        return ad.concat([context, soft_count]) @ p["head.W"] + p["head.b"]

    def loss_nodes(self, g: Graph, p: dict, batch: dict) -> Node:
        return ad.cross_entropy(self.logits_nodes(g, p, batch["query"], batch["objects"]), batch["target"])

    def predict_proba(self, batch: dict) -> np.ndarray:
        g = Graph()
        p = self.bind(g, trainable=False)
        return row_softmax(self.logits_nodes(g, p, batch["query"], batch["objects"]).value)[..., 0, :]


def counting_forward(m: CountingModel, inst: CountingInstance) -> np.ndarray:
    """Distribution over counts ``0..N`` for one instance."""
    if inst.objects.shape[0] != m.n_objects:
        raise DimensionError(f"model expects {m.n_objects} objects, got {inst.objects.shape[0]}")
    return m.predict_proba(CountingModel.prepare([inst]))[0]


# -- pointer --------------------------------------------------------------------

@dataclass
class PointerModel(_Model):
    alignment: AlignmentSpec
    params: dict[str, np.ndarray]
    heads: int
    segments: tuple[int, int, int] = field(default=(3, 3, 6))

    @classmethod
    def init(cls, alignment: str, d_in: int, d: int, heads: int, d_ff: int,
             segments: tuple[int, int, int], seed: int) -> "PointerModel":
        if d % heads:
            raise ContractError(f"model dim {d} is not divisible by {heads} heads")
        rng = Rng64(derive_seed(seed, 300))
        spec, align = _alignment_params(alignment, d // heads, seed)
        params = {
            "input_proj": _glorot(rng, d_in, d),
            "type_emb": rng.normal((N_TYPES, d), 1.0 / np.sqrt(d)),
            "Wq": _glorot(rng, d, d), "Wk": _glorot(rng, d, d),
            "Wv": _glorot(rng, d, d), "Wo": _glorot(rng, d, d),
            "W1": _glorot(rng, d, d_ff), "W2": _glorot(rng, d_ff, d),
            "ln1_gain": np.ones((1, d)), "ln1_shift": np.zeros((1, d)),
            "ln2_gain": np.ones((1, d)), "ln2_shift": np.zeros((1, d)),
            **align,
        }
        return cls(spec, params, heads, tuple(segments))

    @staticmethod
    def prepare(instances: list[PointerInstance]) -> dict[str, np.ndarray]:
        return {"sequence": np.stack([i.sequence for i in instances]),
                "tags": instances[0].type_tags,
                "target": np.array([[i.answer_index] for i in instances])}

    def logits_nodes(self, g: Graph, p: dict, sequence, tags) -> Node:
        x = g.lift(sequence) @ p["input_proj"] + g.lift(tags) @ p["type_emb"]
        h = encoder_block_nodes(self.alignment, x, p, self.heads, _align_nodes(p))
        m, n, o = self.segments
        if h.shape[-2] != m + n + o:
            raise DimensionError(f"sequence has {h.shape[-2]} rows, expected {m + n + o}")
        cols = h.T                                      # (B, d, L)
        parts = ad.split(cols, [m, n, o] if n else [m, o])
        question, ocr = parts[0], parts[-1]
        first = ad.split(question, [1, m - 1])[0] if m > 1 else question
        return (ocr.T @ first).T                        # (B, 1, O)

    def loss_nodes(self, g: Graph, p: dict, batch: dict) -> Node:
        return ad.cross_entropy(self.logits_nodes(g, p, batch["sequence"], batch["tags"]), batch["target"])

    def predict_proba(self, batch: dict) -> np.ndarray:
        g = Graph()
        p = self.bind(g, trainable=False)
        return row_softmax(self.logits_nodes(g, p, batch["sequence"], batch["tags"]).value)[..., 0, :]


def pointer_forward(m: PointerModel, inst: PointerInstance) -> np.ndarray:
    """Distribution over the OCR positions of one instance."""
    return m.predict_proba(PointerModel.prepare([inst]))[0]
