"""Deterministic synthetic tasks with planted ground truth.

* retrieval: an "image" is a set of noisy concept vectors (regions) and its
  "caption" a shuffled, independently noised copy of the same concepts.
* counting: objects carry one-hot colour / shape / size blocks; a query is a
  conjunction of attribute values and the label is how many objects match.
* pointer: a question, some objects and some OCR tokens form one sequence;
  exactly one OCR token shares the concept planted in the first question row.

Every generator is a pure function of ``(config, seed)``.
"""

from __future__ import annotations

import csv
import string
from dataclasses import asdict, dataclass, field, fields

import numpy as np

from .errors import ConfigError
from .rng import Rng64, derive_seed

COLORS, SHAPES, SIZES = 3, 3, 2
ATTR_BLOCKS = (COLORS, SHAPES, SIZES)
D_ATTR = sum(ATTR_BLOCKS)
N_TYPES = 3  # question / object / ocr


# -- concept bank ---------------------------------------------------------------

@dataclass(frozen=True)
class ConceptBank:
    concepts: np.ndarray
    seed: int

    @property
    def size(self) -> int:
        return self.concepts.shape[0]


def make_concept_bank(C: int, d_in: int, seed: int, max_abs_cos: float = 0.6,
                      max_tries: int = 100_000) -> ConceptBank:
    """Unit rows drawn one at a time, redrawing any row too close to an accepted one."""
    rng = Rng64(seed)
    rows: list[np.ndarray] = []
    tries = 0
    while len(rows) < C:
        tries += 1
        if tries > max_tries:
            raise ConfigError(f"cannot place {C} concepts in {d_in} dims with |cos| <= {max_abs_cos}")
        v = rng.gaussian(d_in)
        v = v / np.linalg.norm(v)
        if all(abs(float(v @ r)) <= max_abs_cos for r in rows):
            rows.append(v)
    return ConceptBank(np.array(rows), seed)


def nearest_concepts(features: np.ndarray, bank: ConceptBank) -> np.ndarray:
    """Index of the highest-cosine concept for each feature row."""
    norms = np.linalg.norm(features, axis=-1, keepdims=True)
    return np.argmax((features / np.where(norms > 0, norms, 1.0)) @ bank.concepts.T, axis=-1)


def make_vocabulary(n: int, seed: int) -> list[str]:
    """``n`` distinct lowercase pseudo-words of 3-7 letters."""
    rng = Rng64(seed)
    words: list[str] = []
    letters = string.ascii_lowercase
    while len(words) < n:
        length = 3 + int(rng.integers(5, 1)[0])
        w = "".join(letters[i] for i in rng.integers(26, length))
        if w not in words:
            words.append(w)
    return words


# -- retrieval ------------------------------------------------------------------

@dataclass(frozen=True)
class RetrievalConfig:
    C: int = 16
    d_in: int = 32
    N: int = 6
    M: int = 6
    sigma: float = 0.05
    train_size: int = 256
    pool_size: int = 100

    def validate(self):
        if self.N > self.C or self.M > self.C:
            raise ConfigError(f"N={self.N} and M={self.M} must not exceed C={self.C}")
        if min(self.N, self.M, self.C, self.d_in) < 1:
            raise ConfigError("C, d_in, N and M must be positive")
        if self.sigma < 0:
            raise ConfigError("sigma must be non-negative")
        if self.train_size < 2 or self.pool_size < 1:
            raise ConfigError("need at least 2 training pairs and 1 test pair")


@dataclass(frozen=True)
class RetrievalInstance:
    regions: np.ndarray
    tokens: np.ndarray
    concept_ids: np.ndarray
    token_ids: np.ndarray


@dataclass(frozen=True)
class Splits:
    train: list
    test: list
    bank: ConceptBank | None = None
    vocabulary: list[str] = field(default_factory=list)


def gen_retrieval(cfg: RetrievalConfig, seed: int) -> Splits:
    """Train and test pairs; every pair in both splits has a distinct concept set."""
    cfg.validate()
    bank = make_concept_bank(cfg.C, cfg.d_in, derive_seed(seed, 1))
    rng = Rng64(derive_seed(seed, 2))
    seen: set[frozenset] = set()
    out = []
    total = cfg.train_size + cfg.pool_size
    while len(out) < total:
        ids = rng.choice(cfg.C, cfg.N)
        key = frozenset(ids.tolist())
        if key in seen and len(seen) < _n_choose(cfg.C, cfg.N):
            continue
        seen.add(key)
        order = np.concatenate([ids[rng.permutation(cfg.N)] for _ in range(-(-cfg.M // cfg.N))])
        token_ids = order[: cfg.M]
        regions = bank.concepts[ids] + rng.normal((cfg.N, cfg.d_in), cfg.sigma)
        tokens = bank.concepts[token_ids] + rng.normal((cfg.M, cfg.d_in), cfg.sigma)
        out.append(RetrievalInstance(regions, tokens, ids, token_ids))
    return Splits(out[: cfg.train_size], out[cfg.train_size:], bank)


def _n_choose(n: int, k: int) -> int:
    from math import comb
    return comb(n, k)


# -- counting -------------------------------------------------------------------

@dataclass(frozen=True)
class CountingConfig:
    N: int = 6
    sigma: float = 0.05
    n_queried_range: tuple[int, int] | None = None
    train_size: int = 2000
    test_size: int = 600

    @property
    def count_range(self) -> tuple[int, int]:
        return tuple(self.n_queried_range) if self.n_queried_range is not None else (0, self.N)

    def validate(self):
        if self.N < 1:
            raise ConfigError("counting task needs N >= 1")
        lo, hi = self.count_range
        if not 0 <= lo <= hi <= self.N:
            raise ConfigError(f"n_queried_range {self.count_range} must lie within 0..{self.N}")
        if self.sigma < 0:
            raise ConfigError("sigma must be non-negative")
        if self.train_size < 1 or self.test_size < 1:
            raise ConfigError("split sizes must be positive")


@dataclass(frozen=True)
class CountingInstance:
    objects: np.ndarray        # N x D_ATTR noisy one-hot blocks
    query: np.ndarray          # 1 x D_ATTR multi-hot of the queried values
    count: int
    n_queried: int             # objects the query refers to
    attributes: np.ndarray     # N x 3 clean (colour, shape, size) indices
    query_attributes: np.ndarray  # length 3, -1 where the attribute is unconstrained


def encode_attributes(attrs: np.ndarray) -> np.ndarray:
    """One-hot encode ``(colour, shape, size)`` rows; ``-1`` entries encode as all zeros."""
    attrs = np.atleast_2d(attrs)
    out = np.zeros((attrs.shape[0], D_ATTR))
    offset = 0
    for col, width in enumerate(ATTR_BLOCKS):
        vals = attrs[:, col]
        rows = np.nonzero(vals >= 0)[0]
        out[rows, offset + vals[rows]] = 1.0
        offset += width
    return out


def count_matches(attributes: np.ndarray, query_attributes: np.ndarray) -> int:
    """Independent scan: objects whose every constrained attribute equals the query."""
    total = 0
    for obj in np.atleast_2d(attributes):
        if all(q < 0 or o == q for o, q in zip(obj, query_attributes)):
            total += 1
    return total


def _random_attributes(rng: Rng64, n: int) -> np.ndarray:
    return np.stack([rng.integers(w, n) for w in ATTR_BLOCKS], axis=1)


def make_counting_instance(rng: Rng64, N: int, count: int, sigma: float) -> CountingInstance:
    # non-empty subset of {colour, shape, size}; 7 equally likely masks
    mask = 1 + int(rng.integers(7, 1)[0])
    query = np.array([int(rng.integers(w, 1)[0]) if mask >> i & 1 else -1
                      for i, w in enumerate(ATTR_BLOCKS)])
    attrs = []
    for _ in range(count):
        a = _random_attributes(rng, 1)[0]
        attrs.append(np.where(query >= 0, query, a))
    while len(attrs) < N:
        a = _random_attributes(rng, 1)[0]
        if not all(q < 0 or o == q for o, q in zip(a, query)):
            attrs.append(a)
    attrs = np.array(attrs)[rng.permutation(N)]
    objects = encode_attributes(attrs) + rng.normal((N, D_ATTR), sigma)
    scanned = count_matches(attrs, query)
    assert scanned == count
    return CountingInstance(objects, encode_attributes(query[None, :]), scanned, scanned,
                            attrs, query)


def gen_counting(cfg: CountingConfig, seed: int) -> Splits:
    """Count labels uniform over ``n_queried_range`` (default ``0..N``)."""
    cfg.validate()
    lo, hi = cfg.count_range
    rng = Rng64(derive_seed(seed, 3))
    insts = []
    for count in rng.integers(hi - lo + 1, cfg.train_size + cfg.test_size) + lo:
        insts.append(make_counting_instance(rng, cfg.N, int(count), cfg.sigma))
    return Splits(insts[: cfg.train_size], insts[cfg.train_size:])


# -- pointer --------------------------------------------------------------------

@dataclass(frozen=True)
class PointerConfig:
    M: int = 3
    N: int = 3
    O: int = 6
    d_in: int = 32
    sigma: float = 0.05
    C: int = 24
    train_size: int = 1500
    test_size: int = 500

    def validate(self):
        if self.O < 2:
            raise ConfigError("pointer task needs O >= 2")
        if self.M < 1 or self.N < 0 or self.d_in < 1:
            raise ConfigError("pointer task needs M >= 1, N >= 0 and d_in >= 1")
        if self.O > self.C or self.M > self.C:
            raise ConfigError(f"M={self.M} and O={self.O} must not exceed C={self.C}")
        if self.sigma < 0:
            raise ConfigError("sigma must be non-negative")
        if self.train_size < 1 or self.test_size < 1:
            raise ConfigError("split sizes must be positive")


@dataclass(frozen=True)
class PointerInstance:
    question: np.ndarray   # M x d_in, row 0 carries the planted concept
    objects: np.ndarray    # N x d_in
    ocr: np.ndarray        # O x d_in
    answer_index: int
    planted: int
    ocr_concepts: np.ndarray

    @property
    def sequence(self) -> np.ndarray:
        return np.concatenate([self.question, self.objects, self.ocr], axis=0)

    @property
    def type_tags(self) -> np.ndarray:
        """Row-aligned one-hot ``(question, object, ocr)`` tags."""
        sizes = (len(self.question), len(self.objects), len(self.ocr))
        return np.repeat(np.eye(N_TYPES), sizes, axis=0)


def gen_pointer(cfg: PointerConfig, seed: int) -> Splits:
    cfg.validate()
    bank = make_concept_bank(cfg.C, cfg.d_in, derive_seed(seed, 4))
    vocab = make_vocabulary(cfg.C, derive_seed(seed, 5))
    rng = Rng64(derive_seed(seed, 6))
    insts = []
    for _ in range(cfg.train_size + cfg.test_size):
        planted = int(rng.integers(cfg.C, 1)[0])
        others = np.array([c for c in range(cfg.C) if c != planted])
        q_ids = np.concatenate([[planted], others[rng.choice(len(others), cfg.M - 1)]])
        obj_ids = others[rng.integers(len(others), cfg.N)]
        ocr_ids = others[rng.choice(len(others), cfg.O)]
        answer = int(rng.integers(cfg.O, 1)[0])
        ocr_ids[answer] = planted
        noise = rng.normal((cfg.M + cfg.N + cfg.O, cfg.d_in), cfg.sigma)
        feats = bank.concepts[np.concatenate([q_ids, obj_ids, ocr_ids]).astype(int)] + noise
        insts.append(PointerInstance(feats[: cfg.M], feats[cfg.M: cfg.M + cfg.N],
                                     feats[cfg.M + cfg.N:], answer, planted, ocr_ids))
    return Splits(insts[: cfg.train_size], insts[cfg.train_size:], bank, vocab)


def planted_answer(inst: PointerInstance) -> int:
    """Independent scan for the OCR slot carrying the planted concept."""
    hits = [i for i, c in enumerate(inst.ocr_concepts) if c == inst.planted]
    assert len(hits) == 1
    return hits[0]


# -- CSV serialisation ----------------------------------------------------------

SPLIT_HEADER = ["instance", "field", "row", "values"]


def write_split_csv(instances, path) -> None:
    """One line per matrix row: ``instance, field, row, v0, v1, ...`` (floats in repr form)."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(SPLIT_HEADER)
        for i, inst in enumerate(instances):
            for f in fields(inst):
                arr = np.atleast_2d(np.asarray(getattr(inst, f.name), dtype=np.float64))
                for r, row in enumerate(arr):
                    w.writerow([i, f.name, r, *(repr(float(v)) for v in row)])


def read_split_csv(path) -> list[dict[str, np.ndarray]]:
    """Inverse of :func:`write_split_csv`, returning one ``{field: matrix}`` per instance."""
    out: dict[int, dict[str, list]] = {}
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        next(reader)
        for rec in reader:
            i, name = int(rec[0]), rec[1]
            out.setdefault(i, {}).setdefault(name, []).append([float(v) for v in rec[3:]])
    return [{k: np.array(v) for k, v in out[i].items()} for i in sorted(out)]


def config_dict(cfg) -> dict:
    return asdict(cfg)
