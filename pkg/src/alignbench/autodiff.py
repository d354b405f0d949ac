"""A small tape-based reverse-mode differentiation engine over numpy arrays.

A :class:`Graph` records nodes in creation order, so parents always precede
children and a reverse sweep over the list is a valid topological order.
The primitive set is deliberately closed::

    matmul, transpose, add, mul, row_softmax, relu, layer_norm,
    concat / split (last axis), sum, normalize_rows (cosine),
    hinge (hardest negative), cross_entropy (log-softmax)

Everything else (subtraction, scaling, means, sigmoid, ...) is composed from
these. Binary ops broadcast over leading axes; adjoints are summed back to
the operand's shape.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import numeric
from .errors import ContractError, DimensionError


def _unbroadcast(grad: np.ndarray, shape: tuple) -> np.ndarray:
    if grad.shape == shape:
        return grad
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad.reshape(shape)


@dataclass(eq=False)
class Node:
    graph: "Graph"
    index: int
    op: str
    parents: tuple[int, ...]
    value: np.ndarray
    adjoint: np.ndarray | None = None
    backward_fn: Callable | None = field(default=None, repr=False)

    @property
    def shape(self) -> tuple:
        return self.value.shape

    @property
    def T(self) -> "Node":
        return transpose(self)

    def __matmul__(self, other):
        return matmul(self, other)

    def __rmatmul__(self, other):
        return matmul(other, self)

    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __neg__(self):
        return mul(self, -1.0)

    def __sub__(self, other):
        return add(self, mul(other, -1.0))

    def __rsub__(self, other):
        return add(other, mul(self, -1.0))


class Graph:
    """Computation tape. Confined to one thread; build a new one per forward pass."""

    def __init__(self):
        self.nodes: list[Node] = []
        self.parameters: dict[int, str] = {}

    def record(self, op: str, parents: Sequence[Node], value, backward_fn=None) -> Node:
        for p in parents:
            if p.graph is not self:
                raise ContractError("operands belong to a different graph")
        node = Node(self, len(self.nodes), op, tuple(p.index for p in parents),
                    np.asarray(value, dtype=np.float64), backward_fn=backward_fn)
        self.nodes.append(node)
        return node

    def constant(self, value) -> Node:
        return self.record("const", (), np.array(value, dtype=np.float64))

    def param(self, value, name: str | None = None) -> Node:
        node = self.record("param", (), np.array(value, dtype=np.float64))
        self.parameters[node.index] = name if name is not None else f"p{node.index}"
        return node

    def lift(self, x) -> Node:
        return x if isinstance(x, Node) else self.constant(x)

    def backward(self, loss: Node) -> dict[int, np.ndarray]:
        """Reverse sweep from a 1x1 ``loss``; returns gradients keyed by parameter index."""
        if loss.value.size != 1:
            raise ContractError(f"loss must be scalar (1x1), got shape {loss.shape}")
        for node in self.nodes:
            node.adjoint = None
        loss.adjoint = np.ones_like(loss.value)
        for node in reversed(self.nodes[: loss.index + 1]):
            if node.adjoint is None:
                node.adjoint = np.zeros_like(node.value)
                continue
            if node.backward_fn is None:
                continue
            for pidx, g in zip(node.parents, node.backward_fn(node.adjoint)):
                if g is None:
                    continue
                parent = self.nodes[pidx]
                g = _unbroadcast(g, parent.value.shape)
                parent.adjoint = g if parent.adjoint is None else parent.adjoint + g
        for node in self.nodes[loss.index + 1:]:
            node.adjoint = np.zeros_like(node.value)
        return {i: self.nodes[i].adjoint for i in self.parameters}

    def gradients_by_name(self, loss: Node) -> dict[str, np.ndarray]:
        grads = self.backward(loss)
        return {self.parameters[i]: g for i, g in grads.items()}


def reverse_sweep(graph: Graph, loss: Node) -> dict[int, np.ndarray]:
    return graph.backward(loss)


def _graph_of(*xs) -> Graph:
    for x in xs:
        if isinstance(x, Node):
            return x.graph
    raise ContractError("at least one operand must be a graph node")


def _lift_all(*xs) -> list[Node]:
    g = _graph_of(*xs)
    return [g.lift(x) for x in xs]


# -- primitives ---------------------------------------------------------------

def matmul(a, b) -> Node:
    a, b = _lift_all(a, b)
    value = numeric.matmul(a.value, b.value)
    av, bv = a.value, b.value

    def back(g):
        return (g @ np.swapaxes(bv, -1, -2), np.swapaxes(av, -1, -2) @ g)

    return a.graph.record("matmul", (a, b), value, back)


def transpose(a: Node) -> Node:
    def back(g):
        return (np.swapaxes(g, -1, -2),)

    return a.graph.record("transpose", (a,), numeric.transpose(a.value), back)


def add(a, b) -> Node:
    a, b = _lift_all(a, b)
    try:
        value = a.value + b.value
    except ValueError as exc:
        raise DimensionError(f"cannot add {a.shape} and {b.shape}") from exc
    return a.graph.record("add", (a, b), value, lambda g: (g, g))


def mul(a, b) -> Node:
    """Elementwise (Hadamard) product with broadcasting."""
    a, b = _lift_all(a, b)
    av, bv = a.value, b.value
    try:
        value = av * bv
    except ValueError as exc:
        raise DimensionError(f"cannot multiply elementwise {a.shape} and {b.shape}") from exc
    return a.graph.record("mul", (a, b), value, lambda g: (g * bv, g * av))


def row_softmax(a: Node) -> Node:
    y = numeric.row_softmax(a.value)

    def back(g):
        return (y * (g - (g * y).sum(axis=-1, keepdims=True)),)

    return a.graph.record("row_softmax", (a,), y, back)


def relu(a: Node) -> Node:
    mask = a.value > 0
    return a.graph.record("relu", (a,), np.where(mask, a.value, 0.0), lambda g: (g * mask,))


def layer_norm(x: Node, gain, shift, eps: float = numeric.DEFAULT_LN_EPS) -> Node:
    x, gain, shift = _lift_all(x, gain, shift)
    xv = x.value
    mu = xv.mean(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(((xv - mu) ** 2).mean(axis=-1, keepdims=True) + eps)
    xhat = (xv - mu) * inv
    value = numeric.layer_norm(xv, gain.value, shift.value, eps)
    gv = gain.value

    def back(g):
        gxhat = g * gv
        gx = inv * (gxhat - gxhat.mean(axis=-1, keepdims=True)
                    - xhat * (gxhat * xhat).mean(axis=-1, keepdims=True))
        return (gx, g * xhat, g)

    return x.graph.record("layer_norm", (x, gain, shift), value, back)


def concat(parts: Sequence, axis: int = -1) -> Node:
    """Join along the last axis (columns)."""
    if axis not in (-1,):
        raise ContractError("concat is defined along the last axis only")
    nodes = _lift_all(*parts)
    # broadcast leading axes but keep each part's own width
    lead = np.broadcast_shapes(*[n.value.shape[:-1] for n in nodes])
    values = [np.broadcast_to(n.value, lead + n.value.shape[-1:]) for n in nodes]
    value = np.concatenate(values, axis=-1)
    bounds = np.cumsum([0] + [v.shape[-1] for v in values])

    def back(g):
        return tuple(g[..., bounds[i]:bounds[i + 1]] for i in range(len(nodes)))

    return nodes[0].graph.record("concat", nodes, value, back)


def split(a: Node, sizes: Sequence[int]) -> list[Node]:
    """Split along the last axis into consecutive blocks of the given widths."""
    if int(np.sum(sizes)) != a.shape[-1]:
        raise DimensionError(f"split sizes {list(sizes)} do not cover width {a.shape[-1]}")
    out = []
    start = 0
    for size in sizes:
        lo, hi = start, start + size

        def back(g, lo=lo, hi=hi):
            full = np.zeros_like(a.value)
            full[..., lo:hi] = g
            return (full,)

        out.append(a.graph.record("split", (a,), a.value[..., lo:hi], back))
        start = hi
    return out


def sum(a: Node, axis: int | None = None, keepdims: bool = True) -> Node:  # noqa: A001
    """Total sum as a 1x1 node, or a sum along ``axis`` (kept as size 1 unless ``keepdims=False``)."""
    shape = a.value.shape
    if axis is None:
        value = np.array([[a.value.sum()]])
        return a.graph.record("sum", (a,), value, lambda g: (np.broadcast_to(g.reshape(()), shape),))
    value = a.value.sum(axis=axis, keepdims=keepdims)

    def back(g):
        if not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, shape),)

    return a.graph.record("sum", (a,), value, back)


def normalize_rows(a: Node) -> Node:
    """Rows scaled to unit norm (zero rows map to zero); the cosine primitive."""
    xv = a.value
    norm = np.sqrt((xv * xv).sum(axis=-1, keepdims=True))
    nz = norm > 0
    safe = np.where(nz, norm, 1.0)
    u = np.where(nz, xv / safe, 0.0)

    def back(g):
        return (np.where(nz, (g - u * (g * u).sum(axis=-1, keepdims=True)) / safe, 0.0),)

    return a.graph.record("normalize_rows", (a,), u, back)


def hinge(s: Node, margin: float) -> Node:
    """Hardest-negative hinge per row of a square similarity matrix.

    Row ``i`` yields ``max_{j != i} max(0, margin - s[i, i] + s[i, j])`` as an
    ``n x 1`` column. Ties go to the lowest ``j``.
    """
    sv = s.value
    if sv.ndim != 2 or sv.shape[0] != sv.shape[1]:
        raise DimensionError(f"hinge needs a square matrix, got {sv.shape}")
    n = sv.shape[0]
    if n < 2:
        raise ContractError("hinge needs at least two rows")
    viol = margin - np.diag(sv)[:, None] + sv
    viol[np.arange(n), np.arange(n)] = -np.inf
    hardest = viol.argmax(axis=1)
    best = np.maximum(viol[np.arange(n), hardest], 0.0)
    active = best > 0

    def back(g):
        grad = np.zeros_like(sv)
        gi = g[:, 0] * active
        grad[np.arange(n), hardest] += gi
        grad[np.arange(n), np.arange(n)] -= gi
        return (grad,)

    return s.graph.record("hinge", (s,), best[:, None], back)


def cross_entropy(logits: Node, targets) -> Node:
    """Mean negative log-likelihood of integer ``targets`` under softmax(logits)."""
    targets = np.asarray(targets, dtype=np.int64)
    lv = logits.value
    if targets.shape != lv.shape[:-1]:
        raise DimensionError(f"targets {targets.shape} do not match logits {lv.shape}")
    logp = numeric.log_softmax(lv)
    picked = np.take_along_axis(logp, targets[..., None], axis=-1)
    count = max(targets.size, 1)
    value = np.array([[-picked.sum() / count]])

    def back(g):
        grad = np.exp(logp)
        np.put_along_axis(grad, targets[..., None],
                          np.take_along_axis(grad, targets[..., None], axis=-1) - 1.0, axis=-1)
        return (grad * (g.reshape(()) / count),)

    return logits.graph.record("cross_entropy", (logits,), value, back)


# -- composites ---------------------------------------------------------------

def scale(a: Node, c: float) -> Node:
    return mul(a, float(c))


def mean(a: Node, axis: int | None = None) -> Node:
    n = a.value.size if axis is None else a.value.shape[axis]
    return scale(sum(a, axis), 1.0 / n)


def sigmoid(a: Node) -> Node:
    """Elementwise logistic, as the first column of softmax([x, 0]) per entry."""
    col = a.T if a.shape[-2] == 1 and a.shape[-1] != 1 else None
    if col is None and a.shape[-1] != 1:
        raise DimensionError("sigmoid is composed for a single row or column")
    x = col if col is not None else a
    zeros = np.zeros(x.shape)
    first, _ = split(row_softmax(concat([x, zeros])), [1, 1])
    return first.T if col is not None else first


def cosine_matrix(q: Node, k: Node) -> Node:
    """Pairwise cosine between rows of ``q`` and rows of ``k``."""
    return normalize_rows(q) @ normalize_rows(k).T


def cosine_rowwise(a: Node, b) -> Node:
    """Cosine between matching rows, returned as a column."""
    return sum(normalize_rows(a) * normalize_rows(_graph_of(a).lift(b)), axis=-1)
