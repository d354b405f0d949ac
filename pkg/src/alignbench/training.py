"""Mini-batch training loop and flat-text checkpoints."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .autodiff import Graph
from .errors import ContractError
from .optim import AdamState
from .rng import Rng64, derive_seed

log = logging.getLogger(__name__)


@dataclass
class TrainResult:
    losses: list[float] = field(default_factory=list)
    diverged: bool = False

    @property
    def epochs_run(self) -> int:
        return len(self.losses)


def _slice(data: dict, idx: np.ndarray, n: int, shared: frozenset) -> dict:
    return {k: (v if k in shared else v[idx]) for k, v in data.items()}


def train(model, data: dict[str, np.ndarray], *, epochs: int, batch_size: int, lr: float,
          seed: int, shared=frozenset({"tags"}), stop_fn=None) -> TrainResult:
    """Adam over shuffled mini-batches; stops early on a non-finite loss or when ``stop_fn(epoch)`` is true.

    The model's ``params`` are replaced in place after every step. Batches
    smaller than two are dropped (the triplet loss needs a negative).
    """
    n = next(len(v) for k, v in data.items() if k not in shared)
    opt = AdamState(lr=lr)
    rng = Rng64(derive_seed(seed, 400))
    result = TrainResult()
    for epoch in range(epochs):
        order = rng.permutation(n)
        total, count = 0.0, 0
        for start in range(0, n, batch_size):
            idx = order[start:start + batch_size]
            if len(idx) < 2:
                continue
            g = Graph()
            p = model.bind(g)
            loss = model.loss_nodes(g, p, _slice(data, idx, n, shared))
            value = float(loss.value.reshape(()))
            if not np.isfinite(value):
                result.diverged = True
                result.losses.append(value)
                return result
            grads = g.gradients_by_name(loss)
            model.params = opt.step(model.params, grads)
            total += value * len(idx)
            count += len(idx)
        result.losses.append(total / max(count, 1))
        if not all(np.all(np.isfinite(v)) for v in model.params.values()):
            result.diverged = True
            return result
        if stop_fn is not None and stop_fn(epoch):
            break
    return result


# -- checkpoints ----------------------------------------------------------------

CHECKPOINT_MAGIC = "# alignbench checkpoint v1"


def save_checkpoint(params: dict[str, np.ndarray], path) -> None:
    """Write ``param <name> <rows> <cols>`` headers, each followed by one line of row-major values."""
    with open(path, "w") as fh:
        fh.write(CHECKPOINT_MAGIC + "\n")
        for name in sorted(params):
            arr = np.atleast_2d(np.asarray(params[name], dtype=np.float64))
            fh.write(f"param {name} {arr.shape[0]} {arr.shape[1]}\n")
            fh.write(" ".join(repr(float(v)) for v in arr.ravel()) + "\n")


def load_checkpoint(path) -> dict[str, np.ndarray]:
    with open(path) as fh:
        lines = fh.read().splitlines()
    if not lines or lines[0] != CHECKPOINT_MAGIC:
        raise ContractError(f"{path} is not an alignbench checkpoint")
    out = {}
    for header, values in zip(lines[1::2], lines[2::2]):
        _, name, rows, cols = header.split()
        flat = np.array([float(v) for v in values.split()]) if values else np.zeros(0)
        out[name] = flat.reshape(int(rows), int(cols))
    return out
