"""Central-difference gradient checking for graph-built scalar functions."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Mapping

import numpy as np

from .autodiff import Graph, Node

BuildFn = Callable[[Graph, dict[str, Node]], Node]


@dataclass
class GradCheckResult:
    errors: dict[str, float]
    tol: float

    @property
    def max_error(self) -> float:
        return max(self.errors.values(), default=0.0)

    @property
    def passed(self) -> bool:
        return self.max_error <= self.tol


def _evaluate(build: BuildFn, inputs: Mapping[str, np.ndarray]) -> float:
    g = Graph()
    nodes = {k: g.constant(v) for k, v in inputs.items()}
    return float(build(g, nodes).value.reshape(()))


def analytic_gradients(build: BuildFn, inputs: Mapping[str, np.ndarray]) -> dict[str, np.ndarray]:
    g = Graph()
    nodes = {k: g.param(v, name=k) for k, v in inputs.items()}
    return g.gradients_by_name(build(g, nodes))


def numeric_gradient(build: BuildFn, inputs: Mapping[str, np.ndarray], name: str,
                     h: float = 1e-5) -> np.ndarray:
    base = {k: np.array(v, dtype=np.float64) for k, v in inputs.items()}
    x = base[name]
    grad = np.zeros_like(x)
    for idx in np.ndindex(x.shape):
        orig = x[idx]
        x[idx] = orig + h
        up = _evaluate(build, base)
        x[idx] = orig - h
        down = _evaluate(build, base)
        x[idx] = orig
        grad[idx] = (up - down) / (2 * h)
    return grad


def relative_error(analytic: np.ndarray, numeric: np.ndarray, floor: float = 1e-8) -> float:
    """Largest entrywise |a - n| / max(|a|, |n|, floor)."""
    denom = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), floor)
    return float(np.max(np.abs(analytic - numeric) / denom)) if analytic.size else 0.0


def check_gradients(build: BuildFn, inputs: Mapping[str, np.ndarray], *, h: float = 1e-5,
                    tol: float = 1e-4, only=None) -> GradCheckResult:
    """Compare reverse-mode gradients of every input (or those in ``only``) to central differences."""
    analytic = analytic_gradients(build, inputs)
    names = list(inputs) if only is None else list(only)
    errors = {n: relative_error(analytic[n], numeric_gradient(build, inputs, n, h)) for n in names}
    return GradCheckResult(errors, tol)
