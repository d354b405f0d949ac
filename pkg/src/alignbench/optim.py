"""Adam optimiser."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ContractError


@dataclass
class AdamState:
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step_count: int = 0
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)

    def step(self, params: dict[str, np.ndarray], grads: dict[str, np.ndarray]) -> dict[str, np.ndarray]:
        """Bias-corrected Adam update; returns new parameter arrays, inputs are left untouched."""
        for name, g in grads.items():
            if name not in params:
                raise ContractError(f"gradient for unknown parameter {name!r}")
            if np.shape(g) != np.shape(params[name]):
                raise ContractError(
                    f"gradient shape {np.shape(g)} does not match parameter {name!r} {np.shape(params[name])}"
                )
        self.step_count += 1
        t = self.step_count
        out = dict(params)
        for name, g in grads.items():
            m = self.m.get(name, np.zeros_like(g))
            v = self.v.get(name, np.zeros_like(g))
            m = self.beta1 * m + (1 - self.beta1) * g
            v = self.beta2 * v + (1 - self.beta2) * g * g
            self.m[name], self.v[name] = m, v
            m_hat = m / (1 - self.beta1 ** t)
            v_hat = v / (1 - self.beta2 ** t)
            out[name] = params[name] - self.lr * m_hat / (np.sqrt(v_hat) + self.eps)
        return out


def adam_step(state: AdamState, params, grads):
    return state.step(params, grads)
