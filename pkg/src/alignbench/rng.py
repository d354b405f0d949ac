"""Portable deterministic random numbers.

The generator is SplitMix64: the state advances by the golden-ratio gamma
``0x9E3779B97F4A7C15`` and each output is the state passed through the
finalizer

    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9
    z = (z ^ (z >> 27)) * 0x94D049BB133111EB
    z =  z ^ (z >> 31)

with all arithmetic modulo 2**64. Uniform doubles take the top 53 bits,
``(z >> 11) * 2**-53``, giving values in [0, 1).

Normals use Box-Muller on consecutive uniform pairs ``(u1, u2)``:
``r = sqrt(-2 ln(1 - u1))`` and the pair emits ``r cos(2 pi u2)`` then
``r sin(2 pi u2)``. An odd request discards the unused sine half so every
call consumes a whole number of pairs.

Because output ``k`` depends only on ``seed + (k + 1) * gamma``, draws are
vectorised with numpy's wrapping uint64 arithmetic and are bit-identical to
the scalar definition on every platform.
"""

from __future__ import annotations

import numpy as np

MASK64 = (1 << 64) - 1
GAMMA = 0x9E3779B97F4A7C15
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)


def splitmix64_scalar(state: int) -> tuple[int, int]:
    """Reference one-step SplitMix64 on Python ints; returns (new_state, output)."""
    state = (state + GAMMA) & MASK64
    z = state
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return state, z ^ (z >> 31)


def _mix(z: np.ndarray) -> np.ndarray:
    z = (z ^ (z >> np.uint64(30))) * _MIX1
    z = (z ^ (z >> np.uint64(27))) * _MIX2
    return z ^ (z >> np.uint64(31))


class Rng64:
    """SplitMix64 stream with uniform, integer and Box-Muller normal draws."""

    def __init__(self, seed: int):
        self.state = int(seed) & MASK64

    def next_u64(self, n: int) -> np.ndarray:
        if n <= 0:
            return np.zeros(0, dtype=np.uint64)
        steps = np.arange(1, n + 1, dtype=np.uint64)
        with np.errstate(over="ignore"):
            z = np.uint64(self.state) + steps * np.uint64(GAMMA)
            out = _mix(z)
        self.state = (self.state + n * GAMMA) & MASK64
        return out

    def uniform(self, n: int) -> np.ndarray:
        bits = self.next_u64(n) >> np.uint64(11)
        return bits.astype(np.float64) * (1.0 / (1 << 53))

    def gaussian(self, n: int) -> np.ndarray:
        pairs = (n + 1) // 2
        u = self.uniform(2 * pairs).reshape(pairs, 2)
        r = np.sqrt(-2.0 * np.log1p(-u[:, 0]))
        theta = 2.0 * np.pi * u[:, 1]
        out = np.empty((pairs, 2))
        out[:, 0] = r * np.cos(theta)
        out[:, 1] = r * np.sin(theta)
        return out.reshape(-1)[:n]

    def normal(self, shape, scale: float = 1.0) -> np.ndarray:
        shape = (shape,) if isinstance(shape, int) else tuple(shape)
        return self.gaussian(int(np.prod(shape))).reshape(shape) * scale

    def integers(self, high: int, n: int) -> np.ndarray:
        """``n`` integers in ``[0, high)`` as ``floor(u * high)``."""
        return np.minimum((self.uniform(n) * high).astype(np.int64), high - 1)

    def permutation(self, n: int) -> np.ndarray:
        """Fisher-Yates shuffle of ``range(n)``, swapping from the top down."""
        perm = np.arange(n)
        if n < 2:
            return perm
        u = self.uniform(n - 1)
        for step, i in enumerate(range(n - 1, 0, -1)):
            j = min(int(u[step] * (i + 1)), i)
            perm[i], perm[j] = perm[j], perm[i]
        return perm

    def choice(self, n: int, k: int) -> np.ndarray:
        """``k`` distinct values from ``range(n)`` in random order."""
        return self.permutation(n)[:k]

    def spawn(self) -> "Rng64":
        """Child stream seeded from the next output of this one."""
        return Rng64(int(self.next_u64(1)[0]))


def rng_gaussian(rng: Rng64, n: int) -> np.ndarray:
    return rng.gaussian(n)


def derive_seed(seed: int, stream: int) -> int:
    """Independent seed for a named sub-stream of an experiment seed."""
    _, out = splitmix64_scalar((int(seed) ^ (int(stream) * 0xD1B54A32D192ED03)) & MASK64)
    return out
