"""Dense float64 matrix kernels.

Every kernel accepts stacked matrices: leading axes are treated as batch
axes and broadcast numpy-style, while the trailing two axes are the
``rows x cols`` matrix. Plain 2-D arrays are the common case.
"""

from __future__ import annotations

import numpy as np

from .errors import ContractError, DimensionError

DEFAULT_LN_EPS = 1e-5


def as_matrix(x, name: str = "matrix") -> np.ndarray:
    """Coerce to a finite float64 array with at least two axes."""
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr[None, :]
    if arr.ndim < 2:
        raise DimensionError(f"{name} must be 2-D, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ContractError(f"{name} contains non-finite entries")
    return arr


def matmul(a, b) -> np.ndarray:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.ndim < 2 or b.ndim < 2 or a.shape[-1] != b.shape[-2]:
        raise DimensionError(f"cannot multiply {a.shape} by {b.shape}")
    return a @ b


def transpose(a) -> np.ndarray:
    return np.swapaxes(np.asarray(a, dtype=np.float64), -1, -2)


def row_softmax(s) -> np.ndarray:
    """Softmax along the last axis with per-row max subtraction."""
    s = np.asarray(s, dtype=np.float64)
    if not np.all(np.isfinite(s)):
        raise ContractError("row_softmax input must be finite")
    z = np.exp(s - s.max(axis=-1, keepdims=True))
    return z / z.sum(axis=-1, keepdims=True)


def log_softmax(s) -> np.ndarray:
    s = np.asarray(s, dtype=np.float64)
    shifted = s - s.max(axis=-1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=-1, keepdims=True))


def relu(s) -> np.ndarray:
    return np.maximum(np.asarray(s, dtype=np.float64), 0.0)


def layer_norm(s, gain, shift, eps: float = DEFAULT_LN_EPS) -> np.ndarray:
    """Normalise each row to zero mean, unit (population) variance, then affine."""
    if eps <= 0:
        raise ContractError("layer_norm eps must be positive")
    s = np.asarray(s, dtype=np.float64)
    gain = np.asarray(gain, dtype=np.float64)
    shift = np.asarray(shift, dtype=np.float64)
    d = s.shape[-1]
    if gain.shape[-1] != d or shift.shape[-1] != d:
        raise DimensionError(
            f"layer_norm gain {gain.shape} / shift {shift.shape} do not match width {d}"
        )
    mu = s.mean(axis=-1, keepdims=True)
    var = ((s - mu) ** 2).mean(axis=-1, keepdims=True)
    return (s - mu) / np.sqrt(var + eps) * gain + shift


def normalize_rows(s) -> np.ndarray:
    """Scale each row to unit Euclidean norm; all-zero rows stay zero."""
    s = np.asarray(s, dtype=np.float64)
    norm = np.sqrt((s * s).sum(axis=-1, keepdims=True))
    safe = np.where(norm > 0, norm, 1.0)
    return np.where(norm > 0, s / safe, 0.0)
