"""Batched linear algebra for the tiny matrices that live at every grid node.

``numpy.linalg`` pays a large per-call overhead on stacks of 2x2 matrices, so
the 1x1 and 2x2 cases use closed forms; larger sizes fall back to numpy.
"""

from __future__ import annotations

import numpy as np


def inv(a: np.ndarray) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    k = a.shape[-1]
    if k == 1:
        return 1.0 / a
    if k == 2:
        p, q, r, s = a[..., 0, 0], a[..., 0, 1], a[..., 1, 0], a[..., 1, 1]
        det = p * s - q * r
        out = np.empty_like(a)
        out[..., 0, 0] = s / det
        out[..., 0, 1] = -q / det
        out[..., 1, 0] = -r / det
        out[..., 1, 1] = p / det
        return out
    return np.linalg.inv(a)


def eigvalsh(a: np.ndarray) -> np.ndarray:
    """Eigenvalues of symmetric matrices, ascending.

    The 2x2 formula takes the discriminant from ``((a - d)/2)^2 + b^2`` so a
    double eigenvalue is resolved without cancellation.
    """
    a = np.asarray(a, dtype=float)
    k = a.shape[-1]
    if k == 1:
        return a[..., 0, :].copy()
    if k == 2:
        p, s = a[..., 0, 0], a[..., 1, 1]
        b = 0.5 * (a[..., 0, 1] + a[..., 1, 0])
        mean = 0.5 * (p + s)
        rad = np.hypot(0.5 * (p - s), b)
        return np.stack([mean - rad, mean + rad], axis=-1)
    return np.linalg.eigvalsh(a)


def cholesky(a: np.ndarray) -> np.ndarray:
    """Lower Cholesky factor; raises ``LinAlgError`` unless positive definite."""
    a = np.asarray(a, dtype=float)
    k = a.shape[-1]
    if k > 2:
        return np.linalg.cholesky(a)
    if k == 1:
        if not np.all(a > 0):
            raise np.linalg.LinAlgError("matrix is not positive definite")
        return np.sqrt(a)
    p, q, s = a[..., 0, 0], a[..., 1, 0], a[..., 1, 1]
    with np.errstate(invalid="ignore", divide="ignore"):
        l00 = np.sqrt(p)
        l10 = q / l00
        rest = s - l10 * l10
        l11 = np.sqrt(rest)
    if not (np.all(p > 0) and np.all(rest > 0)):
        raise np.linalg.LinAlgError("matrix is not positive definite")
    out = np.zeros_like(a)
    out[..., 0, 0] = l00
    out[..., 1, 0] = l10
    out[..., 1, 1] = l11
    return out


SMALL = 4


def matmul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Batched ``a @ b``; loops over the inner index when it is short."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    k = a.shape[-1]
    if k > SMALL:
        return a @ b
    out = a[..., :, 0, None] * b[..., None, 0, :]
    for j in range(1, k):
        out = out + a[..., :, j, None] * b[..., None, j, :]
    return out


def matvec(a: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Batched ``a @ v`` for a trailing vector axis."""
    return matmul(a, np.asarray(v, dtype=float)[..., None])[..., 0]


def sandwich(a: np.ndarray, m: np.ndarray, b: np.ndarray) -> np.ndarray:
    """``a^T m b`` over the last two axes."""
    return matmul(matmul(np.swapaxes(a, -1, -2), m), b)


def contract2(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Full contraction of the last two axes: ``sum_ij a_ij b_ij``."""
    prod = a * b
    rows, cols = prod.shape[-2:]
    if rows * cols > SMALL * SMALL:
        return prod.sum(axis=(-2, -1))
    out = prod[..., 0, 0]
    for i in range(rows):
        for j in range(cols):
            if i or j:
                out = out + prod[..., i, j]
    return out
