"""Singular value decomposition of ``df`` and the frames adapted to it.

Everything here works pointwise but accepts arrays with arbitrary leading
(batch) axes, so a whole grid can be processed in one call.

Index layout used throughout:

* ``a_domain[..., :, i]`` is the domain basis vector ``a_i`` (chart components,
  orthonormal for ``g``); ``a_target[..., :, p]`` is ``a_{n+p}`` (orthonormal
  for ``h``).
* Product vectors have ``n + m`` chart components, domain block first.
* The frame ordering is ``e_1..e_n`` (tangent) then ``e_{n+1}..e_{n+m}`` (normal).
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations

import numpy as np

from graphflow import smallmat
from graphflow.errors import ArityError, DegenerateMetric

RANK_RTOL = 1e-12
RANK_ATOL = 1e-14
TIE_TOL = 1e-10


@dataclass
class SingularData:
    lambdas: np.ndarray  # (..., n), descending
    rank: np.ndarray  # (...)
    a_domain: np.ndarray  # (..., n, n) columns a_i
    a_target: np.ndarray  # (..., m, m) columns a_{n+p}

    @property
    def n(self) -> int:
        return self.lambdas.shape[-1]

    @property
    def m(self) -> int:
        return self.a_target.shape[-1]

    def __getitem__(self, node) -> "SingularData":
        return SingularData(self.lambdas[node], self.rank[node], self.a_domain[node], self.a_target[node])


@dataclass
class AdaptedFrames:
    tangent: np.ndarray  # (..., n+m, n) columns e_i
    normal: np.ndarray  # (..., n+m, m) columns e_{n+p}

    def all(self) -> np.ndarray:
        return np.concatenate([self.tangent, self.normal], axis=-1)


def _cholesky(mat, what):
    try:
        return smallmat.cholesky(mat)
    except np.linalg.LinAlgError as exc:
        raise DegenerateMetric(f"{what} metric is not positive definite") from exc


def _weighted_matrix(df, g, h):
    """``M = Lh^T df Lg^-T`` so that ``M^T M`` has eigenvalues ``lambda^2``."""
    lg = _cholesky(np.asarray(g, dtype=float), "domain")
    lh = _cholesky(np.asarray(h, dtype=float), "target")
    lg_inv_t = smallmat.inv(np.swapaxes(lg, -1, -2))
    mat = np.swapaxes(lh, -1, -2) @ np.asarray(df, dtype=float) @ lg_inv_t
    return mat, lg_inv_t, smallmat.inv(np.swapaxes(lh, -1, -2))


def singular_values(df, g, h) -> np.ndarray:
    """Singular values of ``df`` w.r.t. ``g`` and ``h``, descending, shape ``(..., n)``.

    Uses only a symmetric eigenvalue solve; no frames.
    """
    mat, _, _ = _weighted_matrix(df, g, h)
    gram = np.swapaxes(mat, -1, -2) @ mat
    ev = smallmat.eigvalsh(0.5 * (gram + np.swapaxes(gram, -1, -2)))
    lam = np.sqrt(np.clip(ev, 0.0, None))[..., ::-1]
    return _threshold(lam)


def _threshold(lam):
    lam = np.array(lam, dtype=float)
    cut = np.maximum(RANK_RTOL * lam[..., :1], RANK_ATOL)
    lam[lam < cut] = 0.0
    return lam


def _first_positive(vecs, tol=1e-12):
    """Signs making the first non-negligible component of each column positive."""
    mask = np.abs(vecs) > tol * np.max(np.abs(vecs), axis=-2, keepdims=True).clip(min=1e-300)
    first = np.argmax(mask, axis=-2)
    lead = np.take_along_axis(vecs, first[..., None, :], axis=-2)[..., 0, :]
    return np.where(lead < 0, -1.0, 1.0)


def _gram_schmidt_axes(basis, count):
    """Orthonormal basis of span(basis) built from projected coordinate axes."""
    dim = basis.shape[0]
    proj = basis @ basis.T
    out = []
    for k in range(dim):
        v = proj[:, k].copy()
        for w in out:
            v -= (w @ v) * w
        nv = np.linalg.norm(v)
        if nv > 1e-8:
            out.append(v / nv)
        if len(out) == count:
            break
    return np.array(out).T.reshape(dim, count)


def _groups(lam):
    groups, start = [], 0
    scale = max(1.0, lam[0]) if lam.size else 1.0
    for k in range(1, lam.size + 1):
        if k == lam.size or abs(lam[k] - lam[start]) > TIE_TOL * scale:
            groups.append(list(range(start, k)))
            start = k
    return groups


def _fix_node(mat, lam, v, u):
    """Deterministic gauge for one node with repeated singular values."""
    n, m = v.shape[0], u.shape[0]
    r = int(np.count_nonzero(lam))
    v = v.copy()
    for grp in _groups(lam):
        if len(grp) > 1:
            v[:, grp] = _gram_schmidt_axes(v[:, grp], len(grp))
    v = v * _first_positive(v)
    u_new = np.zeros((m, m))
    for i in range(r):
        u_new[:, i] = mat @ v[:, i] / lam[i]
    if r < m:
        # orthonormal complement of the image, again fixed against the axes
        if r:
            q, _ = np.linalg.qr(u_new[:, :r], mode="complete")
            comp = q[:, r:]
        else:
            comp = np.eye(m)
        comp = _gram_schmidt_axes(comp, m - r)
        u_new[:, r:] = comp * _first_positive(comp)
    return v, u_new


def singular_frames(df, g, h) -> SingularData:
    """Generalized SVD of ``df`` with respect to metrics ``g`` (domain) and ``h`` (target).

    Batched over leading axes.  Ties are resolved by Gram-Schmidt against the
    orthonormalized coordinate axes, and signs make the first non-negligible
    component of each ``a_i`` positive.
    """
    df = np.asarray(df, dtype=float)
    m, n = df.shape[-2:]
    mat, lg_inv_t, lh_inv_t = _weighted_matrix(df, g, h)
    u, s, vt = np.linalg.svd(mat, full_matrices=True)
    v = np.swapaxes(vt, -1, -2)
    lam = np.zeros(df.shape[:-2] + (n,))
    k = min(n, m)
    lam[..., :k] = s[..., :k]
    lam = _threshold(lam)
    rank = np.count_nonzero(lam, axis=-1)

    # fast path: sign fix paired columns
    sign = _first_positive(v)
    v = v * sign[..., None, :]
    u = u.copy()
    u[..., :, :k] = u[..., :, :k] * sign[..., None, :k]
    if m > k:
        u[..., :, k:] = u[..., :, k:] * _first_positive(u[..., :, k:])[..., None, :]

    # nodes needing the tie-breaking gauge
    scale = np.maximum(1.0, lam[..., :1])
    tie = np.any(np.abs(np.diff(lam, axis=-1)) <= TIE_TOL * scale, axis=-1) if n > 1 else np.zeros(lam.shape[:-1], bool)
    tie = tie | ((n - rank) >= 2) | ((m - rank) >= 2) | (rank < k)
    if np.any(tie):
        flat_v = v.reshape(-1, n, n)
        flat_u = u.reshape(-1, m, m)
        flat_m = mat.reshape(-1, m, n)
        flat_l = lam.reshape(-1, n)
        for idx in np.flatnonzero(tie.ravel()):
            flat_v[idx], flat_u[idx] = _fix_node(flat_m[idx], flat_l[idx], flat_v[idx], flat_u[idx])
        v = flat_v.reshape(v.shape)
        u = flat_u.reshape(u.shape)

    return SingularData(lam, rank, lg_inv_t @ v, lh_inv_t @ u)


def adapted_frames(sd: SingularData) -> AdaptedFrames:
    """Tangent frame ``e_i = (a_i + lambda_i a_{n+i}) / sqrt(1 + lambda_i^2)`` and
    normal frame ``e_{n+p} = (a_{n+p} - lambda_p a_p) / sqrt(1 + lambda_p^2)``."""
    lam = sd.lambdas
    n, m = sd.n, sd.m
    k = min(n, m)
    batch = lam.shape[:-1]
    tan = np.zeros(batch + (n + m, n))
    nor = np.zeros(batch + (n + m, m))
    norm = 1.0 / np.sqrt(1.0 + lam**2)
    tan[..., :n, :] = sd.a_domain * norm[..., None, :]
    tan[..., n:, :k] = sd.a_target[..., :, :k] * (lam[..., :k] * norm[..., :k])[..., None, :]
    nor[..., n:, :] = sd.a_target
    nor[..., n:, :k] *= norm[..., None, :k]
    nor[..., :n, :k] = -sd.a_domain[..., :, :k] * (lam[..., :k] * norm[..., :k])[..., None, :]
    return AdaptedFrames(tan, nor)


def s_diagonal(lambdas) -> np.ndarray:
    lam2 = np.asarray(lambdas, dtype=float) ** 2
    return (1.0 - lam2) / (1.0 + lam2)


def s_restriction(lambdas, m: int) -> tuple[np.ndarray, np.ndarray]:
    """Diagonal of ``S`` on the tangent frame and the full block matrix on all
    ``n + m`` adapted frame vectors."""
    lam = np.asarray(lambdas, dtype=float)
    n = lam.shape[-1]
    k = min(n, m)
    diag = s_diagonal(lam)
    full = np.zeros(lam.shape[:-1] + (n + m, n + m))
    ii = np.arange(n)
    full[..., ii, ii] = diag
    pp = np.arange(m)
    full[..., n + pp, n + pp] = -1.0
    kk = np.arange(k)
    full[..., n + kk, n + kk] = -diag[..., :k]
    off = -2.0 * lam[..., :k] / (1.0 + lam[..., :k] ** 2)
    full[..., kk, n + kk] = off
    full[..., n + kk, kk] = off
    return diag, full


def star_omega(lambdas) -> np.ndarray:
    lam = np.asarray(lambdas, dtype=float)
    return 1.0 / np.sqrt(np.prod(1.0 + lam**2, axis=-1))


def area_margin(lambdas) -> np.ndarray:
    """Smallest pairwise sum of ``S`` eigenvalues, ``min_{i<j} 2(1 - li^2 lj^2)/((1+li^2)(1+lj^2))``."""
    lam2 = np.asarray(lambdas, dtype=float) ** 2
    n = lam2.shape[-1]
    if n < 2:
        raise ArityError("area margin needs at least two singular values")
    li = lam2[..., :, None]
    lj = lam2[..., None, :]
    pair = 2.0 * (1.0 - li * lj) / ((1.0 + li) * (1.0 + lj))
    iu = np.triu_indices(n, 1)
    return np.min(pair[..., iu[0], iu[1]], axis=-1)


def wedge_pairs(n: int) -> list[tuple[int, int]]:
    return list(combinations(range(n), 2))


def p2_matrix(p) -> np.ndarray:
    """Matrix of ``P^[2]`` on the basis ``F_a ^ F_b`` (a < b) of the wedge square."""
    p = np.asarray(p, dtype=float)
    n = p.shape[-1]
    pairs = wedge_pairs(n)
    eye = np.eye(n)
    out = np.zeros(p.shape[:-2] + (len(pairs), len(pairs)))
    for r, (a, b) in enumerate(pairs):
        for c_, (c, d) in enumerate(pairs):
            out[..., r, c_] = (
                p[..., a, c] * eye[b, d]
                + p[..., b, d] * eye[a, c]
                - p[..., a, d] * eye[b, c]
                - p[..., b, c] * eye[a, d]
            )
    return out


def product_metric(g, h) -> np.ndarray:
    """Block-diagonal metric of the product on ``n + m`` chart components."""
    g, h = np.asarray(g, dtype=float), np.asarray(h, dtype=float)
    n, m = g.shape[-1], h.shape[-1]
    batch = np.broadcast_shapes(g.shape[:-2], h.shape[:-2])
    out = np.zeros(batch + (n + m, n + m))
    out[..., :n, :n] = g
    out[..., n:, n:] = h
    return out


def s_tensor(g, h) -> np.ndarray:
    """Coordinate matrix of the parallel tensor ``<pi1 X, pi1 Y> - <pi2 X, pi2 Y>``."""
    out = product_metric(g, h)
    n = np.asarray(g).shape[-1]
    out[..., n:, n:] *= -1.0
    return out
