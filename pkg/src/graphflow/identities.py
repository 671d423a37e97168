"""Randomized verifiers for the pointwise algebra behind the preserved conditions.

Every quantity here lives at a single point of the graph, written in the
adapted orthonormal frames: singular values ``lambda``, a second fundamental
form ``h[p, i, j]`` (normal index ``p``, tangent indices ``i, j``) and the
curvatures ``k1`` (domain) and ``k2`` (target).  Indices are zero based: the
frame vector ``e_1`` of the usual notation is index 0.

Each closed form comes with an independent construction (frame vectors,
block matrices, curvature tensors) so that :func:`run_verification` compares
two computations instead of re-evaluating one.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from functools import lru_cache
from itertools import combinations

import numpy as np
from scipy.optimize import minimize

from graphflow.errors import ArityError, ConstraintError
from graphflow.frames import (
    SingularData,
    adapted_frames,
    area_margin,
    p2_matrix,
    s_diagonal,
    s_restriction,
    star_omega,
)
from graphflow.spaceform import product_riemann

TOL = 1e-12


@dataclass
class AlgebraSample:
    """Pointwise data for the algebraic checks.

    ``lambdas`` has one entry per domain direction; entries past ``min(n, m)``
    must vanish since ``df`` has rank at most ``m``.
    """

    n: int
    m: int
    lambdas: np.ndarray
    h: np.ndarray
    k1: float = 0.0
    k2: float = 0.0
    epsilon: float = 0.0
    eta: float = 0.0
    delta: float = 0.0
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.lambdas = np.asarray(self.lambdas, dtype=float)
        self.h = np.asarray(self.h, dtype=float)
        if self.n < 1 or self.m < 1:
            raise ValueError("n and m must be positive")
        if self.lambdas.shape != (self.n,):
            raise ValueError(f"lambdas must have shape ({self.n},)")
        if self.h.shape != (self.m, self.n, self.n):
            raise ValueError(f"h must have shape ({self.m}, {self.n}, {self.n})")
        if np.any(self.lambdas < 0):
            raise ValueError("singular values must be non-negative")
        if np.any(self.lambdas[min(self.n, self.m):] != 0):
            raise ValueError("lambda_i must vanish for i >= m")
        scale = 1.0 + np.max(np.abs(self.h), initial=0.0)
        if np.max(np.abs(self.h - np.swapaxes(self.h, 1, 2)), initial=0.0) > 1e-12 * scale:
            raise ValueError("h must be symmetric in its tangent indices")
        if min(self.epsilon, self.eta, self.delta) < 0:
            raise ValueError("epsilon, eta and delta must be non-negative")

    @property
    def frames(self):
        """Adapted frames for coordinate singular bases (split orthonormal coordinates)."""
        sd = SingularData(self.lambdas, np.count_nonzero(self.lambdas), np.eye(self.n), np.eye(self.m))
        return adapted_frames(sd)

    @property
    def s_matrix(self) -> np.ndarray:
        return s_restriction(self.lambdas, self.m)[1]

    def scaled(self, s: float) -> "AlgebraSample":
        return AlgebraSample(self.n, self.m, self.lambdas, s * self.h, self.k1, self.k2,
                             self.epsilon, self.eta, self.delta, dict(self.meta))


def _normal_lambdas(lambdas, m: int) -> np.ndarray:
    """Singular values indexed by the normal direction ``p`` (zero past ``n``)."""
    lam = np.asarray(lambdas, dtype=float)
    out = np.zeros(lam.shape[:-1] + (m,))
    k = min(lam.shape[-1], m)
    out[..., :k] = lam[..., :k]
    return out


# --- curvature terms ----------------------------------------------------------


def curvature_term_410(sample: AlgebraSample, i: int, j: int) -> float:
    """``sum_{k, alpha} R_{k i k alpha} S_{alpha j}`` in closed form."""
    if i != j:
        return 0.0
    lam2 = sample.lambdas**2
    sk = s_diagonal(sample.lambdas)
    others = np.sum(sk) - sk[i]
    n = sample.n
    bracket = (sample.k1 - sample.k2) * (n - 1) + (sample.k1 + sample.k2) * others
    return float(lam2[i] / (1.0 + lam2[i]) ** 2 * bracket)


def curvature_contraction(sample: AlgebraSample) -> np.ndarray:
    """Brute-force ``C[i, j] = sum_{k, alpha} R(e_k, e_i, e_k, e_alpha) S(e_alpha, e_j)``.

    ``R`` is the product curvature evaluated on the frame vectors and ``S``
    is the block matrix of the parallel tensor on the adapted frames.
    """
    fr = sample.frames
    n = sample.n
    tan = np.moveaxis(fr.tangent, -1, 0)  # [k, comp]
    nor = np.moveaxis(fr.normal, -1, 0)  # [alpha, comp]
    ek = tan[:, None, None, :]
    ei = tan[None, :, None, :]
    ea = nor[None, None, :, :]
    r = product_riemann(sample.k1, sample.k2, n, ek, ei, ek, ea)  # [k, i, alpha]
    rk = r.sum(axis=0)  # [i, alpha]
    s_alpha_j = sample.s_matrix[n:, :n]
    return rk @ s_alpha_j


def identity_411(lambdas, k1: float, k2: float, n: int, i: int) -> tuple[float, float]:
    lam2 = np.asarray(lambdas, dtype=float) ** 2
    mask = np.arange(lam2.shape[-1]) != i
    lhs = (k1 + k2) * np.sum(1.0 / (1.0 + lam2[mask])) + k2 * (1 - n)
    rhs = (k1 - k2) * (n - 1) / 2 + (k1 + k2) * np.sum((1.0 - lam2[mask]) / (2.0 * (1.0 + lam2[mask])))
    return float(lhs), float(rhs)


# --- preserved-condition forms ------------------------------------------------


def _check_curvatures(sample: AlgebraSample, need_sum: bool = False) -> None:
    if sample.k1 < abs(sample.k2) - TOL:
        raise ConstraintError(f"needs k1 >= |k2|, got k1={sample.k1}, k2={sample.k2}")
    if need_sum and sample.k1 + sample.k2 < -TOL:
        raise ConstraintError("needs k1 + k2 >= 0")


def lemma41_form(sample: AlgebraSample) -> float:
    """``N(V, V)`` at a null eigenvector ``V = e_1`` of ``S - epsilon g``.

    ``2 eps h_{a k 1}^2 + 2 R_{k 1 k a} S_{a 1} - 2 h_{a k 1} h_{b k 1} S_{a b}``.
    """
    _check_curvatures(sample)
    sd = s_diagonal(sample.lambdas)
    eps = sample.epsilon
    if abs(sd[0] - eps) > 1e-10 or np.min(sd) < eps - 1e-10:
        raise ConstraintError("S - epsilon g must be non-negative with null direction e_1")
    n = sample.n
    s_nn = sample.s_matrix[n:, n:]
    hv = sample.h[:, :, 0]  # [alpha, k]
    eps_term = 2.0 * eps * np.sum(hv**2)
    curv = 2.0 * curvature_term_410(sample, 0, 0)
    quad = -2.0 * np.einsum("ak,bk,ab->", hv, hv, s_nn)
    return float(eps_term + curv + quad)


def lemma41_blocks(sample: AlgebraSample) -> float:
    """Same value with the normal block of ``S`` expanded into its diagonal pieces."""
    hv = sample.h[:, :, 0]
    sp = s_diagonal(_normal_lambdas(sample.lambdas, sample.m))
    return float(2.0 * sample.epsilon * np.sum(hv**2) + 2.0 * curvature_term_410(sample, 0, 0)
                 + 2.0 * np.sum(sp[:, None] * hv**2))


def impose_gradient_relation(lambdas, h) -> np.ndarray:
    """Project ``h`` onto the critical-point relation

    ``l1/(1+l1^2) h_{n+1,p1} + l2/(1+l2^2) h_{n+2,p2} = 0`` for every ``p``.

    ``h_{n+1,p1}`` (and its mirror ``h_{n+1,1p}``) is overwritten; when
    ``l1 = 0`` both sides are zeroed.
    """
    lam = np.asarray(lambdas, dtype=float)
    h = np.array(h, dtype=float)
    m, n = h.shape[0], h.shape[1]
    l1 = lam[0]
    l2 = lam[1] if n > 1 else 0.0
    second = h[1, :, 1].copy() if m > 1 and n > 1 else np.zeros(n)
    if l1 > 0:
        first = -(l2 * (1 + l1**2)) / (l1 * (1 + l2**2)) * second
    else:
        first = np.zeros(n)
        if m > 1 and n > 1:
            h[1, :, 1] = 0.0
            h[1, 1, :] = 0.0
    h[0, :, 0] = first
    h[0, 0, :] = first
    return h


def gradient_relation_residual(sample: AlgebraSample) -> float:
    lam = sample.lambdas
    l1, l2 = lam[0], lam[1]
    first = sample.h[0, :, 0]
    second = sample.h[1, :, 1] if sample.m > 1 else np.zeros(sample.n)
    res = l1 / (1 + l1**2) * first + l2 / (1 + l2**2) * second
    return float(np.max(np.abs(res)))


def _check_lemma53(sample: AlgebraSample) -> None:
    if sample.n < 2:
        raise ArityError("the wedge-square argument needs n >= 2")
    _check_curvatures(sample, need_sum=True)
    lam2 = sample.lambdas**2
    if np.any(np.diff(lam2) > 1e-12 * (1 + lam2[:-1])):
        raise ConstraintError("lambda^2 must be sorted in descending order")
    sd = s_diagonal(sample.lambdas)
    if sd[0] + sd[1] <= 0:
        raise ConstraintError("needs S_11 + S_22 > 0")
    scale = 1.0 + np.max(np.abs(sample.h), initial=0.0)
    if gradient_relation_residual(sample) > 1e-10 * scale:
        raise ConstraintError("h does not satisfy the critical-point gradient relation")


def lemma53_rhs(sample: AlgebraSample) -> float:
    """Heat operator of ``S_11 + S_22`` at the critical point, plus ``2 eta``.

    ``2 eta + 2 R_{k1ka} S_{a1} + 2 R_{k2ka} S_{a2} + 2 h_{akj} h_{ak1} S_{j1}
    + 2 h_{akj} h_{ak2} S_{j2} - 2 h_{ak1} h_{bk1} S_{ab} - 2 h_{ak2} h_{bk2} S_{ab}``
    evaluated with the full block matrix of ``S``.
    """
    _check_lemma53(sample)
    n = sample.n
    s = sample.s_matrix
    s_tt, s_nn = s[:n, :n], s[n:, n:]
    h = sample.h
    total = 2.0 * sample.eta
    total += 2.0 * (curvature_term_410(sample, 0, 0) + curvature_term_410(sample, 1, 1))
    for c in (0, 1):
        total += 2.0 * np.einsum("akj,ak,j->", h, h[:, :, c], s_tt[:, c])
        total -= 2.0 * np.einsum("ak,bk,ab->", h[:, :, c], h[:, :, c], s_nn)
    return float(total)


def lemma53_regrouped(sample: AlgebraSample) -> float:
    """Independent evaluation of the same quantity.

    The curvature part uses the split over ``j >= 3`` and the ``(1, 2)`` pair;
    the quadratic part uses the regrouping that pairs ``h_{n+1,k1}`` with
    ``h_{n+2,k2}``.
    """
    lam2 = sample.lambdas**2
    k1, k2, n = sample.k1, sample.k2, sample.n
    w = lam2[:2] / (1 + lam2[:2]) ** 2
    rest = np.sum(s_diagonal(sample.lambdas[2:]))
    curv = (k1 - k2) * (n - 1) * w.sum() + (k1 + k2) * w.sum() * rest
    curv += (k1 + k2) * (lam2[0] + lam2[1]) * (1 - lam2[0] * lam2[1]) / ((1 + lam2[0]) ** 2 * (1 + lam2[1]) ** 2)
    sp = s_diagonal(_normal_lambdas(sample.lambdas, sample.m))
    s11, s22 = s_diagonal(sample.lambdas[:2])
    h = sample.h
    hp = np.zeros((max(sample.m, 2),) + h.shape[1:])
    hp[: sample.m] = h
    quad = np.sum(4 * hp[0, :, 0] ** 2 * s11 + 4 * hp[1, :, 1] ** 2 * s22
                  + 2 * hp[1, :, 0] ** 2 * (s11 + s22) + 2 * hp[0, :, 1] ** 2 * (s11 + s22))
    for q in range(2, sample.m):
        quad += np.sum(2 * h[q, :, 0] ** 2 * (s11 + sp[q]) + 2 * h[q, :, 1] ** 2 * (s22 + sp[q]))
    return float(2 * sample.eta + 2 * curv + quad)


def sff_pair_inequality(sample: AlgebraSample) -> tuple[np.ndarray, np.ndarray]:
    """``(h_{n+1,p1}^2, h_{n+2,p2}^2)`` per ``p`` under the critical-point relation."""
    if sample.n < 2 or sample.m < 2:
        raise ArityError("needs n >= 2 and m >= 2")
    lam2 = sample.lambdas**2
    if not (lam2[1] < lam2[0] and lam2[0] * lam2[1] < 1):
        raise ConstraintError("needs lambda_2^2 < lambda_1^2 and lambda_1^2 lambda_2^2 < 1")
    scale = 1.0 + np.max(np.abs(sample.h), initial=0.0)
    if gradient_relation_residual(sample) > 1e-10 * scale:
        raise ConstraintError("h does not satisfy the critical-point gradient relation")
    return sample.h[0, :, 0] ** 2, sample.h[1, :, 1] ** 2


def quadratic_form(h, lambdas) -> float:
    """``sum h_aik^2 + sum l_i^2 h_{n+i,ik}^2 + 2 sum_{k, i<j} l_i l_j h_{n+j,ik} h_{n+i,jk}``."""
    h = np.asarray(h, dtype=float)
    lam = np.asarray(lambdas, dtype=float)
    m, n = h.shape[0], h.shape[1]
    total = float(np.sum(h**2))
    for k in range(n):
        for i in range(min(n, m)):
            total += lam[i] ** 2 * h[i, i, k] ** 2
            for j in range(i + 1, min(n, m)):
                total += 2 * lam[i] * lam[j] * h[j, i, k] * h[i, j, k]
    return total


def quadratic_lower_bound(sample: AlgebraSample) -> float:
    """``Q - delta |A|^2`` with ``Q`` the quadratic second-fundamental-form terms."""
    return quadratic_form(sample.h, sample.lambdas) - sample.delta * float(np.sum(sample.h**2))


def delta_from_epsilon(epsilon: float) -> float:
    """``delta`` with ``1 - delta = sqrt(1 - epsilon)``."""
    return 1.0 - float(np.sqrt(1.0 - epsilon))


def identity_62(lambdas) -> tuple[float, float]:
    lam2 = np.asarray(lambdas, dtype=float) ** 2
    n = lam2.shape[-1]
    if n < 2:
        raise ArityError("needs n >= 2")
    lhs = 0.0
    for i in range(n):
        others = sum((1 - lam2[j]) / (2 * (1 + lam2[j])) for j in range(n) if j != i)
        lhs += lam2[i] / (1 + lam2[i]) * others
    rhs = sum((lam2[i] + lam2[j] - 2 * lam2[i] * lam2[j]) / (2 * (1 + lam2[i]) * (1 + lam2[j]))
              for i, j in combinations(range(n), 2))
    return float(lhs), float(rhs)


def _pair_sum(lam2: np.ndarray) -> np.ndarray:
    """Vectorized right side of the pair-sum identity over a trailing axis."""
    li, lj = lam2[..., :, None], lam2[..., None, :]
    terms = (li + lj - 2 * li * lj) / (2 * (1 + li) * (1 + lj))
    iu = np.triu_indices(lam2.shape[-1], 1)
    return terms[..., iu[0], iu[1]].sum(axis=-1)


# --- logarithmic lower bound ---------------------------------------------------


def admissible(lambdas, epsilon: float, tol: float = 1e-12) -> bool:
    lam = np.asarray(lambdas, dtype=float)
    if np.any(lam**2 > (1 - epsilon) / epsilon + tol):
        return False
    prod = lam[:, None] * lam[None, :]
    iu = np.triu_indices(lam.size, 1)
    return bool(np.all(prod[iu] <= np.sqrt(1 - epsilon) + tol))


@lru_cache(maxsize=64)
def log_bound_constant(epsilon: float, k1: float, k2: float, n: int) -> float:
    """``c1`` for the logarithmic bound: the infimum of ``(k1+k2) P(lambda) / sum lambda^2``
    over the admissible region, where ``P`` is the pair sum.

    Found by a dense search followed by constrained local refinement, then
    shrunk by ``1e-6`` relative to absorb the optimizer tolerance.
    """
    if not 0 < epsilon < 1:
        raise ConstraintError("epsilon must lie in (0, 1)")
    if k1 + k2 <= 0:
        raise ConstraintError("needs k1 + k2 > 0")
    if n < 2:
        raise ArityError("needs n >= 2")
    top = float(np.sqrt((1 - epsilon) / epsilon))
    pair_cap = float(np.sqrt(1 - epsilon))

    def ratio(lam2):
        s = lam2.sum(axis=-1)
        return (k1 + k2) * _pair_sum(lam2) / s

    # Dense search: a grid for small n, seeded random points otherwise.
    if n <= 3:
        axis = np.linspace(0.0, top, 61)
        pts = np.stack(np.meshgrid(*[axis] * n, indexing="ij"), -1).reshape(-1, n)
    else:
        rng = np.random.default_rng(12345)
        pts = rng.uniform(0, top, size=(200_000, n))
    prod = pts[:, :, None] * pts[:, None, :]
    iu = np.triu_indices(n, 1)
    ok = np.all(prod[:, iu[0], iu[1]] <= pair_cap, axis=-1) & (np.sum(pts**2, axis=-1) > 1e-12)
    pts = pts[ok]
    vals = ratio(pts**2)
    best = float(np.min(vals))
    cons = [{"type": "ineq", "fun": (lambda x, a=a, b=b: pair_cap - x[a] * x[b])} for a, b in zip(*iu)]
    for x0 in pts[np.argsort(vals)[:8]]:
        res = minimize(lambda x: float(ratio(np.asarray(x) ** 2 + 0.0)) if np.sum(np.asarray(x) ** 2) > 1e-12 else 1e300,
                       x0, method="SLSQP", bounds=[(0.0, top)] * n, constraints=cons,
                       options={"ftol": 1e-14, "maxiter": 200})
        x = np.clip(res.x, 0.0, top)
        if admissible(x, epsilon, 1e-12) and np.sum(x**2) > 1e-12:
            best = min(best, float(ratio(x**2)))
    return best * (1 - 1e-6)


def log_bound_64(lambdas, epsilon: float, k1: float, k2: float) -> tuple[float, float, float]:
    """``((k1+k2) P(lambda), c1 sum lambda^2, c1 ln prod(1 + lambda^2))``; descending when admissible."""
    lam = np.asarray(lambdas, dtype=float)
    if k1 + k2 <= 0:
        raise ConstraintError("needs k1 + k2 > 0")
    if not 0 < epsilon < 1:
        raise ConstraintError("epsilon must lie in (0, 1)")
    if not admissible(lam, epsilon):
        raise ConstraintError("lambda outside the admissible region")
    c1 = log_bound_constant(float(epsilon), float(k1), float(k2), lam.size)
    lam2 = lam**2
    return (float((k1 + k2) * _pair_sum(lam2)), float(c1 * lam2.sum()), float(c1 * np.sum(np.log1p(lam2))))


# --- samplers ------------------------------------------------------------------


def _sym_h(rng: np.random.Generator, m: int, n: int) -> np.ndarray:
    h = rng.standard_normal((m, n, n))
    return 0.5 * (h + np.swapaxes(h, 1, 2))


def _dims(rng, nmin=1, nmax=5, mmin=1, mmax=5):
    return int(rng.integers(nmin, nmax + 1)), int(rng.integers(mmin, mmax + 1))


def _rank_cut(lam: np.ndarray, m: int) -> np.ndarray:
    lam = lam.copy()
    lam[min(lam.size, m):] = 0.0
    return lam


def sample_general(rng: np.random.Generator, nmin: int = 1, nmax: int = 5, lam_max: float = 3.0,
                   kmax: float = 2.0) -> AlgebraSample:
    n, m = _dims(rng, nmin, nmax)
    lam = _rank_cut(np.sort(rng.uniform(0, lam_max, n))[::-1], m)
    k1, k2 = rng.uniform(-kmax, kmax, 2)
    return AlgebraSample(n, m, lam, _sym_h(rng, m, n), float(k1), float(k2))


def _curvatures_ordered(rng, kmax=2.0):
    k1 = float(rng.uniform(0, kmax))
    k2 = float(rng.uniform(-k1, k1))
    return k1, k2


def sample_lemma41(rng: np.random.Generator, epsilon: float | None = None) -> AlgebraSample:
    n, m = _dims(rng)
    eps = float(rng.uniform(0, 1)) if epsilon is None else float(epsilon)
    top = np.sqrt((1 - eps) / (1 + eps))
    lam = np.concatenate([[top], rng.uniform(0, top, n - 1)])
    lam = _rank_cut(lam, m)
    k1, k2 = _curvatures_ordered(rng)
    return AlgebraSample(n, m, lam, _sym_h(rng, m, n), k1, k2, epsilon=eps)


def sample_lemma53(rng: np.random.Generator) -> AlgebraSample:
    n, m = _dims(rng, nmin=2)
    l1 = float(rng.uniform(0, 3))
    cap = min(l1, 1.0 / l1) if l1 > 0 else 0.0
    l2 = float(rng.uniform(0, cap)) if m > 1 else 0.0
    rest = rng.uniform(0, l2, n - 2) if n > 2 else np.zeros(0)
    lam = _rank_cut(np.concatenate([[l1, l2], np.sort(rest)[::-1]]), m)
    k1, k2 = _curvatures_ordered(rng)
    sd = s_diagonal(lam)
    eps = 0.5 * (sd[0] + sd[1])
    h = impose_gradient_relation(lam, _sym_h(rng, m, n))
    return AlgebraSample(n, m, lam, h, k1, k2, epsilon=float(eps), eta=float(rng.uniform(0, 1)))


def sample_pair(rng: np.random.Generator) -> AlgebraSample:
    """Critical-point sample with ``l2^2 < l1^2``, ``l1 l2 < 1`` and ``m >= 2``."""
    n, m = _dims(rng, nmin=2, mmin=2)
    l1 = float(rng.uniform(0.05, 3))
    l2 = float(rng.uniform(0, min(l1, 1.0 / l1)))
    rest = rng.uniform(0, l2, n - 2)
    lam = _rank_cut(np.concatenate([[l1, l2], np.sort(rest)[::-1]]), m)
    h = impose_gradient_relation(lam, _sym_h(rng, m, n))
    return AlgebraSample(n, m, lam, h)


def sample_quadratic(rng: np.random.Generator) -> AlgebraSample:
    n, m = _dims(rng)
    eps = float(rng.uniform(1e-3, 1 - 1e-3))
    delta = delta_from_epsilon(eps)
    cap = 1 - delta
    while True:
        lam = _rank_cut(rng.uniform(0, 2.0, n), m)
        prod = lam[:, None] * lam[None, :]
        iu = np.triu_indices(n, 1)
        if n == 1 or np.max(prod[iu]) <= cap:
            break
    return AlgebraSample(n, m, lam, _sym_h(rng, m, n), epsilon=eps, delta=delta)


def sample_log_bound(rng: np.random.Generator, n: int | None = None, epsilon: float | None = None):
    """Admissible ``(lambdas, epsilon, k1, k2)`` for the logarithmic bound."""
    n = int(rng.integers(2, 4)) if n is None else n
    eps = float(rng.choice([0.25, 0.5, 0.75])) if epsilon is None else epsilon
    top = np.sqrt((1 - eps) / eps)
    while True:
        lam = rng.uniform(0, top, n)
        if admissible(lam, eps):
            break
    k1 = float(rng.choice([1.0, 2.0]))
    k2 = float(rng.choice([-0.5, 0.0, 1.0])) * k1
    return lam, eps, k1, k2


# --- verification suite --------------------------------------------------------


@dataclass
class CheckRow:
    name: str
    samples: int
    max_violation: float
    tolerance: float
    seconds: float = 0.0

    @property
    def passed(self) -> bool:
        return bool(np.isfinite(self.max_violation) and self.max_violation <= self.tolerance)


def relative_gap(a, b) -> np.ndarray:
    """``|a - b| / max(1, |a|, |b|)``: relative for large values, absolute near zero."""
    a, b = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
    return np.abs(a - b) / np.maximum(1.0, np.maximum(np.abs(a), np.abs(b)))


def _grouped_lambdas(rng, samples, nmin=1, nmax=5, lam_max=3.0):
    """Random ``(n, m)`` per draw, returned as batches keyed by shape."""
    ns = rng.integers(nmin, nmax + 1, samples)
    ms = rng.integers(1, nmax + 1, samples)
    out = []
    for n in range(nmin, nmax + 1):
        for m in range(1, nmax + 1):
            count = int(np.sum((ns == n) & (ms == m)))
            if count == 0:
                continue
            lam = np.sort(rng.uniform(0, lam_max, (count, n)), axis=-1)[:, ::-1].copy()
            lam[:, min(n, m):] = 0.0
            out.append((n, m, lam))
    return out


def _frames_batch(lam, m):
    n = lam.shape[-1]
    batch = lam.shape[:-1]
    sd = SingularData(lam, np.count_nonzero(lam, axis=-1), np.broadcast_to(np.eye(n), batch + (n, n)),
                      np.broadcast_to(np.eye(m), batch + (m, m)))
    return adapted_frames(sd).all()


def _s_direct(frames, n):
    """``S(X, Y) = <pi1 X, pi1 Y> - <pi2 X, pi2 Y>`` on frame columns."""
    p1, p2 = frames[..., :n, :], frames[..., n:, :]
    return np.swapaxes(p1, -1, -2) @ p1 - np.swapaxes(p2, -1, -2) @ p2


def check_star_omega(rng, samples):
    worst = 0.0
    for n, m, lam in _grouped_lambdas(rng, samples):
        fr = _frames_batch(lam, m)
        jac = np.linalg.det(fr[..., :n, :n])  # pi1 of the tangent frame in the a_i basis
        worst = max(worst, float(np.max(relative_gap(star_omega(lam), np.abs(jac)))))
    return worst


def check_s_diagonal(rng, samples):
    worst = 0.0
    for n, m, lam in _grouped_lambdas(rng, samples):
        direct = _s_direct(_frames_batch(lam, m), n)[..., :n, :n]
        diag = s_diagonal(lam)
        worst = max(worst, float(np.max(relative_gap(direct, np.eye(n) * diag[..., None, :]))))
        eig = np.linalg.eigvalsh(direct)
        worst = max(worst, float(np.max(relative_gap(eig, np.sort(diag, axis=-1)))))
    return worst


def check_s_blocks(rng, samples):
    worst = 0.0
    for n, m, lam in _grouped_lambdas(rng, samples):
        direct = _s_direct(_frames_batch(lam, m), n)
        worst = max(worst, float(np.max(relative_gap(direct, s_restriction(lam, m)[1]))))
    return worst


def check_identity_411(rng, samples):
    worst = 0.0
    for n, m, lam in _grouped_lambdas(rng, samples):
        k = rng.uniform(-2, 2, (lam.shape[0], 2))
        lam2 = lam**2
        for i in range(n):
            mask = np.arange(n) != i
            k1, k2 = k[:, 0], k[:, 1]
            lhs = (k1 + k2) * np.sum(1 / (1 + lam2[:, mask]), axis=-1) + k2 * (1 - n)
            rhs = (k1 - k2) * (n - 1) / 2 + (k1 + k2) * np.sum((1 - lam2[:, mask]) / (2 * (1 + lam2[:, mask])), axis=-1)
            worst = max(worst, float(np.max(relative_gap(lhs, rhs))))
    return worst


def check_pair_sum(rng, samples):
    worst = 0.0
    for n, m, lam in _grouped_lambdas(rng, samples, nmin=2):
        direct = _s_direct(_frames_batch(lam, m), n)[..., :n, :n]
        eig = np.linalg.eigvalsh(direct)
        worst = max(worst, float(np.max(relative_gap(eig[..., 0] + eig[..., 1], area_margin(lam)))))
    return worst


def check_identity_62(rng, samples):
    worst = 0.0
    for n, m, lam in _grouped_lambdas(rng, samples, nmin=2):
        lam2 = lam**2
        sk = (1 - lam2) / (2 * (1 + lam2))
        lhs = np.sum(lam2 / (1 + lam2) * (sk.sum(axis=-1, keepdims=True) - sk), axis=-1)
        worst = max(worst, float(np.max(relative_gap(lhs, _pair_sum(lam2)))))
    return worst


def check_p2_spectrum(rng, samples):
    worst = 0.0
    per = max(1, samples // 5)
    for n in range(2, 7):
        a = rng.standard_normal((per, n, n))
        p = 0.5 * (a + np.swapaxes(a, -1, -2))
        mu = np.linalg.eigvalsh(p)
        iu = np.triu_indices(n, 1)
        pairs = np.sort(mu[:, iu[0]] + mu[:, iu[1]], axis=-1)
        spec = np.linalg.eigvalsh(p2_matrix(p))
        worst = max(worst, float(np.max(relative_gap(spec, pairs))))
    return worst


def check_curvature_410(rng, samples):
    worst = 0.0
    for _ in range(samples):
        s = sample_general(rng)
        brute = curvature_contraction(s)
        closed = np.array([[curvature_term_410(s, i, j) for j in range(s.n)] for i in range(s.n)])
        worst = max(worst, float(np.max(relative_gap(brute, closed))))
    return worst


def _min_violation(values, floor=0.0):
    """Largest amount by which ``values`` fall below ``floor`` (0 if none)."""
    return max(0.0, float(floor - np.min(values)))


def check_lemma41(rng, samples):
    return _min_violation([lemma41_form(sample_lemma41(rng)) for _ in range(samples)])


def check_lemma53(rng, samples):
    vals = []
    for _ in range(samples):
        s = sample_lemma53(rng)
        vals.append(lemma53_rhs(s) - 2 * s.eta)
    return _min_violation(vals)


def check_sff_pair(rng, samples):
    worst = 0.0
    for _ in range(samples):
        lhs, rhs = sff_pair_inequality(sample_pair(rng))
        worst = max(worst, float(np.max(lhs - rhs)))
    return max(0.0, worst)


def check_quadratic(rng, samples):
    return _min_violation([quadratic_lower_bound(sample_quadratic(rng)) for _ in range(samples)])


def check_log_bound(rng, samples):
    worst = 0.0
    for _ in range(samples):
        lam, eps, k1, k2 = sample_log_bound(rng)
        a, b, c = log_bound_64(lam, eps, k1, k2)
        worst = max(worst, b - a, c - b)
    return max(0.0, worst)


CHECKS = [
    # name, function, samples scale (fraction of requested), tolerance
    ("star_omega_jacobian", check_star_omega, 1.0, 1e-10),
    ("s_diagonal_eigenvalues", check_s_diagonal, 1.0, 1e-10),
    ("s_block_form", check_s_blocks, 1.0, 1e-10),
    ("curvature_simplification", check_identity_411, 1.0, 1e-10),
    ("pair_sum_margin", check_pair_sum, 1.0, 1e-10),
    ("pair_sum_identity", check_identity_62, 1.0, 1e-10),
    ("wedge_square_spectrum", check_p2_spectrum, 1.0, 1e-9),
    ("curvature_contraction_brute_force", check_curvature_410, 0.1, 1e-10),
    ("distance_decreasing_form", check_lemma41, 1.0, 1e-12),
    ("area_decreasing_form", check_lemma53, 1.0, 1e-12),
    ("sff_pair_inequality", check_sff_pair, 0.1, 1e-12),
    ("quadratic_lower_bound", check_quadratic, 1.0, 1e-12),
    ("log_bound_chain", check_log_bound, 0.1, 1e-12),
]


def run_verification(samples: int = 10_000, seed: int = 0, names=None) -> list[CheckRow]:
    """Run the randomized checks; each check gets its own seeded generator."""
    rows = []
    for idx, (name, fn, frac, tol) in enumerate(CHECKS):
        if names is not None and name not in names:
            continue
        count = max(1, int(round(samples * frac)))
        rng = np.random.default_rng([seed, idx])
        start = time.perf_counter()
        worst = fn(rng, count)
        rows.append(CheckRow(name, count, worst, tol, time.perf_counter() - start))
    return rows


def format_report(rows: list[CheckRow]) -> str:
    width = max(len(r.name) for r in rows) if rows else 10
    lines = [f"{'identity':<{width}}  {'samples':>8}  {'max violation':>14}  result"]
    for r in rows:
        lines.append(f"{r.name:<{width}}  {r.samples:>8d}  {r.max_violation:>14.3e}  {'pass' if r.passed else 'FAIL'}")
    return "\n".join(lines)
