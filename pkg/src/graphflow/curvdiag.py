"""Extrinsic curvature of the evolving graph and residual diagnostics.

The second fundamental form is computed as the normal part of the ambient
covariant derivative of the coordinate tangent fields, ``nabla_{d_i} dF(d_j)``,
where ``dF(d_j)`` is the grid field of centered first differences and its
derivative is again a centered difference.  This is a different stencil from
the compact second differences used by the flow right-hand side, so
:func:`normal_defect` compares two independent discretizations instead of
restating one of them.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np

from graphflow.equation import (
    geometry_fields,
    rhs_from_geometry,
    tangential_coordinates,
)
from graphflow.frames import (
    SingularData,
    adapted_frames,
    area_margin,
    s_diagonal,
    singular_frames,
    singular_values,
    star_omega,
)
from graphflow.spaceform import christoffel_at, metric_at
from graphflow.gridcalc import (
    MapState,
    gradient_field,
    laplace_beltrami,
    latitude_parity,
)


@dataclass
class SFF:
    """``h[..., p, i, j] = <nabla_{e_i} e_j, e_{n+p}>`` in the adapted frames."""

    h: np.ndarray
    frames: SingularData | None = None

    def __getitem__(self, node):
        return SFF(self.h[node], None if self.frames is None else self.frames[node])


def sff_from_derivatives(x, f, df, d2f, domain, target, sd: SingularData | None = None) -> SFF:
    """Second fundamental form from first and second coordinate derivatives.

    Works pointwise or batched; ``d2f[..., a, i, j]`` should be symmetric.
    """
    df = np.asarray(df, dtype=float)
    d2f = np.asarray(d2f, dtype=float)
    g = metric_at(domain, x)
    h = metric_at(target, f)
    if sd is None:
        sd = singular_frames(df, g, h)
    n = df.shape[-1]
    gam_dom = christoffel_at(domain, x)
    gam_tar = christoffel_at(target, f)
    dom_part = gam_dom  # [..., l, i, j]
    tar_part = d2f + np.einsum("...abc,...bi,...cj->...aij", gam_tar, df, df)
    frames = adapted_frames(sd)
    nor_dom = frames.normal[..., :n, :]  # [..., l, p]
    nor_tar = frames.normal[..., n:, :]  # [..., a, p]
    normal_comp = np.einsum("...lij,...lk,...kp->...pij", dom_part, g, nor_dom) + np.einsum(
        "...aij,...ab,...bp->...pij", tar_part, h, nor_tar
    )
    v = sd.a_domain / np.sqrt(1.0 + sd.lambdas**2)[..., None, :]  # pi1(e_i) columns
    hh = np.einsum("...pkl,...ki,...lj->...pij", normal_comp, v, v)
    return SFF(0.5 * (hh + np.swapaxes(hh, -1, -2)), sd)


def tangent_hessian_field(state: MapState, df=None) -> np.ndarray:
    """Centered derivative of the centered tangent field: ``D_j (D_i f)``."""
    if df is None:
        df = gradient_field(state.values, state.grid, state.winding)
    par = latitude_parity(state.grid, 1)
    d2 = gradient_field(df, state.grid, parity=par)  # [..., a, i, j] = D_j D_i f^a
    return 0.5 * (d2 + np.swapaxes(d2, -1, -2))


def second_fundamental_form(state: MapState, node=None, geo=None) -> SFF:
    if geo is None:
        geo = geometry_fields(state)
    d2 = tangent_hessian_field(state, geo["df"])
    sd = singular_frames(geo["df"], geo["g"], geo["h"])
    sff = sff_from_derivatives(geo["x"], state.values, geo["df"], d2, state.domain, state.target, sd)
    return sff if node is None else sff[tuple(node)]


def mean_curvature(sff: SFF | np.ndarray) -> np.ndarray:
    h = sff.h if isinstance(sff, SFF) else np.asarray(sff)
    return np.trace(h, axis1=-2, axis2=-1)


def norm_A_squared(sff: SFF | np.ndarray) -> np.ndarray:
    h = sff.h if isinstance(sff, SFF) else np.asarray(sff)
    return np.sum(h**2, axis=(-3, -2, -1))


def _pad_h(h, n):
    """Normal index padded to ``n`` with zeros (entries beyond the target dimension)."""
    m = h.shape[-3]
    if m >= n:
        return h[..., :n, :, :]
    pad = np.zeros(h.shape[:-3] + (n - m,) + h.shape[-2:])
    return np.concatenate([h, pad], axis=-3)


def quadratic_terms(h, lambdas) -> np.ndarray:
    """The second-fundamental-form terms of the ln *Omega evolution:

    ``sum h_aik^2 + sum_{k,i} l_i^2 h_{n+i,ik}^2 + 2 sum_{k,i<j} l_i l_j h_{n+j,ik} h_{n+i,jk}``.
    """
    h = np.asarray(h, dtype=float)
    lam = np.asarray(lambdas, dtype=float)
    n = lam.shape[-1]
    hp = _pad_h(h, n)  # [..., i(normal), j, k]
    ii = np.arange(n)
    diag = hp[..., ii, ii, :]  # h_{n+i, i, k}
    total = np.sum(h**2, axis=(-3, -2, -1))
    total = total + np.sum(lam[..., :, None] ** 2 * diag**2, axis=(-2, -1))
    # cross[i, j, k] = h_{n+j, i, k} * h_{n+i, j, k}
    cross = np.einsum("...jik,...ijk->...ijk", hp, hp)
    weight = np.triu(np.ones((n, n)), 1)
    total = total + 2 * np.einsum("...i,...j,ij,...ijk->...", lam, lam, weight, cross)
    return total


def curvature_term_34(lambdas, k1: float, k2: float, n: int | None = None) -> np.ndarray:
    """``sum_i l_i^2/(1+l_i^2) [ (k1+k2) sum_{j!=i} 1/(1+l_j^2) + k2 (1-n) ]``."""
    lam2 = np.asarray(lambdas, dtype=float) ** 2
    if n is None:
        n = lam2.shape[-1]
    inv = 1.0 / (1.0 + lam2)
    others = np.sum(inv, axis=-1, keepdims=True) - inv
    return np.sum(lam2 * inv * ((k1 + k2) * others + k2 * (1 - n)), axis=-1)


def log_star_omega_field(geo) -> np.ndarray:
    """``ln *Omega = (ln det g - ln det Lam) / 2`` (smooth, frame free)."""
    _, ldg = np.linalg.slogdet(geo["g"])
    _, ldl = np.linalg.slogdet(geo["lam"])
    return 0.5 * (ldg - ldl)


def grad_log_omega_check(state: MapState, node=None):
    """Finite-difference gradient of ``ln *Omega`` and the frame formula
    ``-sum_i l_i h_{n+i,ik}``, both as components along ``e_k``."""
    geo = geometry_fields(state)
    logo = log_star_omega_field(geo)
    grad = gradient_field(logo, state.grid)
    sff = second_fundamental_form(state, geo=geo)
    sd = sff.frames
    v = sd.a_domain / np.sqrt(1.0 + sd.lambdas**2)[..., None, :]
    fd = np.einsum("...l,...lk->...k", grad, v)
    n = state.n
    hp = _pad_h(sff.h, n)
    ii = np.arange(n)
    formula = -np.einsum("...i,...ik->...k", sd.lambdas, hp[..., ii, ii, :])
    if node is None:
        return fd, formula
    node = tuple(node)
    return fd[node], formula[node]


def normal_defect(state: MapState, node=None, geo=None, rhs=None):
    """Norm of the normal part of ``dF/dt - H`` with ``dF/dt = (0, df/dt)``."""
    if geo is None:
        geo = geometry_fields(state)
    if rhs is None:
        rhs = rhs_from_geometry(geo)
    sff = second_fundamental_form(state, geo=geo)
    frames = adapted_frames(sff.frames)
    n = state.n
    vel_normal = np.einsum("...a,...ab,...bp->...p", rhs, geo["h"], frames.normal[..., n:, :])
    out = np.linalg.norm(vel_normal - mean_curvature(sff), axis=-1)
    return out if node is None else out[tuple(node)]


def residual_34(state0: MapState, state1: MapState) -> np.ndarray:
    """Pointwise residual of the ln *Omega evolution between two consecutive states.

    ``[ln *Omega(t1) - ln *Omega(t0)]/dt - Delta ln *Omega - Q(h) - C(lambda) - <V_tan, grad ln *Omega>``
    with every spatial term evaluated at ``t0``.  The last term converts the
    normal-flow derivative into the fixed-coordinate derivative of the graph
    parametrization.
    """
    dt = state1.time - state0.time
    if dt <= 0:
        raise ValueError("states must be consecutive in time")
    geo0 = geometry_fields(state0)
    geo1 = geometry_fields(state1)
    l0 = log_star_omega_field(geo0)
    l1 = log_star_omega_field(geo1)
    lap = laplace_beltrami(l0, state0)
    sff = second_fundamental_form(state0, geo=geo0)
    lam = sff.frames.lambdas
    quad = quadratic_terms(sff.h, lam)
    curv = curvature_term_34(lam, state0.domain.curvature, state0.target.curvature, state0.n)
    w = tangential_coordinates(geo0, rhs_from_geometry(geo0))
    adv = np.einsum("...k,...k->...", w, gradient_field(l0, state0.grid))
    return (l1 - l0) / dt - lap - quad - curv - adv


# --- per-step diagnostics ------------------------------------------------------

CSV_COLUMNS = [
    "step",
    "t",
    "dt",
    "min_star_omega",
    "max_lambda",
    "min_area_margin",
    "min_S_diag",
    "max_A_sq",
    "max_H_norm",
    "max_normal_defect",
    "max_residual_34",
]


@dataclass
class DiagnosticsRecord:
    step: int
    t: float
    dt: float
    min_star_omega: float
    max_lambda: float
    min_area_margin: float
    min_S_diag: float
    max_A_sq: float
    max_H_norm: float
    max_normal_defect: float
    max_residual_34: float = float("nan")
    flags: dict = field(default_factory=dict)

    def row(self) -> list[str]:
        vals = asdict(self)
        out = []
        for col in CSV_COLUMNS:
            v = vals[col]
            out.append(str(v) if col == "step" else repr(float(v)))
        return out


def monitor_values(lambdas) -> tuple[float, float, float, float]:
    """(min *Omega, max lambda, min area margin, min S-diagonal) over all nodes."""
    lam = np.asarray(lambdas)
    margin = float(np.min(area_margin(lam))) if lam.shape[-1] >= 2 else float("nan")
    return (
        float(np.min(star_omega(lam))),
        float(np.max(lam)),
        margin,
        float(np.min(s_diagonal(lam))),
    )


def compute_diagnostics(state: MapState, step: int, dt: float, prev: MapState | None = None,
                        with_residual: bool = False) -> DiagnosticsRecord:
    geo = geometry_fields(state)
    lam = singular_values(geo["df"], geo["g"], geo["h"])
    so, ml, am, sd = monitor_values(lam)
    rhs = rhs_from_geometry(geo)
    sff = second_fundamental_form(state, geo=geo)
    defect = normal_defect(state, geo=geo, rhs=rhs)
    res = float("nan")
    if with_residual and prev is not None and state.time > prev.time:
        res = float(np.max(np.abs(residual_34(prev, state))))
    return DiagnosticsRecord(
        step=step,
        t=state.time,
        dt=dt,
        min_star_omega=so,
        max_lambda=ml,
        min_area_margin=am,
        min_S_diag=sd,
        max_A_sq=float(np.max(norm_A_squared(sff))),
        max_H_norm=float(np.max(np.linalg.norm(mean_curvature(sff), axis=-1))),
        max_normal_defect=float(np.max(defect)),
        max_residual_34=res,
    )
