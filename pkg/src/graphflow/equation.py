"""Right-hand side of the graph mean curvature flow and its time-step bound.

In graph coordinates the flow reads

    df^a/dt = Lam^ij ( d_ij f^a + Gam^a_bc(f) d_i f^b d_j f^c - Gam^k_ij(x) d_k f^a )

with ``Lam^ij`` the inverse of the induced metric ``g_ij + h_ab d_i f^a d_j f^b``.
The domain Christoffel term enters with a minus sign: that is what the
normal-part condition ``b^a - a^i d_i f^a = 0`` gives when the ambient vector
carries ``a^l = -Lam^ij Gam^l_ij``, and it reduces to the heat equation
``df/dt = Delta_g f`` in the small-gradient limit.
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np

from graphflow import smallmat
from graphflow.errors import DegenerateMetric
from graphflow.frames import singular_frames
from graphflow.gridcalc import (
    GridSpec,
    MapState,
    induced_metric,
    jets_field,
)
from graphflow.spaceform import christoffel_at, metric_at


def geometry_fields(state: MapState, df=None, d2f=None):
    """Jets, metrics and Christoffels at every node, bundled as a dict."""
    if df is None or d2f is None:
        df, d2f = jets_field(state)
    x = state.coords()
    g = metric_at(state.domain, x)
    h = metric_at(state.target, state.values)
    return {
        "x": x,
        "df": df,
        "d2f": d2f,
        "g": g,
        "h": h,
        "gam_dom": christoffel_at(state.domain, x),
        "gam_tar": christoffel_at(state.target, state.values),
        "lam": induced_metric(df, g, h),
    }


def rhs_from_geometry(geo) -> np.ndarray:
    df, d2f = geo["df"], geo["d2f"]
    inv = smallmat.inv(geo["lam"])
    # Contract with Lam^ij first so the Christoffel terms act on small tensors.
    hess = smallmat.contract2(inv[..., None, :, :], d2f)
    tt = smallmat.sandwich(np.swapaxes(df, -1, -2), inv, np.swapaxes(df, -1, -2))  # f^b_i Lam^ij f^c_j
    target_term = smallmat.contract2(geo["gam_tar"], tt[..., None, :, :])
    dom_vec = smallmat.contract2(geo["gam_dom"], inv[..., None, :, :])  # Lam^ij Gam^k_ij
    domain_term = smallmat.matvec(df, dom_vec)
    return hess + target_term - domain_term


def mcf_rhs(state: MapState, node=None, *, pole_filter: bool = False):
    """``df/dt`` at every node (shape ``(*grid, m)``), or at ``node`` only."""
    out = rhs_from_geometry(geometry_fields(state))
    if pole_filter:
        out = apply_pole_filter(out, state.grid)
    return out if node is None else out[tuple(node)]


# --- polar filter ----------------------------------------------------------------


@lru_cache(maxsize=32)
def _filter_scales(grid: GridSpec) -> tuple[np.ndarray, np.ndarray]:
    """Per-row effective longitude stencil scale and per-wavenumber damping."""
    a, b = grid.pole_axis, grid.pole_partner
    dth, dph = grid.spacing[a], grid.spacing[b]
    theta = grid.axes()[a]
    scale = np.maximum(dph, dth / np.sin(theta))
    k = np.arange(grid.shape[b] // 2 + 1)
    with np.errstate(divide="ignore"):
        damp = (dph / scale[:, None]) ** 2 / np.sin(k[None, :] * dph / 2) ** 2
    damp = np.minimum(1.0, np.nan_to_num(damp, posinf=1.0))
    return scale, damp


def longitude_scale(grid: GridSpec, filtered: bool) -> np.ndarray:
    """Flat stencil scale of the longitude axis per latitude row."""
    if grid.pole_axis is None or not filtered:
        return np.full(grid.shape[0], grid.spacing[grid.pole_partner or 0])
    return _filter_scales(grid)[0]


def apply_pole_filter(field: np.ndarray, grid: GridSpec) -> np.ndarray:
    """Damp high longitude wavenumbers of a tendency near the poles.

    Mode ``k`` on a latitude row is scaled so that its centered-difference
    eigenvalue does not exceed that of the latitude stencil.  The damping is
    strictly positive, so fixed points of the flow are unchanged.
    """
    if grid.pole_axis is None:
        return field
    _, damp = _filter_scales(grid)
    rows = np.flatnonzero(np.any(damp < 1.0, axis=1))
    if rows.size == 0:
        return field
    out = field.copy()
    spec = np.fft.rfft(field[rows], axis=1)
    spec *= damp[rows][:, :, None] if field.ndim == 3 else damp[rows]
    out[rows] = np.fft.irfft(spec, n=grid.shape[1], axis=1)
    return out


# --- time step bound -------------------------------------------------------------


def cfl_dt(state: MapState, c: float, *, pole_filter: bool = False, lam=None) -> float:
    """Explicit time step ``c * min_nodes 1 / (n * mu_max)``.

    ``mu_max`` is the largest eigenvalue of ``Lam^ij / (s_i s_j)`` where ``s_i``
    is the flat stencil scale of axis ``i`` (the grid spacing, widened on
    filtered polar rows).  For a flat torus with spacing ``h`` and a constant
    map this is ``c h^2 / n``.
    """
    if not 0 < c < 1:
        raise ValueError("CFL constant must lie in (0, 1)")
    grid = state.grid
    if lam is None:
        lam = geometry_fields(state)["lam"]
    inv = smallmat.inv(lam)
    scale = np.broadcast_to(np.array(grid.spacing, dtype=float), grid.shape + (grid.ndim,)).copy()
    if grid.pole_axis is not None:
        scale[..., grid.pole_partner] = longitude_scale(grid, pole_filter)[:, None]
    scaled = inv / (scale[..., :, None] * scale[..., None, :])
    mu = smallmat.eigvalsh(scaled)[..., -1]
    if not np.all(np.isfinite(mu)) or np.any(mu <= 0):
        raise DegenerateMetric("non-positive diffusion scale in CFL bound")
    return float(c / (state.n * np.max(mu)))


# --- tangential part of the graph velocity --------------------------------------


def tangential_coordinates(geo, rhs) -> np.ndarray:
    """Domain vector ``w`` with ``(dF/dt)^T = dF(w)``; shape ``(..., n)``."""
    rhs_dot = (np.swapaxes(geo["df"], -1, -2) @ (geo["h"] @ rhs[..., None]))[..., 0]
    return (smallmat.inv(geo["lam"]) @ rhs_dot[..., None])[..., 0]


def tangential_velocity(state: MapState, node=None):
    """Components of ``(0, df/dt)`` along the adapted tangent frame ``e_i``."""
    geo = geometry_fields(state)
    rhs = rhs_from_geometry(geo)
    sd = singular_frames(geo["df"], geo["g"], geo["h"])
    n, m = state.n, state.m
    k = min(n, m)
    along = np.einsum("...b,...bc,...cp->...p", rhs, geo["h"], sd.a_target)
    out = np.zeros(rhs.shape[:-1] + (n,))
    lam = sd.lambdas[..., :k]
    out[..., :k] = lam * along[..., :k] / np.sqrt(1.0 + lam**2)
    return out if node is None else out[tuple(node)]
