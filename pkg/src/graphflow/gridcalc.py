"""Grid-sampled maps and their finite-difference calculus.

Fields are numpy arrays whose leading axes are the grid axes; trailing axes
carry components.  All stencils are second-order centered.  Periodic axes
wrap (adding the map's winding where the target is a covering space), and the
latitude axis of a sphere grid is padded with ghost rows copied across the
pole with a longitude shift of pi.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from graphflow import smallmat
from graphflow.errors import DegenerateMetric
from graphflow.spaceform import SpaceForm, check_chart, christoffel_at, metric_at

DEGENERATE_TOL = 1e-14


@dataclass(frozen=True)
class GridSpec:
    shape: tuple[int, ...]
    spacing: tuple[float, ...]
    offset: tuple[float, ...]
    periodic: tuple[bool, ...]
    # Axis holding sphere latitude; its ghosts come from across the pole and
    # ``pole_partner`` is the longitude axis rolled by half a turn.
    pole_axis: int | None = None
    pole_partner: int | None = None

    @property
    def ndim(self) -> int:
        return len(self.shape)

    @property
    def size(self) -> int:
        return int(np.prod(self.shape))

    def axes(self) -> list[np.ndarray]:
        return [o + h * np.arange(n) for n, h, o in zip(self.shape, self.spacing, self.offset)]

    def coords(self) -> np.ndarray:
        """Chart coordinates of every node, shape ``(*shape, ndim)``."""
        mesh = np.meshgrid(*self.axes(), indexing="ij")
        return np.stack(mesh, axis=-1)


def grid_for(space: SpaceForm, resolution) -> GridSpec:
    """Standard grid over a domain space form.

    Torus axes are periodic with ``spacing * resolution == period``.  Sphere
    grids are ``(n_theta, n_phi)`` with latitude nodes offset by half a
    spacing so that no node lies on a pole; ``n_phi`` must be even.
    """
    res = tuple(int(r) for r in np.atleast_1d(resolution))
    if len(res) == 1:
        res = res * space.dim
    if len(res) != space.dim or min(res) < 3:
        raise ValueError(f"bad resolution {resolution!r} for a {space.dim}-dimensional domain")
    if space.is_sphere:
        nt, nph = res
        if nph % 2:
            raise ValueError("longitude resolution must be even for pole ghosts")
        dt, dp = np.pi / nt, 2 * np.pi / nph
        return GridSpec((nt, nph), (dt, dp), (dt / 2, 0.0), (False, True), 0, 1)
    periods = space.chart.periods
    return GridSpec(
        res,
        tuple(p / n for p, n in zip(periods, res)),
        tuple(0.0 for _ in res),
        tuple(True for _ in res),
    )


@dataclass
class MapState:
    """A map ``f: domain -> target`` sampled on ``grid`` at time ``time``.

    ``values[node]`` are the target chart coordinates of ``f`` at the node.
    ``winding[i]`` is the jump of the lifted values across one period of
    domain axis ``i`` (zero unless the target is a torus or the map winds
    around a chart longitude).
    """

    domain: SpaceForm
    target: SpaceForm
    grid: GridSpec
    values: np.ndarray
    time: float = 0.0
    winding: np.ndarray = field(default=None)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        n, m = self.domain.dim, self.target.dim
        if self.values.shape != self.grid.shape + (m,):
            raise ValueError(f"values shape {self.values.shape} != {self.grid.shape + (m,)}")
        if self.winding is None:
            self.winding = np.zeros((n, m))
        self.winding = np.asarray(self.winding, dtype=float).reshape(n, m)

    @property
    def n(self) -> int:
        return self.domain.dim

    @property
    def m(self) -> int:
        return self.target.dim

    def coords(self) -> np.ndarray:
        return self.grid.coords()

    def with_values(self, values, time=None) -> "MapState":
        return replace(self, values=np.array(values, dtype=float),
                       time=self.time if time is None else float(time))

    def is_finite(self) -> bool:
        return bool(np.all(np.isfinite(self.values)))


@dataclass(frozen=True)
class PointJet:
    x: np.ndarray
    f: np.ndarray
    df: np.ndarray  # (m, n): d f^alpha / d x^i
    d2f: np.ndarray  # (m, n, n)


# --- ghost padding -------------------------------------------------------------


def _roll_half(u: np.ndarray, axis: int, jump) -> np.ndarray:
    """Roll ``u`` by half a period along ``axis`` adding ``jump`` to wrapped entries."""
    n = u.shape[axis]
    idx = (np.arange(n) + n // 2) % n
    out = np.take(u, idx, axis=axis)
    if jump is not None:
        wrapped = (np.arange(n) + n // 2) >= n
        sel = [slice(None)] * u.ndim
        sel[axis] = wrapped
        out[tuple(sel)] = out[tuple(sel)] + jump
    return out


def pad(u, grid: GridSpec, width: int = 1, winding=None, parity=None) -> np.ndarray:
    """Pad the grid axes of ``u`` with ``width`` ghost layers.

    ``winding`` (shape ``(ndim, ncomp)``) is added across periodic seams and is
    only meaningful for lifted map values.  ``parity`` multiplies the pole
    ghosts component-wise (broadcast over trailing axes); use -1 for
    components that carry an odd number of latitude indices.
    """
    u = np.asarray(u, dtype=float)
    d = grid.ndim
    extra = u.ndim - d
    if grid.pole_axis is not None:
        a, b = grid.pole_axis, grid.pole_partner
        jump = None if winding is None else np.asarray(winding)[b]
        flipped = _roll_half(u, b, jump)
        if parity is not None:
            flipped = flipped * parity
        n = u.shape[a]
        top = np.take(flipped, np.arange(width - 1, -1, -1), axis=a)
        bottom = np.take(flipped, np.arange(n - 1, n - 1 - width, -1), axis=a)
        u = np.concatenate([top, u, bottom], axis=a)
    for ax in range(d):
        if not grid.periodic[ax]:
            continue
        n = u.shape[ax]
        lo = np.take(u, np.arange(n - width, n), axis=ax)
        hi = np.take(u, np.arange(width), axis=ax)
        if winding is not None and extra:
            w = np.asarray(winding)[ax]
            lo, hi = lo - w, hi + w
        u = np.concatenate([lo, u, hi], axis=ax)
    return u


def _shifted(up: np.ndarray, grid: GridSpec, shifts, width: int) -> np.ndarray:
    sl = []
    for ax, n in enumerate(grid.shape):
        s = shifts.get(ax, 0)
        sl.append(slice(width + s, width + s + n))
    return up[tuple(sl)]


def gradient_field(u, grid: GridSpec, winding=None, parity=None) -> np.ndarray:
    """Centered first derivatives; the new derivative axis is appended last."""
    up = pad(u, grid, 1, winding, parity)
    parts = []
    for ax, h in enumerate(grid.spacing):
        parts.append((_shifted(up, grid, {ax: 1}, 1) - _shifted(up, grid, {ax: -1}, 1)) / (2 * h))
    return np.stack(parts, axis=-1)


def hessian_field(u, grid: GridSpec, winding=None, parity=None) -> np.ndarray:
    """Compact centered second derivatives, two new trailing axes (symmetric)."""
    up = pad(u, grid, 1, winding, parity)
    d = grid.ndim
    center = _shifted(up, grid, {}, 1)
    out = np.empty(center.shape + (d, d))
    for i in range(d):
        hi = grid.spacing[i]
        out[..., i, i] = (
            _shifted(up, grid, {i: 1}, 1) - 2 * center + _shifted(up, grid, {i: -1}, 1)
        ) / hi**2
        for j in range(i + 1, d):
            hj = grid.spacing[j]
            mixed = (
                _shifted(up, grid, {i: 1, j: 1}, 1)
                - _shifted(up, grid, {i: 1, j: -1}, 1)
                - _shifted(up, grid, {i: -1, j: 1}, 1)
                + _shifted(up, grid, {i: -1, j: -1}, 1)
            ) / (4 * hi * hj)
            out[..., i, j] = mixed
            out[..., j, i] = mixed
    return out


def latitude_parity(grid: GridSpec, nindex: int) -> np.ndarray | None:
    """Parity array for a field with ``nindex`` trailing domain-tangent axes."""
    if grid.pole_axis is None:
        return None
    sign = np.ones(grid.ndim)
    sign[grid.pole_axis] = -1.0
    par = np.ones((grid.ndim,) * nindex)
    for k in range(nindex):
        shape = [1] * nindex
        shape[k] = grid.ndim
        par = par * sign.reshape(shape)
    return par


def jets_field(state: MapState) -> tuple[np.ndarray, np.ndarray]:
    """First and second derivatives of the map at every node.

    Returns ``df`` of shape ``(*grid, m, n)`` and ``d2f`` of shape
    ``(*grid, m, n, n)``.
    """
    v = state.values
    df = gradient_field(v, state.grid, state.winding)
    d2f = hessian_field(v, state.grid, state.winding)
    return df, d2f


def jet_at(state: MapState, node) -> PointJet:
    df, d2f = jets_field(state)
    node = tuple(node)
    x = state.coords()[node]
    d2 = d2f[node]
    return PointJet(x, state.values[node].copy(), df[node].copy(), 0.5 * (d2 + np.swapaxes(d2, -1, -2)))


# --- induced geometry ----------------------------------------------------------


def induced_metric(df, g, h) -> np.ndarray:
    """``g_ij + h_ab df^a_i df^b_j``; batched over leading axes."""
    df = np.asarray(df, dtype=float)
    lam = np.asarray(g, dtype=float) + smallmat.sandwich(df, np.asarray(h, dtype=float), df)
    lam = 0.5 * (lam + np.swapaxes(lam, -1, -2))
    eig = smallmat.eigvalsh(lam)
    if not np.all(np.isfinite(eig)) or np.any(eig[..., 0] <= DEGENERATE_TOL):
        raise DegenerateMetric(f"induced metric smallest eigenvalue {np.nanmin(eig[..., 0]):.3e}")
    return lam


def induced_metric_field(state: MapState, df=None) -> np.ndarray:
    if df is None:
        df, _ = jets_field(state)
    x = state.coords()
    return induced_metric(df, metric_at(state.domain, x), metric_at(state.target, state.values))


def induced_christoffel_field(lam: np.ndarray, grid: GridSpec) -> np.ndarray:
    """Christoffel symbols of the induced metric from centered differences of it.

    Indexed ``[..., k, i, j]``.
    """
    dlam = gradient_field(lam, grid, parity=latitude_parity(grid, 2))  # [..., i, j, l] = d_l lam_ij
    # first kind: G_lij = (d_i lam_jl + d_j lam_il - d_l lam_ij) / 2
    first = 0.5 * (
        np.einsum("...jli->...lij", dlam)
        + np.einsum("...ilj->...lij", dlam)
        - np.einsum("...ijl->...lij", dlam)
    )
    return np.einsum("...kl,...lij->...kij", smallmat.inv(lam), first)


def laplace_beltrami(u, state: MapState, node=None):
    """Laplace-Beltrami operator of the induced metric applied to a scalar field.

    Returns the whole field, or its value at ``node`` when one is given.
    """
    u = np.asarray(u, dtype=float)
    lam = induced_metric_field(state)
    gam = induced_christoffel_field(lam, state.grid)
    du = gradient_field(u, state.grid)
    d2u = hessian_field(u, state.grid)
    inv = smallmat.inv(lam)
    out = np.einsum("...ij,...ij->...", inv, d2u - np.einsum("...kij,...k->...ij", gam, du))
    return out if node is None else out[tuple(node)]


# --- snapshots -----------------------------------------------------------------


def snapshot_header(n: int, m: int) -> list[str]:
    return [f"i{k}" for k in range(1, n + 1)] + [f"x{k}" for k in range(1, n + 1)] + [
        f"f{k}" for k in range(1, m + 1)
    ]


def write_snapshot(state: MapState, path) -> None:
    """One row per node in row-major order; 17 significant digits."""
    n, m = state.n, state.m
    idx = np.indices(state.grid.shape).reshape(n, -1).T
    x = state.coords().reshape(-1, n)
    f = state.values.reshape(-1, m)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(snapshot_header(n, m))
        for i, xi, fi in zip(idx, x, f):
            w.writerow([str(int(v)) for v in i] + [f"{float(v):.17g}" for v in xi] + [f"{float(v):.17g}" for v in fi])


def read_snapshot_values(path, grid: GridSpec, m: int) -> np.ndarray:
    """Read a snapshot written by :func:`write_snapshot` back into a values array."""
    n = grid.ndim
    with open(Path(path), newline="") as fh:
        rows = list(csv.reader(fh))
    if rows[0] != snapshot_header(n, m):
        raise ValueError(f"unexpected snapshot header {rows[0]}")
    values = np.empty(grid.shape + (m,))
    for row in rows[1:]:
        idx = tuple(int(v) for v in row[:n])
        values[idx] = [float(v) for v in row[2 * n:]]
    return values
