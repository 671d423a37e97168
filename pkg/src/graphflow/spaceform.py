"""Constant-curvature model spaces and their chart geometry.

Two charts are supported: the flat torus ``R^n / (periods)`` and the round
2-sphere in latitude/longitude coordinates ``(theta, phi)``.  All evaluators
are vectorized over leading axes, so ``x`` may be a single chart point of
shape ``(dim,)`` or a whole grid of points of shape ``(..., dim)``.

Curvature convention: for a space of constant curvature ``k``

    R(A, B, C, D) = k * (<A, C><B, D> - <A, D><B, C>)

so that ``R(A, B, B, C) = k * (<A, B><B, C> - <A, C><B, B>)`` and the
sectional curvature of an orthonormal pair is ``R(A, B, A, B) = k``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from graphflow.errors import PoleSingularity

POLE_TOL = 1e-12


@dataclass(frozen=True)
class FlatTorus:
    periods: tuple[float, ...]


@dataclass(frozen=True)
class RoundSphere:
    radius: float = 1.0
    # Rows of the rotation taking ambient (world) coordinates to the frame in
    # which the lat-long chart is taken.  Identity means the usual chart.
    rotation: tuple[tuple[float, ...], ...] = (
        (1.0, 0.0, 0.0),
        (0.0, 1.0, 0.0),
        (0.0, 0.0, 1.0),
    )


@dataclass(frozen=True)
class SpaceForm:
    dim: int
    chart: FlatTorus | RoundSphere = field(repr=True)

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError("dim must be positive")
        if isinstance(self.chart, FlatTorus):
            if len(self.chart.periods) != self.dim:
                raise ValueError("one period per torus axis is required")
            if any(p <= 0 for p in self.chart.periods):
                raise ValueError("torus periods must be positive")
        elif isinstance(self.chart, RoundSphere):
            if self.dim != 2:
                raise ValueError("only the 2-sphere lat-long chart is supported")
            if self.chart.radius <= 0:
                raise ValueError("sphere radius must be positive")
        else:
            raise TypeError(f"unknown chart {self.chart!r}")

    @classmethod
    def torus(cls, periods) -> "SpaceForm":
        periods = tuple(float(p) for p in np.atleast_1d(periods))
        return cls(len(periods), FlatTorus(periods))

    @classmethod
    def sphere(cls, radius: float = 1.0, rotation=None) -> "SpaceForm":
        if rotation is None:
            return cls(2, RoundSphere(float(radius)))
        rot = tuple(tuple(float(v) for v in row) for row in np.asarray(rotation))
        return cls(2, RoundSphere(float(radius), rot))

    @property
    def is_sphere(self) -> bool:
        return isinstance(self.chart, RoundSphere)

    @property
    def curvature(self) -> float:
        if self.is_sphere:
            return 1.0 / self.chart.radius**2
        return 0.0

    @property
    def rotation(self) -> np.ndarray:
        if not self.is_sphere:
            raise TypeError("only sphere charts carry a rotation")
        return np.array(self.chart.rotation, dtype=float)

    def with_rotation(self, rotation) -> "SpaceForm":
        return SpaceForm.sphere(self.chart.radius, rotation)


def check_chart(space: SpaceForm, x) -> np.ndarray:
    """Return ``x`` as a float array after rejecting points on the pole set."""
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != space.dim:
        raise ValueError(f"expected {space.dim} chart coordinates, got shape {x.shape}")
    if space.is_sphere:
        theta = x[..., 0]
        bad = (theta <= POLE_TOL) | (theta >= np.pi - POLE_TOL) | ~np.isfinite(theta)
        if np.any(bad):
            raise PoleSingularity(
                f"latitude outside (0, pi): {theta[bad].ravel()[:3].tolist()}"
            )
    return x


def metric_at(space: SpaceForm, x) -> np.ndarray:
    """Metric coefficients ``g_ij(x)``, shape ``(..., dim, dim)``."""
    x = check_chart(space, x)
    out = np.zeros(x.shape + (space.dim,))
    if space.is_sphere:
        r2 = space.chart.radius**2
        out[..., 0, 0] = r2
        out[..., 1, 1] = r2 * np.sin(x[..., 0]) ** 2
    else:
        idx = np.arange(space.dim)
        out[..., idx, idx] = 1.0
    return out


def christoffel_at(space: SpaceForm, x) -> np.ndarray:
    """Christoffel symbols ``Gamma^k_ij`` indexed ``[..., k, i, j]``."""
    x = check_chart(space, x)
    out = np.zeros(x.shape + (space.dim, space.dim))
    if space.is_sphere:
        s, c = np.sin(x[..., 0]), np.cos(x[..., 0])
        out[..., 0, 1, 1] = -s * c
        out[..., 1, 0, 1] = c / s
        out[..., 1, 1, 0] = c / s
    return out


def inner(g, a, b):
    return np.einsum("...i,...ij,...j->...", a, g, b)


def riemann(space: SpaceForm, x, a, b, c, d) -> np.ndarray:
    """Riemann tensor ``R(a, b, c, d)`` of the space form at chart point ``x``."""
    g = metric_at(space, x)
    k = space.curvature
    return k * (inner(g, a, c) * inner(g, b, d) - inner(g, a, d) * inner(g, b, c))


def product_riemann(k1: float, k2: float, n: int, a, b, c, d) -> np.ndarray:
    """Curvature of a product of space forms on orthonormal split coordinates.

    Vectors have ``n + m`` components: the first ``n`` live in the first
    factor (curvature ``k1``), the rest in the second (curvature ``k2``), both
    expressed in orthonormal bases so the inner products are Euclidean.
    """
    a, b, c, d = (np.asarray(v, dtype=float) for v in (a, b, c, d))

    def block(lo, hi, k):
        ip = lambda u, v: np.sum(u[..., lo:hi] * v[..., lo:hi], axis=-1)
        return k * (ip(a, c) * ip(b, d) - ip(a, d) * ip(b, c))

    return block(0, n, k1) + block(n, None, k2)


# --- embedding of the sphere chart -------------------------------------------


def sphere_to_ambient(space: SpaceForm, y) -> np.ndarray:
    """Map sphere chart points to world coordinates in R^3."""
    y = np.asarray(y, dtype=float)
    theta, phi = y[..., 0], y[..., 1]
    local = np.stack(
        [np.sin(theta) * np.cos(phi), np.sin(theta) * np.sin(phi), np.cos(theta)],
        axis=-1,
    )
    return space.chart.radius * local @ space.rotation


def ambient_to_sphere(space: SpaceForm, p) -> np.ndarray:
    """Inverse of :func:`sphere_to_ambient` (points are radially projected)."""
    p = np.asarray(p, dtype=float)
    local = p @ space.rotation.T
    local = local / np.linalg.norm(local, axis=-1, keepdims=True)
    theta = np.arccos(np.clip(local[..., 2], -1.0, 1.0))
    phi = np.arctan2(local[..., 1], local[..., 0])
    return np.stack([theta, phi], axis=-1)


def rotation_to_equator(direction) -> np.ndarray:
    """Rotation (rows = new frame) sending unit ``direction`` to the chart point
    ``theta = pi/2, phi = 0``, i.e. the local x-axis."""
    u = np.asarray(direction, dtype=float)
    u = u / np.linalg.norm(u)
    ex = np.array([1.0, 0.0, 0.0])
    v = np.cross(u, ex)
    s, c = np.linalg.norm(v), float(u @ ex)
    if s < 1e-15:
        return np.eye(3) if c > 0 else np.diag([-1.0, -1.0, 1.0])
    k = v / s
    kx = np.array([[0, -k[2], k[1]], [k[2], 0, -k[0]], [-k[1], k[0], 0]])
    return np.eye(3) + s * kx + (1 - c) * kx @ kx


def geodesic_distance(space: SpaceForm, y1, y2) -> np.ndarray:
    """Geodesic distance between chart points (torus: shortest lift)."""
    y1, y2 = np.asarray(y1, dtype=float), np.asarray(y2, dtype=float)
    if space.is_sphere:
        p, q = sphere_to_ambient(space, y1), sphere_to_ambient(space, y2)
        r = space.chart.radius
        # atan2 keeps full relative precision for nearby and antipodal points alike.
        cross = np.linalg.norm(np.cross(p, q), axis=-1)
        return r * np.arctan2(cross, np.sum(p * q, axis=-1))
    periods = np.array(space.chart.periods)
    d = (y1 - y2 + periods / 2) % periods - periods / 2
    return np.linalg.norm(d, axis=-1)
