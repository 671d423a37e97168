"""Initial maps for scenario runs.

Every preset returns a :class:`MapState` at time zero.  Sphere targets are
always built in a rotated chart whose equator passes through the image, so
the flow starts away from the chart poles.
"""

from __future__ import annotations

import numpy as np

from graphflow.errors import ConfigError
from graphflow.gridcalc import GridSpec, MapState
from graphflow.spaceform import SpaceForm, ambient_to_sphere, sphere_to_ambient

# Target chart rotation sending the north pole of the standard frame to (pi/2, 0).
POLE_TO_EQUATOR = ((0.0, 0.0, 1.0), (0.0, 1.0, 0.0), (-1.0, 0.0, 0.0))

PRESETS = ("constant", "linear", "contracted_identity", "equivariant", "perturbed")


def _require(cond: bool, path: str, reason: str) -> None:
    if not cond:
        raise ConfigError(path, reason)


def constant(domain: SpaceForm, target: SpaceForm, grid: GridSpec, point=None) -> MapState:
    if point is None:
        point = [np.pi / 2, 0.0] if target.is_sphere else [0.0] * target.dim
    point = np.asarray(point, dtype=float)
    _require(point.shape == (target.dim,), "initial.point", f"expected {target.dim} coordinates")
    if target.is_sphere:
        _require(0 < point[0] < np.pi, "initial.point", "latitude must lie strictly inside (0, pi)")
    values = np.broadcast_to(point, grid.shape + (target.dim,)).copy()
    return MapState(domain, target, grid, values)


def linear(domain: SpaceForm, target: SpaceForm, grid: GridSpec, matrix, offset=None,
           check_lattice: bool = True) -> MapState:
    """``f(x) = A x + b`` between flat tori.

    The lift jumps by ``A[:, i] * P_i`` across domain period ``P_i``; with
    ``check_lattice`` that jump must be an integer combination of the target
    periods so the map is well defined on the quotient.
    """
    _require(not domain.is_sphere and not target.is_sphere, "initial.preset",
             "linear maps need flat torus domain and target")
    a = np.asarray(matrix, dtype=float)
    _require(a.shape == (target.dim, domain.dim), "initial.matrix",
             f"expected shape ({target.dim}, {domain.dim}), got {a.shape}")
    b = np.zeros(target.dim) if offset is None else np.asarray(offset, dtype=float)
    _require(b.shape == (target.dim,), "initial.offset", f"expected {target.dim} entries")
    periods = np.array(domain.chart.periods)
    winding = (a * periods[None, :]).T  # [i, a]
    if check_lattice:
        ratio = winding / np.array(target.chart.periods)[None, :]
        _require(np.allclose(ratio, np.round(ratio), atol=1e-9), "initial.matrix",
                 "A * domain periods must be integer multiples of the target periods")
    values = grid.coords() @ a.T + b
    return MapState(domain, target, grid, values, winding=winding)


def equivariant(domain: SpaceForm, target: SpaceForm, grid: GridSpec, m: int = 1,
                amplitude: float = 0.5) -> MapState:
    """Rotationally symmetric sphere map ``(theta, phi) -> (eta(theta), m phi)``.

    ``eta = amplitude * sin(theta)^|m|`` is smooth at both poles; the image is
    the cap of radius ``amplitude`` around the standard north pole, stored in
    the rotated target chart.  The maximal singular value is ``amplitude`` for
    ``|m| = 1``.
    """
    _require(domain.is_sphere and target.is_sphere, "initial.preset",
             "equivariant maps need sphere domain and target")
    _require(int(m) == m, "initial.m", "must be an integer")
    _require(0 < amplitude < np.pi / 2, "initial.amplitude", "must lie in (0, pi/2)")
    m = int(m)
    x = grid.coords()
    theta, phi = x[..., 0], x[..., 1]
    eta = amplitude * np.sin(theta) ** abs(m)
    pts = np.stack([np.sin(eta) * np.cos(m * phi), np.sin(eta) * np.sin(m * phi), np.cos(eta)], axis=-1)
    tgt = SpaceForm.sphere(target.chart.radius, POLE_TO_EQUATOR)
    values = ambient_to_sphere(tgt, pts * target.chart.radius)
    return MapState(domain, tgt, grid, values)


def contracted_identity(domain: SpaceForm, target: SpaceForm, grid: GridSpec, rho: float = 0.8) -> MapState:
    """Identity of the sphere contracted toward the north pole with ratio ``rho``.

    Uses the smooth contraction ``theta -> rho * sin(theta)`` so the map stays
    regular at the antipodal pole; the largest singular value, ``rho``, is
    attained at the poles.
    """
    _require(0 < rho < 1, "initial.rho", "must lie in (0, 1)")
    return equivariant(domain, target, grid, 1, rho)


def _torus_modes(grid: GridSpec, domain: SpaceForm, m: int, rng: np.random.Generator,
                 kmax: int = 2) -> np.ndarray:
    x = grid.coords()
    periods = np.array(domain.chart.periods)
    out = np.zeros(grid.shape + (m,))
    ks = np.array(np.meshgrid(*[np.arange(-kmax, kmax + 1)] * domain.dim, indexing="ij")).reshape(domain.dim, -1).T
    for k in ks:
        if not np.any(k):
            continue
        phase = (x * (2 * np.pi * k / periods)).sum(axis=-1)
        weight = 1.0 / (1.0 + float(k @ k))
        c, s = rng.standard_normal((2, m)) * weight
        out += np.cos(phase)[..., None] * c + np.sin(phase)[..., None] * s
    return out


def _sphere_modes(grid: GridSpec, domain: SpaceForm, m: int, rng: np.random.Generator) -> np.ndarray:
    """Random polynomial of degree <= 2 in the ambient coordinates (smooth on the sphere)."""
    p = sphere_to_ambient(domain, grid.coords()) / domain.chart.radius
    lin = rng.standard_normal((3, m))
    quad = rng.standard_normal((3, 3, m)) * 0.5
    quad = 0.5 * (quad + np.swapaxes(quad, 0, 1))
    return p @ lin + np.einsum("...i,...j,ijm->...m", p, p, quad)


def perturbed(base: MapState, amplitude: float, seed: int) -> MapState:
    """Add a smooth random perturbation normalized to max-norm ``amplitude``."""
    _require(amplitude >= 0, "initial.amplitude", "must be non-negative")
    rng = np.random.default_rng(seed)
    if base.domain.is_sphere:
        bump = _sphere_modes(base.grid, base.domain, base.m, rng)
    else:
        bump = _torus_modes(base.grid, base.domain, base.m, rng)
    bump = bump - bump.mean(axis=tuple(range(base.grid.ndim)))
    scale = np.max(np.abs(bump))
    if scale > 0:
        bump *= amplitude / scale
    values = base.values + bump
    if base.target.is_sphere:
        _require(bool(np.all((values[..., 0] > 1e-6) & (values[..., 0] < np.pi - 1e-6))),
                 "initial.amplitude", "perturbation pushes the image onto a chart pole")
    return base.with_values(values)


def build_preset(spec: dict, domain: SpaceForm, target: SpaceForm, grid: GridSpec, seed: int = 0,
                 path: str = "initial") -> MapState:
    """Dispatch on ``spec['preset']``; parameters come from the same dict."""
    name = spec.get("preset")
    _require(name in PRESETS, f"{path}.preset", f"unknown preset {name!r}; expected one of {PRESETS}")
    if name in ("contracted_identity", "equivariant"):
        _require(domain.dim >= 2, f"{path}.preset",
                 f"{name} needs a domain of dimension >= 2 (dimension hypothesis n >= 2)")
    if name == "constant":
        return constant(domain, target, grid, spec.get("point"))
    if name == "linear":
        _require("matrix" in spec, f"{path}.matrix", "required for the linear preset")
        return linear(domain, target, grid, spec["matrix"], spec.get("offset"))
    if name == "contracted_identity":
        return contracted_identity(domain, target, grid, float(spec.get("rho", 0.8)))
    if name == "equivariant":
        return equivariant(domain, target, grid, spec.get("m", 1), float(spec.get("amplitude", 0.5)))
    base_spec = spec.get("base")
    _require(isinstance(base_spec, dict), f"{path}.base", "perturbed needs a base preset object")
    _require(base_spec.get("preset") != "perturbed", f"{path}.base.preset", "cannot nest perturbed presets")
    base = build_preset(base_spec, domain, target, grid, seed, f"{path}.base")
    return perturbed(base, float(spec.get("amplitude", 0.01)), int(spec.get("seed", seed)))
