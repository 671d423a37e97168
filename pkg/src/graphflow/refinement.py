"""Grid-refinement battery for the discrete consistency checks.

Two smooth evolving states are used: a torus-to-sphere map, measured in the
max norm over every node, and a sphere-to-sphere map, measured in the max
norm over the latitude band ``|theta - pi/2| < pi/3``.  On the sphere grid
the first latitude row sits half a spacing from the pole, where any
``O(h^2)`` truncation error with longitude dependence is multiplied by
``1/sin^2 theta ~ 4/h^2`` inside the Laplacian; the band keeps a fixed
distance from that row.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from graphflow.curvdiag import grad_log_omega_check, normal_defect, residual_34
from graphflow.equation import cfl_dt
from graphflow.flowcore import step
from graphflow.gridcalc import MapState, grid_for
from graphflow.spaceform import SpaceForm, ambient_to_sphere

BAND = np.pi / 3
MEASURES = ("residual_34", "normal_defect", "grad_log_omega")


def torus_sphere_state(n: int) -> MapState:
    """``T^2 -> S^2`` map with image near the equator of the standard chart."""
    dom = SpaceForm.torus([2 * np.pi, 2 * np.pi])
    tar = SpaceForm.sphere()
    grid = grid_for(dom, n)
    x = grid.coords()
    u, v = x[..., 0], x[..., 1]
    vals = np.stack([np.pi / 2 + 0.4 * np.sin(u) + 0.2 * np.cos(v), 0.5 * np.sin(v) + 0.3 * np.sin(u + v)], -1)
    return MapState(dom, tar, grid, vals)


def sphere_sphere_state(n: int) -> MapState:
    """``S^2 -> S^2`` map ``theta -> 0.5 sin(theta)`` on an ``(n, 2n)`` grid, rotated target chart."""
    dom = SpaceForm.sphere()
    tar = SpaceForm.sphere(rotation=[[0, 0, 1], [0, 1, 0], [-1, 0, 0]])
    grid = grid_for(dom, (n, 2 * n))
    x = grid.coords()
    th, ph = x[..., 0], x[..., 1]
    eta = 0.5 * np.sin(th) + 0.1 * np.sin(th) ** 2 * np.cos(ph)
    pts = np.stack([np.sin(eta) * np.cos(ph), np.sin(eta) * np.sin(ph), np.cos(eta)], -1)
    return MapState(dom, tar, grid, ambient_to_sphere(tar, pts))


STATES = {"torus_sphere": torus_sphere_state, "sphere_sphere": sphere_sphere_state}


def _mask(state: MapState) -> np.ndarray:
    if state.grid.pole_axis is None:
        return np.ones(state.grid.shape, dtype=bool)
    theta = state.coords()[..., 0]
    return np.abs(theta - np.pi / 2) < BAND


def errors_at(name: str, n: int, dt_factor: float = 0.05) -> dict[str, float]:
    """Max-norm size of each consistency measure after one rk4 step of size
    ``dt_factor * cfl_dt(state, 0.2)`` (proportional to ``h^2``)."""
    s0 = STATES[name](n)
    dt = dt_factor * cfl_dt(s0, 0.2)
    s1 = step(s0, dt, "rk4")
    mask = _mask(s0)
    fd, fo = grad_log_omega_check(s0)
    return {
        "residual_34": float(np.max(np.abs(residual_34(s0, s1))[mask])),
        "normal_defect": float(np.max(normal_defect(s0)[mask])),
        "grad_log_omega": float(np.max(np.abs(fd - fo)[mask])),
    }


@dataclass
class RefinementRow:
    state: str
    measure: str
    coarse: float
    fine: float
    n: int

    @property
    def ratio(self) -> float:
        return self.coarse / self.fine if self.fine > 0 else float("inf")

    def passed(self, lo: float = 3.2, hi: float = 4.8) -> bool:
        return lo <= self.ratio <= hi


def refinement_battery(n: int = 32, names=tuple(STATES)) -> list[RefinementRow]:
    rows = []
    for name in names:
        coarse, fine = errors_at(name, n), errors_at(name, 2 * n)
        for key in MEASURES:
            rows.append(RefinementRow(name, key, coarse[key], fine[key], n))
    return rows
