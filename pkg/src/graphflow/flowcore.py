"""Time stepping and the run loop for the graph flow.

The right-hand side, the time-step bound and the tangential velocity live in
:mod:`graphflow.equation` and are re-exported here so callers can treat this
module as the flow API.
"""

from __future__ import annotations

import math
from collections.abc import Callable
from dataclasses import dataclass, field, replace

import numpy as np

from graphflow.curvdiag import (
    DiagnosticsRecord,
    compute_diagnostics,
    monitor_values,
    normal_defect,
)
from graphflow.equation import (
    apply_pole_filter,
    cfl_dt,
    geometry_fields,
    mcf_rhs,
    rhs_from_geometry,
    tangential_velocity,
)
from graphflow.errors import (
    DegenerateMetric,
    GraphflowError,
    GraphLost,
    Instability,
    PoleSingularity,
)
from graphflow.frames import area_margin, singular_values, star_omega
from graphflow.gridcalc import MapState
from graphflow.spaceform import ambient_to_sphere, rotation_to_equator, sphere_to_ambient

__all__ = [
    "FlowConfig",
    "FlowResult",
    "SCHEMES",
    "STABLE_CFL",
    "cfl_dt",
    "mcf_rhs",
    "normal_defect",
    "recenter_target",
    "run_flow",
    "step",
    "tangential_velocity",
]

SCHEMES = ("forward-euler", "rk4")
# Largest CFL constant of each scheme for the flat-limit heat operator
# (real-axis stability intervals 2 and 2.785 divided by 4).
STABLE_CFL = {"forward-euler": 0.5, "rk4": 0.69}
# Below this value the area-decreasing margin is treated as lost.
AREA_LOSS_TOL = 1e-12
# Recenter the target sphere once the image comes this close (in latitude) to a chart pole.
POLE_GUARD = 0.35


@dataclass(frozen=True)
class FlowConfig:
    """Run-loop settings.  ``dt`` set means a fixed step, otherwise ``cfl`` is used."""

    scheme: str = "rk4"
    dt: float | None = None
    cfl: float = 0.2
    t_end: float = 1.0
    max_steps: int = 100_000
    cadence: int = 1
    lambda_tol: float = 0.01
    rhs_tol: float = 1e-6
    pole_filter: bool = True
    enforce_cfl: bool = True
    stop_on_area_loss: bool = True
    with_residual: bool = False
    recenter: bool = True

    def __post_init__(self):
        if self.scheme not in SCHEMES:
            raise ValueError(f"scheme must be one of {SCHEMES}")
        if self.dt is not None and not self.dt > 0:
            raise ValueError("dt must be positive")
        if not 0 < self.cfl < 1:
            raise ValueError("cfl must lie in (0, 1)")
        if not self.t_end > 0:
            raise ValueError("t_end must be positive")
        if self.max_steps < 0:
            raise ValueError("max_steps must be non-negative")
        if self.cadence < 1:
            raise ValueError("cadence must be at least 1")
        if self.lambda_tol < 0 or self.rhs_tol < 0:
            raise ValueError("stop tolerances must be non-negative")


@dataclass
class FlowResult:
    state: MapState
    records: list[DiagnosticsRecord]
    reason: str
    steps: int
    message: str = ""
    node: tuple | None = None
    recenterings: int = 0
    # Per-step global extrema (every step, not only cadence ticks).
    monitor: dict = field(default_factory=dict)


def _first_bad(mask: np.ndarray) -> tuple:
    idx = np.argwhere(mask)
    return tuple(int(v) for v in idx[0]) if idx.size else ()


def _tendency(state: MapState, pole_filter: bool) -> np.ndarray:
    return mcf_rhs(state, pole_filter=pole_filter)


def step(state: MapState, dt: float, scheme: str = "rk4", *, pole_filter: bool = False,
         enforce_cfl: bool = True, k1: np.ndarray | None = None, step_index: int | None = None) -> MapState:
    """Advance every node by one explicit step.

    ``k1`` may carry the tendency at ``state`` when the caller already has it.
    With ``enforce_cfl`` a step larger than the scheme's stability bound is
    refused with :class:`Instability` before any work is done.
    """
    if scheme not in SCHEMES:
        raise ValueError(f"scheme must be one of {SCHEMES}")
    if not dt > 0:
        raise ValueError("dt must be positive")
    if enforce_cfl:
        bound = cfl_dt(state, STABLE_CFL[scheme], pole_filter=pole_filter)
        if dt > bound * (1 + 1e-12):
            raise Instability(f"dt={dt!r} exceeds the {scheme} stability bound {bound!r}", step_index)
    f0 = state.values
    try:
        if k1 is None:
            k1 = _tendency(state, pole_filter)
        if scheme == "forward-euler":
            new = f0 + dt * k1
        else:
            k2 = _tendency(state.with_values(f0 + 0.5 * dt * k1), pole_filter)
            k3 = _tendency(state.with_values(f0 + 0.5 * dt * k2), pole_filter)
            k4 = _tendency(state.with_values(f0 + dt * k3), pole_filter)
            new = f0 + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    except (PoleSingularity, DegenerateMetric, np.linalg.LinAlgError) as exc:
        raise Instability(f"stage evaluation failed: {exc}", step_index) from exc
    bad = ~np.isfinite(new)
    if np.any(bad):
        node = _first_bad(np.any(bad, axis=-1))
        raise Instability("non-finite value after step", step_index, node)
    return state.with_values(new, state.time + dt)


# --- target chart recentering -------------------------------------------------


def _needs_recentering(state: MapState) -> bool:
    if not state.target.is_sphere:
        return False
    theta = state.values[..., 0]
    return bool(np.min(np.sin(theta)) < math.sin(POLE_GUARD))


def recenter_target(state: MapState) -> MapState | None:
    """Rotate the target sphere chart so the image's mean direction sits on the equator.

    Returns ``None`` when the image does not fit inside an open hemisphere
    around its mean direction (the rotated longitudes would wrap).
    """
    pts = sphere_to_ambient(state.target, state.values)
    mean = pts.reshape(-1, 3).mean(axis=0)
    norm = np.linalg.norm(mean)
    if norm < 1e-12:
        return None
    u = mean / norm
    if np.min(pts.reshape(-1, 3) @ u) <= 1e-3 * state.target.chart.radius:
        return None
    rot = rotation_to_equator(u)
    target = state.target.with_rotation(rot)
    values = ambient_to_sphere(target, pts)
    return replace(state, target=target, values=values, winding=np.zeros_like(state.winding))


# --- run loop ------------------------------------------------------------------


def _graph_check(lam: np.ndarray, n: int, check_area: bool):
    """Return (reason-message, node) when the graph condition is lost."""
    so = star_omega(lam)
    bad = ~(np.isfinite(so) & (so > 0))
    if np.any(bad):
        return "*Omega <= 0", _first_bad(bad)
    if check_area and n >= 2:
        margin = area_margin(lam)
        bad = margin <= AREA_LOSS_TOL
        if np.any(bad):
            return f"area-decreasing margin lost (min {float(np.min(margin))!r})", _first_bad(bad)
    return None


def run_flow(initial: MapState, config: FlowConfig, *, step_offset: int = 0,
             initial_dt: float = 0.0, record_initial: bool = True,
             on_step: Callable[[MapState, int, float], None] | None = None) -> FlowResult:
    """Step ``initial`` until ``t_end``, ``max_steps`` or a stop rule fires.

    Termination reasons: ``Converged`` (max lambda and max |rhs| below their
    thresholds), ``TimeBudget`` (``t_end`` or ``max_steps`` reached),
    ``GraphLost`` and ``Instability`` (step errors, reported with step index
    and node instead of raised).

    Resuming from a snapshot passes the snapshot's step index as
    ``step_offset`` (``max_steps`` counts total steps), the step that led to
    it as ``initial_dt``, and ``record_initial=False`` because that row was
    already written by the first run.  ``on_step(state, step, dt)`` is called
    after every accepted step.
    """
    state = initial
    records: list[DiagnosticsRecord] = []
    monitor = {k: [] for k in ("step", "t", "min_star_omega", "max_lambda", "min_area_margin", "min_S_diag")}
    prev: MapState | None = None
    last_dt = initial_dt
    recenterings = 0
    k = 0
    t_end = config.t_end
    n = state.n

    def finish(reason, message="", node=None):
        idx = step_offset + k
        fresh = k > 0 or record_initial
        if fresh and (not records or records[-1].step != idx):
            try:
                records.append(compute_diagnostics(state, idx, last_dt, prev, config.with_residual))
            except GraphflowError:
                pass
        mon = {key: np.asarray(v, dtype=float) for key, v in monitor.items()}
        return FlowResult(state, records, reason, k, message, node, recenterings, mon)

    while True:
        idx = step_offset + k
        if config.recenter and _needs_recentering(state):
            moved = recenter_target(state)
            if moved is not None:
                state = moved
                prev = None
                recenterings += 1
        try:
            geo = geometry_fields(state)
        except (PoleSingularity, DegenerateMetric) as exc:
            return finish("Instability", f"step {idx}: {exc.kind}: {exc}")
        lam = singular_values(geo["df"], geo["g"], geo["h"])
        lost = _graph_check(lam, n, config.stop_on_area_loss and k > 0)
        if lost is not None:
            return finish("GraphLost", f"step {idx}: {lost[0]}", lost[1])
        so, ml, am, sd = monitor_values(lam)
        for key, val in zip(monitor, (idx, state.time, so, ml, am, sd)):
            monitor[key].append(val)
        if idx % config.cadence == 0 and (k > 0 or record_initial):
            records.append(compute_diagnostics(state, idx, last_dt, prev, config.with_residual))

        rhs = rhs_from_geometry(geo)
        if config.pole_filter:
            rhs = apply_pole_filter(rhs, state.grid)
        if float(np.max(lam)) <= config.lambda_tol and float(np.max(np.abs(rhs))) <= config.rhs_tol:
            return finish("Converged")
        remaining = t_end - state.time
        if remaining <= 1e-14 * max(1.0, t_end) or idx >= config.max_steps:
            return finish("TimeBudget")

        if config.dt is not None:
            dt = config.dt
            enforce = config.enforce_cfl
        else:
            # The CFL policy already respects the bound whenever c is inside the stable range.
            enforce = config.enforce_cfl and config.cfl > STABLE_CFL[config.scheme]
            dt = cfl_dt(state, config.cfl, pole_filter=config.pole_filter, lam=geo["lam"])
        dt = min(dt, remaining)
        try:
            new = step(state, dt, config.scheme, pole_filter=config.pole_filter,
                       enforce_cfl=enforce, k1=rhs, step_index=idx + 1)
        except Instability as exc:
            return finish("Instability", f"step {idx + 1}: {exc}", exc.node)
        prev, state, last_dt = state, new, dt
        k += 1
        if on_step is not None:
            on_step(state, step_offset + k, dt)
