"""Scenario configuration: JSON schema validation, defaults and hypothesis flags.

Schema (unknown keys are rejected at every level)::

    {
      "domain": {"type": "torus", "periods": [6.283185307179586, 6.283185307179586]},
      "target": {"type": "sphere", "radius": 1.0},
      "grid":   {"resolution": [64, 64]},
      "initial": {"preset": "contracted_identity", "rho": 0.8},
      "flow":   {"scheme": "rk4", "cfl": 0.2, "t_end": 10.0, ...},
      "output": {"dir": "runs/demo", "snapshot_every": 0},
      "seed": 0
    }

A space is ``{"type": "torus", "periods": [...]}`` (or ``"dim"`` plus a
scalar ``"period"``, default ``2*pi``) or ``{"type": "sphere"}`` with either
``"radius"`` or a positive ``"curvature"``.  ``"dim"`` and ``"curvature"`` may
be given on any space and must then agree with the rest of the entry.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Any

import numpy as np

from graphflow.errors import ConfigError
from graphflow.flowcore import AREA_LOSS_TOL, FlowConfig
from graphflow.frames import area_margin, singular_values
from graphflow.gridcalc import GridSpec, MapState, grid_for, jets_field
from graphflow.harness.presets import PRESETS, build_preset
from graphflow.spaceform import SpaceForm, metric_at

log = logging.getLogger("graphflow.harness")

TOP_KEYS = {"domain", "target", "grid", "initial", "flow", "output", "seed"}
SPACE_KEYS = {"type", "dim", "curvature", "periods", "period", "radius"}
GRID_KEYS = {"resolution"}
OUTPUT_KEYS = {"dir", "snapshot_every"}
FLOW_KEYS = {f.name for f in fields(FlowConfig)}
PRESET_KEYS = {
    "constant": {"preset", "point"},
    "linear": {"preset", "matrix", "offset"},
    "contracted_identity": {"preset", "rho"},
    "equivariant": {"preset", "m", "amplitude"},
    "perturbed": {"preset", "base", "amplitude", "seed"},
}


@dataclass
class ScenarioConfig:
    domain: SpaceForm
    target: SpaceForm
    resolution: tuple[int, ...]
    initial: dict
    flow: FlowConfig
    output_dir: str | None = None
    snapshot_every: int = 0
    seed: int = 0
    hypotheses: dict = field(default_factory=dict)
    raw: dict = field(default_factory=dict)

    @property
    def grid(self) -> GridSpec:
        return grid_for(self.domain, self.resolution)

    @property
    def borderline(self) -> bool:
        """Initial map not strictly area-decreasing (margin within round-off of 0 or below)."""
        margin = self.hypotheses.get("initial_area_margin")
        return margin is not None and margin <= AREA_LOSS_TOL


# --- small validators ---------------------------------------------------------


def _fail(path: str, reason: str):
    raise ConfigError(path, reason)


def _object(value, path: str, allowed: set[str]) -> dict:
    if not isinstance(value, dict):
        _fail(path, f"expected an object, got {type(value).__name__}")
    extra = sorted(set(value) - allowed)
    if extra:
        _fail(f"{path}.{extra[0]}", f"unknown key; allowed keys are {sorted(allowed)}")
    return value


def _number(value, path: str, *, positive: bool = False) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)) or not math.isfinite(value):
        _fail(path, f"expected a finite number, got {value!r}")
    if positive and value <= 0:
        _fail(path, f"must be positive, got {value!r}")
    return float(value)


def _integer(value, path: str, *, minimum: int | None = None) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        _fail(path, f"expected an integer, got {value!r}")
    if minimum is not None and value < minimum:
        _fail(path, f"must be >= {minimum}, got {value!r}")
    return int(value)


def _space(value, path: str) -> SpaceForm:
    spec = _object(value, path, SPACE_KEYS)
    kind = spec.get("type")
    if kind == "torus":
        for key in ("radius",):
            if key in spec:
                _fail(f"{path}.{key}", "not a torus parameter")
        if "periods" in spec:
            if "period" in spec:
                _fail(f"{path}.period", "give either periods or period")
            periods = spec["periods"]
            if not isinstance(periods, list) or not periods:
                _fail(f"{path}.periods", "expected a non-empty list")
            periods = [_number(p, f"{path}.periods[{i}]", positive=True) for i, p in enumerate(periods)]
            if "dim" in spec and _integer(spec["dim"], f"{path}.dim", minimum=1) != len(periods):
                _fail(f"{path}.dim", f"does not match {len(periods)} periods")
        else:
            if "dim" not in spec:
                _fail(f"{path}.dim", "required when periods is absent")
            dim = _integer(spec["dim"], f"{path}.dim", minimum=1)
            period = _number(spec.get("period", 2 * math.pi), f"{path}.period", positive=True)
            periods = [period] * dim
        if "curvature" in spec and _number(spec["curvature"], f"{path}.curvature") != 0:
            _fail(f"{path}.curvature", "a flat torus has curvature 0")
        return SpaceForm.torus(periods)
    if kind == "sphere":
        for key in ("periods", "period"):
            if key in spec:
                _fail(f"{path}.{key}", "not a sphere parameter")
        if "dim" in spec and _integer(spec["dim"], f"{path}.dim", minimum=1) != 2:
            _fail(f"{path}.dim", "only the 2-sphere is supported")
        if "radius" in spec:
            radius = _number(spec["radius"], f"{path}.radius", positive=True)
            if "curvature" in spec:
                k = _number(spec["curvature"], f"{path}.curvature")
                if not math.isclose(k, 1.0 / radius**2, rel_tol=1e-12):
                    _fail(f"{path}.curvature", f"inconsistent with radius {radius!r}")
        elif "curvature" in spec:
            k = _number(spec["curvature"], f"{path}.curvature")
            if k <= 0:
                _fail(f"{path}.curvature", "sphere curvature must be positive")
            radius = 1.0 / math.sqrt(k)
        else:
            radius = 1.0
        return SpaceForm.sphere(radius)
    _fail(f"{path}.type", f"expected 'torus' or 'sphere', got {kind!r}")


def _resolution(value, path: str, domain: SpaceForm) -> tuple[int, ...]:
    spec = _object(value, path, GRID_KEYS)
    if "resolution" not in spec:
        _fail(f"{path}.resolution", "required")
    res = spec["resolution"]
    items = res if isinstance(res, list) else [res]
    out = tuple(_integer(r, f"{path}.resolution", minimum=3) for r in items)
    if len(out) == 1:
        out = out * domain.dim
    if len(out) != domain.dim:
        _fail(f"{path}.resolution", f"expected {domain.dim} entries for the domain")
    if domain.is_sphere and out[1] % 2:
        _fail(f"{path}.resolution", "longitude resolution must be even")
    return out


def _initial(value, path: str) -> dict:
    if not isinstance(value, dict):
        _fail(path, "expected an object")
    name = value.get("preset")
    if name not in PRESETS:
        _fail(f"{path}.preset", f"unknown preset {name!r}; expected one of {list(PRESETS)}")
    _object(value, path, PRESET_KEYS[name])
    if name == "perturbed":
        if "base" not in value:
            _fail(f"{path}.base", "required for the perturbed preset")
        _initial(value["base"], f"{path}.base")
    return value


def _flow(value, path: str) -> FlowConfig:
    spec = dict(_object(value, path, FLOW_KEYS))
    types = {f.name: f.type for f in fields(FlowConfig)}
    for key, val in spec.items():
        kind = types[key]
        if kind == "bool":
            if not isinstance(val, bool):
                _fail(f"{path}.{key}", f"expected true or false, got {val!r}")
        elif kind == "str":
            if not isinstance(val, str):
                _fail(f"{path}.{key}", f"expected a string, got {val!r}")
        elif kind == "int":
            spec[key] = _integer(val, f"{path}.{key}")
        elif val is not None:
            spec[key] = _number(val, f"{path}.{key}")
    try:
        return FlowConfig(**spec)
    except ValueError as exc:
        msg = str(exc)
        key = next((k for k in FLOW_KEYS if msg.startswith(k)), None)
        if key is None and msg.startswith("stop tolerances"):
            key = "lambda_tol"
        _fail(f"{path}.{key}" if key else path, msg)


# --- hypotheses -----------------------------------------------------------------


def initial_lambdas(state: MapState) -> np.ndarray:
    x = state.coords()
    df, _ = jets_field(state)
    g = metric_at(state.domain, x)
    h = metric_at(state.target, state.values)
    return singular_values(df, g, h)


def hypothesis_flags(domain: SpaceForm, target: SpaceForm, state: MapState | None) -> dict[str, Any]:
    k1, k2 = domain.curvature, target.curvature
    flags: dict[str, Any] = {
        "k1": k1,
        "k2": k2,
        "k1_ge_abs_k2": k1 >= abs(k2),
        "k1_plus_k2_positive": k1 + k2 > 0,
        "dim_ge_2": domain.dim >= 2,
        "initial_area_margin": None,
        "initial_max_lambda": None,
        "area_decreasing": None,
    }
    if state is not None:
        lam = initial_lambdas(state)
        flags["initial_max_lambda"] = float(np.max(lam))
        if lam.shape[-1] >= 2:
            margin = float(np.min(area_margin(lam)))
            flags["initial_area_margin"] = margin
            flags["area_decreasing"] = margin > AREA_LOSS_TOL
        else:
            # No pair of singular values: the condition holds vacuously.
            flags["area_decreasing"] = True
    return flags


def log_hypotheses(flags: dict) -> None:
    for key in ("k1_ge_abs_k2", "k1_plus_k2_positive", "dim_ge_2", "area_decreasing"):
        level = logging.INFO if flags[key] else logging.WARNING
        log.log(level, "hypothesis %s: %s", key, flags[key])
    log.info("initial area_margin: %r", flags["initial_area_margin"])
    log.info("initial max lambda: %r", flags["initial_max_lambda"])


# --- entry points ---------------------------------------------------------------


def parse_config(raw: Any) -> ScenarioConfig:
    """Validate an already-decoded JSON document."""
    spec = _object(raw, "config", TOP_KEYS)
    for key in ("domain", "target", "grid", "initial"):
        if key not in spec:
            _fail(key, "required")
    domain = _space(spec["domain"], "domain")
    target = _space(spec["target"], "target")
    resolution = _resolution(spec["grid"], "grid", domain)
    initial = _initial(spec["initial"], "initial")
    flow = _flow(spec.get("flow", {}), "flow")
    out = _object(spec.get("output", {}), "output", OUTPUT_KEYS)
    out_dir = out.get("dir")
    if out_dir is not None and not isinstance(out_dir, str):
        _fail("output.dir", "expected a string")
    every = _integer(out.get("snapshot_every", 0), "output.snapshot_every", minimum=0)
    seed = _integer(spec.get("seed", 0), "seed", minimum=0)
    cfg = ScenarioConfig(domain, target, resolution, initial, flow, out_dir, every, seed, raw=raw)
    state = build_initial_map(cfg)
    cfg.hypotheses = hypothesis_flags(domain, target, state)
    log_hypotheses(cfg.hypotheses)
    return cfg


def load_config(path) -> ScenarioConfig:
    """Read, validate and complete a scenario file; logs the hypothesis flags."""
    p = Path(path)
    if not p.is_file():
        _fail("config", f"no such file: {p}")
    try:
        raw = json.loads(p.read_text())
    except json.JSONDecodeError as exc:
        _fail("config", f"invalid JSON at line {exc.lineno} column {exc.colno}: {exc.msg}")
    return parse_config(raw)


def build_initial_map(config: ScenarioConfig) -> MapState:
    try:
        return build_preset(config.initial, config.domain, config.target, config.grid, config.seed)
    except ConfigError:
        raise
    except (ValueError, TypeError) as exc:
        raise ConfigError("initial", str(exc)) from exc


def check_borderline(config: ScenarioConfig, force: bool) -> None:
    """Refuse a run whose initial map is not strictly area-decreasing unless forced."""
    if config.borderline and not force:
        margin = config.hypotheses["initial_area_margin"]
        _fail("initial", f"initial area_margin {margin!r} is not strictly positive "
                         "(area-decreasing hypothesis); pass --force to run anyway")
