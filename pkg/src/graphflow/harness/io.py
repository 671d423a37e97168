"""Run persistence: diagnostics CSV, state snapshots with JSON sidecars, summaries."""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path
from typing import Any

import numpy as np

from graphflow.curvdiag import CSV_COLUMNS, DiagnosticsRecord
from graphflow.gridcalc import MapState, read_snapshot_values, write_snapshot
from graphflow.spaceform import sphere_to_ambient

SNAPSHOT_FORMAT = 1


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer, int)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else None
    return obj


def write_json(path, obj: Any) -> None:
    Path(path).write_text(json.dumps(_jsonable(obj), indent=2, sort_keys=True) + "\n")


def read_json(path) -> Any:
    return json.loads(Path(path).read_text())


# --- diagnostics CSV -------------------------------------------------------------


def write_diagnostics(path, records: list[DiagnosticsRecord], prefix_rows: list[list[str]] | None = None) -> None:
    """Header plus one row per record; floats use their shortest round-trip form."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for row in prefix_rows or []:
            w.writerow(row)
        for rec in records:
            w.writerow(rec.row())


def read_diagnostics(path) -> list[list[str]]:
    """Data rows of a diagnostics CSV (header checked and dropped)."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or rows[0] != CSV_COLUMNS:
        raise ValueError(f"{path}: unexpected diagnostics header")
    return rows[1:]


def diagnostics_columns(rows: list[list[str]]) -> dict[str, np.ndarray]:
    data = np.array([[float(v) for v in row] for row in rows], dtype=float).reshape(-1, len(CSV_COLUMNS))
    return {name: data[:, j] for j, name in enumerate(CSV_COLUMNS)}


# --- snapshots -------------------------------------------------------------------


def snapshot_paths(stem) -> tuple[Path, Path]:
    stem = Path(stem)
    if stem.suffix in (".csv", ".json"):
        stem = stem.with_suffix("")
    return stem.with_suffix(".csv"), stem.with_suffix(".json")


def save_snapshot(state: MapState, stem, *, step: int, last_dt: float, config: dict, forced: bool = False) -> Path:
    """Write ``stem.csv`` (node values, 17 significant digits) and ``stem.json``.

    The sidecar carries everything the values file lacks for a lossless
    resume: step index, time, the step size that produced the state, the
    target chart rotation, the lift winding and the scenario config.
    """
    csv_path, json_path = snapshot_paths(stem)
    write_snapshot(state, csv_path)
    meta = {
        "format": SNAPSHOT_FORMAT,
        "values": csv_path.name,
        "step": int(step),
        "time": float(state.time),
        "last_dt": float(last_dt),
        "target_rotation": state.target.rotation.tolist() if state.target.is_sphere else None,
        "winding": state.winding.tolist(),
        "forced": bool(forced),
        "config": config,
    }
    write_json(json_path, meta)
    return csv_path


def load_snapshot(path):
    """Rebuild ``(state, sidecar, config)`` from :func:`save_snapshot` output; ``path`` is either file of the pair."""
    from graphflow.harness.config import parse_config

    csv_path, json_path = snapshot_paths(path)
    meta = read_json(json_path)
    if meta.get("format") != SNAPSHOT_FORMAT:
        raise ValueError(f"{json_path}: unsupported snapshot format {meta.get('format')!r}")
    cfg = parse_config(meta["config"])
    target = cfg.target
    if meta["target_rotation"] is not None:
        target = target.with_rotation(meta["target_rotation"])
    grid = cfg.grid
    values = read_snapshot_values(csv_path, grid, target.dim)
    state = MapState(cfg.domain, target, grid, values, float(meta["time"]), np.array(meta["winding"]))
    return state, meta, cfg


# --- summary helpers -------------------------------------------------------------


def image_radius(state: MapState) -> float:
    """Largest target distance from the image to its mean point.

    Sphere targets use the geodesic distance to the normalized ambient mean;
    torus targets use the flat distance to the coordinate mean of the lifted
    values (only meaningful without winding).
    """
    if state.target.is_sphere:
        r = state.target.chart.radius
        pts = sphere_to_ambient(state.target, state.values).reshape(-1, 3) / r
        mean = pts.mean(axis=0)
        norm = np.linalg.norm(mean)
        if norm == 0:
            return math.pi * r
        u = mean / norm
        ang = np.arctan2(np.linalg.norm(np.cross(pts, u), axis=-1), pts @ u)
        return float(r * np.max(ang))
    vals = state.values.reshape(-1, state.m)
    return float(np.max(np.linalg.norm(vals - vals.mean(axis=0), axis=-1)))


def cumulative_decrease(series) -> float:
    """Sum of the step-to-step drops of a series (zero for a nondecreasing one)."""
    s = np.asarray(series, dtype=float)
    if s.size < 2:
        return 0.0
    return float(np.sum(np.maximum(s[:-1] - s[1:], 0.0)))
