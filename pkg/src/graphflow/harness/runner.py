"""Run orchestration behind the ``run``, ``resume`` and ``report`` subcommands.

Layout of a run directory::

    diagnostics.csv        one row per cadence tick plus the final state
    snapshots/step_*.csv   periodic snapshots (with .json sidecars)
    final.csv, final.json  final-state snapshot
    summary.json           termination reason, final max lambda, wall time, ...
    plots/*.svg            diagnostic time series
"""

from __future__ import annotations

import dataclasses
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from graphflow.flowcore import FlowConfig, FlowResult, run_flow
from graphflow.gridcalc import MapState
from graphflow.harness import io, plots
from graphflow.harness.config import ScenarioConfig, build_initial_map, check_borderline

DIAGNOSTICS = "diagnostics.csv"
SUMMARY = "summary.json"
FINAL = "final"
SNAPSHOTS = "snapshots"
PLOTS = "plots"

EXIT_OK, EXIT_VERIFY, EXIT_CONFIG, EXIT_FLOW = 0, 1, 2, 3
FAILURE_REASONS = ("GraphLost", "Instability")


@dataclass
class RunOutcome:
    result: FlowResult
    summary: dict
    out_dir: Path

    @property
    def exit_code(self) -> int:
        return EXIT_FLOW if self.result.reason in FAILURE_REASONS else EXIT_OK

    def error_line(self) -> str | None:
        """One machine-parsable line ``Kind: message`` for failed runs."""
        if self.result.reason not in FAILURE_REASONS:
            return None
        node = f" at node {list(self.result.node)}" if self.result.node else ""
        return f"{self.result.reason}: {self.result.message}{node}"


def _snapshot_name(step: int) -> str:
    return f"step_{step:08d}"


def _summary(result: FlowResult, cfg: ScenarioConfig, wall: float, *, forced: bool,
             step_offset: int, resumed_from: str | None) -> dict:
    mon = result.monitor
    final = result.records[-1] if result.records else None
    out = {
        "reason": result.reason,
        "message": result.message,
        "node": list(result.node) if result.node else None,
        "steps": int(result.steps),
        "final_step": step_offset + result.steps,
        "final_time": float(result.state.time),
        "final_max_lambda": final.max_lambda if final else None,
        "final_image_radius": io.image_radius(result.state),
        "wall_time_s": wall,
        "recenterings": result.recenterings,
        "forced": forced,
        "resumed_from": resumed_from,
        "hypotheses": cfg.hypotheses,
    }
    if mon.get("step") is not None and mon["step"].size:
        out["monitor"] = {
            "min_star_omega_initial": mon["min_star_omega"][0],
            "min_star_omega_cumulative_decrease": io.cumulative_decrease(mon["min_star_omega"]),
            "min_area_margin_initial": mon["min_area_margin"][0],
            "min_area_margin_lowest": np.min(mon["min_area_margin"]),
            "min_S_diag_initial": mon["min_S_diag"][0],
            "min_S_diag_lowest": np.min(mon["min_S_diag"]),
            "max_lambda_lowest": np.min(mon["max_lambda"]),
            "first_step_max_lambda_below_tol": _first_below(mon, cfg.flow.lambda_tol),
        }
    return out


def _first_below(mon: dict, tol: float):
    hit = np.nonzero(mon["max_lambda"] < tol)[0]
    return int(mon["step"][hit[0]]) if hit.size else None


def _execute(cfg: ScenarioConfig, state: MapState, out_dir, *, flow: FlowConfig, forced: bool,
             step_offset: int = 0, initial_dt: float = 0.0, prefix_rows=None,
             resumed_from: str | None = None) -> RunOutcome:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    raw = cfg.raw
    every = cfg.snapshot_every
    if every:
        (out / SNAPSHOTS).mkdir(exist_ok=True)

    def on_step(s: MapState, step: int, dt: float) -> None:
        if step % every == 0:
            io.save_snapshot(s, out / SNAPSHOTS / _snapshot_name(step), step=step, last_dt=dt,
                             config=raw, forced=forced)

    if every and step_offset == 0:
        io.save_snapshot(state, out / SNAPSHOTS / _snapshot_name(0), step=0, last_dt=0.0, config=raw, forced=forced)
    start = time.perf_counter()
    result = run_flow(state, flow, step_offset=step_offset, initial_dt=initial_dt,
                      record_initial=step_offset == 0, on_step=on_step if every else None)
    wall = time.perf_counter() - start
    io.write_diagnostics(out / DIAGNOSTICS, result.records, prefix_rows)
    last_dt = result.records[-1].dt if result.records else initial_dt
    io.save_snapshot(result.state, out / FINAL, step=step_offset + result.steps, last_dt=last_dt,
                     config=raw, forced=forced)
    summary = _summary(result, cfg, wall, forced=forced, step_offset=step_offset, resumed_from=resumed_from)
    io.write_json(out / SUMMARY, summary)
    plots.write_plots(io.diagnostics_columns(io.read_diagnostics(out / DIAGNOSTICS)), out / PLOTS)
    return RunOutcome(result, summary, out)


def execute_run(cfg: ScenarioConfig, out_dir, *, force: bool = False) -> RunOutcome:
    """Build the initial map and run the flow; raises ConfigError for a refused borderline start."""
    check_borderline(cfg, force)
    state = build_initial_map(cfg)
    return _execute(cfg, state, out_dir, flow=cfg.flow, forced=force and cfg.borderline)


def resume_run(snapshot, out_dir, *, t_end: float | None = None, max_steps: int | None = None) -> RunOutcome:
    """Continue from a snapshot.

    Diagnostics rows of the originating run up to the snapshot step are
    copied in front of the new rows, so the resumed CSV matches a straight
    run.  ``t_end`` and ``max_steps`` optionally extend the original budget.
    """
    state, meta, cfg = io.load_snapshot(snapshot)
    flow = cfg.flow
    changes = {k: v for k, v in (("t_end", t_end), ("max_steps", max_steps)) if v is not None}
    if changes:
        flow = dataclasses.replace(flow, **changes)
    step = int(meta["step"])
    csv_path, _ = io.snapshot_paths(snapshot)
    source = csv_path.parent.parent if csv_path.parent.name == SNAPSHOTS else csv_path.parent
    prefix = []
    if (source / DIAGNOSTICS).is_file():
        prefix = [row for row in io.read_diagnostics(source / DIAGNOSTICS) if int(row[0]) <= step]
    return _execute(cfg, state, out_dir, flow=flow, forced=bool(meta.get("forced")), step_offset=step,
                    initial_dt=float(meta["last_dt"]), prefix_rows=prefix, resumed_from=str(csv_path))


def report_run(run_dir) -> dict:
    """Regenerate plots and refresh the CSV-derived fields of ``summary.json``."""
    run = Path(run_dir)
    rows = io.read_diagnostics(run / DIAGNOSTICS)
    cols = io.diagnostics_columns(rows)
    plots.write_plots(cols, run / PLOTS)
    summary = io.read_json(run / SUMMARY) if (run / SUMMARY).is_file() else {}
    if rows:
        summary.update({
            "rows": len(rows),
            "final_step": int(cols["step"][-1]),
            "final_time": float(cols["t"][-1]),
            "final_max_lambda": float(cols["max_lambda"][-1]),
            "min_star_omega_cumulative_decrease_rows": io.cumulative_decrease(cols["min_star_omega"]),
        })
    io.write_json(run / SUMMARY, summary)
    return summary
