"""Acceptance criteria, one test per criterion.

Each test prints a single ``[criterion N] PASS|FAIL ...`` line (visible with
``pytest -v``) before asserting at the stated tolerance.
"""

from __future__ import annotations

import json
import subprocess
import sys
import time

import numpy as np
import pytest

from graphflow.equation import mcf_rhs
from graphflow.flowcore import FlowConfig, run_flow
from graphflow.gridcalc import MapState, grid_for
from graphflow.harness.cli import main
from graphflow.harness.config import parse_config
from graphflow.harness.presets import linear
from graphflow.harness.runner import execute_run
from graphflow.identities import run_verification
from graphflow.refinement import refinement_battery
from graphflow.spaceform import SpaceForm

TWO_PI = 2 * np.pi


def report(capsys, crit: int, ok: bool, detail: str) -> None:
    with capsys.disabled():
        print(f"\n[criterion {crit:>2}] {'PASS' if ok else 'FAIL'}  {detail}")
    assert ok, detail


def sphere_scenario(rho: float) -> dict:
    return {
        "domain": {"type": "sphere", "curvature": 1.0},
        "target": {"type": "sphere", "curvature": 1.0},
        "grid": {"resolution": [64, 64]},
        "initial": {"preset": "contracted_identity", "rho": rho},
        "flow": {"scheme": "rk4", "cfl": 0.5, "t_end": 20.0, "max_steps": 200_000, "cadence": 10},
        "seed": 0,
    }


@pytest.fixture(scope="module")
def theorem_run(tmp_path_factory):
    out = tmp_path_factory.mktemp("crit6")
    start = time.perf_counter()
    outcome = execute_run(parse_config(sphere_scenario(0.8)), out)
    return outcome, time.perf_counter() - start


CRIT1 = ["star_omega_jacobian", "s_diagonal_eigenvalues", "s_block_form", "curvature_simplification",
         "pair_sum_margin", "pair_sum_identity", "wedge_square_spectrum"]


def test_criterion_01_identity_suite(capsys):
    start = time.perf_counter()
    rows = run_verification(10_000, seed=0, names=set(CRIT1))
    wall = time.perf_counter() - start
    worst = max(r.max_violation for r in rows)
    ok = len(rows) == len(CRIT1) and all(r.samples == 10_000 for r in rows) and worst <= 1e-10 and wall <= 30
    report(capsys, 1, ok, f"{len(rows)} identities x 1e4 draws, max relative violation {worst:.2e}, {wall:.1f}s")


def test_criterion_02_curvature_convention(capsys):
    (row,) = run_verification(10_000, seed=0, names={"curvature_contraction_brute_force"})
    ok = row.samples == 1000 and row.max_violation <= 1e-10
    report(capsys, 2, ok, f"{row.samples} samples, max relative violation {row.max_violation:.2e}")


def test_criterion_03_maximum_principle_inequalities(capsys):
    want = {"distance_decreasing_form": 10_000, "area_decreasing_form": 10_000,
            "sff_pair_inequality": 1000, "quadratic_lower_bound": 10_000}
    rows = run_verification(10_000, seed=0, names=set(want))
    ok = all(r.samples == want[r.name] and r.max_violation <= 1e-12 for r in rows) and len(rows) == 4
    detail = ", ".join(f"{r.name} {r.samples} worst {r.max_violation:.1e}" for r in rows)
    report(capsys, 3, ok, detail)


def test_criterion_04_linear_maps_are_stationary(capsys):
    rng = np.random.default_rng(0)
    cases = []
    for _ in range(6):
        dom = SpaceForm.torus(rng.uniform(1.0, 8.0, 2).tolist())
        tar = SpaceForm.torus(rng.uniform(1.0, 8.0, 2).tolist())
        cases.append((dom, tar, rng.uniform(-3, 3, (2, 2)), False))
    t2 = SpaceForm.torus([TWO_PI, TWO_PI])
    for _ in range(4):
        cases.append((t2, t2, rng.integers(-3, 4, (2, 2)).astype(float), True))
    worst = 0.0
    for n in (32, 64):
        for dom, tar, a, lattice in cases:
            s = linear(dom, tar, grid_for(dom, n), a, rng.uniform(-1, 1, 2), check_lattice=lattice)
            size = float(np.max(np.abs(mcf_rhs(s))))
            worst = max(worst, size / (1 + float(np.sum(a**2))))
    report(capsys, 4, worst <= 1e-10, f"{2 * len(cases)} maps at N=32,64, max |rhs|/(1+|df|^2) = {worst:.2e}")


def test_criterion_05_heat_limit(capsys):
    dom = SpaceForm.torus([TWO_PI, TWO_PI])
    grid = grid_for(dom, 64)
    x = grid.coords()
    s0 = MapState(dom, dom, grid, np.stack([1e-3 * np.sin(x[..., 0]), np.zeros(grid.shape)], -1))
    basis = np.sin(x[..., 0])
    norm = float(np.sum(basis**2))
    ts, amps = [0.0], [1e-3]

    def on_step(s, k, dt):
        ts.append(s.time)
        amps.append(float(np.sum(s.values[..., 0] * basis)) / norm)

    start = time.perf_counter()
    res = run_flow(s0, FlowConfig(t_end=0.5, cadence=10_000, rhs_tol=0.0), on_step=on_step)
    wall = time.perf_counter() - start
    slope = np.polyfit(np.array(ts), np.log(np.array(amps)), 1)[0]
    rate = -slope
    ok = res.reason == "TimeBudget" and abs(rate - 1) <= 5e-3 and wall <= 60 and ts[-1] == pytest.approx(0.5)
    report(capsys, 5, ok, f"fitted exponent {rate:.6f} over t in [0, {ts[-1]:.3f}] ({len(ts)} samples), {wall:.1f}s")


@pytest.mark.slow
def test_criterion_06_theorem_scenario(capsys, theorem_run):
    outcome, wall = theorem_run
    s = outcome.summary
    mon = s["monitor"]
    drift = mon["min_star_omega_cumulative_decrease"]
    margin_drop = mon["min_area_margin_initial"] - mon["min_area_margin_lowest"]
    radius = s["final_image_radius"]
    ok_a = drift <= 1e-6
    ok_b = margin_drop <= 1e-6
    ok_c = mon["first_step_max_lambda_below_tol"] is not None and radius <= 1e-2
    ok = ok_a and ok_b and ok_c and wall <= 600 and s["reason"] in ("Converged", "TimeBudget")
    report(capsys, 6, ok,
           f"{s['reason']} at step {s['final_step']} t={s['final_time']:.3f}; (a) min *Omega drift {drift:.1e}; "
           f"(b) margin drop {margin_drop:.1e}; (c) max lambda < 0.01 from step "
           f"{mon['first_step_max_lambda_below_tol']}, image radius {radius:.1e}; {wall:.0f}s")


@pytest.mark.slow
def test_criterion_07_distance_decreasing_scenario(capsys, tmp_path):
    start = time.perf_counter()
    outcome = execute_run(parse_config(sphere_scenario(0.9)), tmp_path)
    wall = time.perf_counter() - start
    mon = outcome.summary["monitor"]
    drop = mon["min_S_diag_initial"] - mon["min_S_diag_lowest"]
    ok = drop <= 1e-6 and outcome.summary["reason"] in ("Converged", "TimeBudget")
    report(capsys, 7, ok, f"{outcome.summary['reason']} at t={outcome.summary['final_time']:.3f}; "
                          f"min S diagonal initial {mon['min_S_diag_initial']:.6f}, drop {drop:.1e}; {wall:.0f}s")


def test_criterion_08_convergence_order(capsys):
    rows = refinement_battery(32)
    ok = len(rows) == 6 and all(r.passed(3.2, 4.8) for r in rows)
    detail = ", ".join(f"{r.state}/{r.measure} {r.ratio:.2f}" for r in rows)
    report(capsys, 8, ok, f"N=32->64 ratios: {detail}")


def _cli_run(tmp_path, raw, *extra):
    tmp_path.mkdir(parents=True, exist_ok=True)
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps(raw))
    out = tmp_path / "out"
    proc = subprocess.run([sys.executable, "-m", "graphflow.harness.cli", "run", "--config", str(cfg),
                           "--out", str(out), *extra], capture_output=True, text=True)
    summary = json.loads((out / "summary.json").read_text()) if (out / "summary.json").is_file() else {}
    return proc, summary


def test_criterion_09_failure_paths(capsys, tmp_path):
    torus = {"type": "torus", "periods": [TWO_PI, TWO_PI]}
    borderline = {"domain": torus, "target": torus, "grid": {"resolution": 16},
                  "initial": {"preset": "linear", "matrix": [[1, 0], [0, 1]]}, "flow": {"t_end": 1.0}}
    p1, s1 = _cli_run(tmp_path / "a", borderline, "--force")
    oversized = {**sphere_scenario(0.8), "grid": {"resolution": [16, 32]}, "flow": {"dt": 0.5, "t_end": 5.0}}
    p2, s2 = _cli_run(tmp_path / "b", oversized)
    lines = [p.stderr.strip().splitlines()[-1] for p in (p1, p2)]
    crashed = any("Traceback" in p.stderr for p in (p1, p2))
    ok = (not crashed and p1.returncode == 3 and p2.returncode == 3
          and s1.get("reason") == "GraphLost" and s2.get("reason") == "Instability"
          and lines[0].startswith("GraphLost: ") and lines[1].startswith("Instability: "))
    report(capsys, 9, ok, f"exit codes {p1.returncode}, {p2.returncode}; '{lines[0][:60]}'; '{lines[1][:60]}'")


@pytest.mark.slow
def test_criterion_10_determinism(capsys, tmp_path, theorem_run):
    outcome, _ = theorem_run
    rerun = tmp_path / "rerun"
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps(sphere_scenario(0.8)))
    code = main(["run", "--config", str(cfg), "--out", str(rerun)])
    first = (outcome.out_dir / "diagnostics.csv").read_bytes()
    second = (rerun / "diagnostics.csv").read_bytes()
    ok = code == 0 and first == second
    report(capsys, 10, ok, f"diagnostics CSV {len(first)} bytes, identical: {first == second}")
