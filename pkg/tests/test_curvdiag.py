from __future__ import annotations

import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from graphflow.curvdiag import (
    CSV_COLUMNS,
    DiagnosticsRecord,
    compute_diagnostics,
    curvature_term_34,
    grad_log_omega_check,
    mean_curvature,
    monitor_values,
    norm_A_squared,
    normal_defect,
    quadratic_terms,
    residual_34,
    second_fundamental_form,
    sff_from_derivatives,
)
from graphflow.gridcalc import MapState, grid_for
from graphflow.refinement import errors_at
from graphflow.spaceform import SpaceForm

TWO_PI = 2 * np.pi
CIRCLE = SpaceForm.torus([TWO_PI])
TORUS2 = SpaceForm.torus([TWO_PI, TWO_PI])
SPHERE = SpaceForm.sphere()


def linear_state(a, n=16, time=0.0):
    a = np.asarray(a, dtype=float)
    grid = grid_for(TORUS2, n)
    return MapState(TORUS2, TORUS2, grid, grid.coords() @ a.T, time=time, winding=(a * TWO_PI).T)


def constant_sphere_state(n=16, time=0.0):
    grid = grid_for(TORUS2, n)
    vals = np.broadcast_to([np.pi / 2, 0.3], grid.shape + (2,)).copy()
    return MapState(TORUS2, SPHERE, grid, vals, time=time)


def test_sff_vanishes_for_linear_torus_map():
    s = linear_state([[1.0, 0.5], [-0.25, 2.0]])
    np.testing.assert_allclose(second_fundamental_form(s).h, 0.0, atol=1e-12)


def test_sff_vanishes_for_constant_map_into_sphere():
    sff = second_fundamental_form(constant_sphere_state())
    np.testing.assert_allclose(sff.h, 0.0, atol=1e-14)


def test_one_dimensional_parabola_at_vertex():
    sff = sff_from_derivatives([0.0], [0.0], [[0.0]], [[[1.0]]], CIRCLE, CIRCLE)
    assert sff.h.shape == (1, 1, 1)
    assert sff.h[0, 0, 0] == pytest.approx(1.0, abs=1e-15)
    assert mean_curvature(sff)[0] == pytest.approx(1.0, abs=1e-15)


@pytest.mark.parametrize("slope,second", [(0.5, 1.0), (-2.0, 0.3), (1.0, -1.5)])
def test_one_dimensional_curve_curvature(slope, second):
    sff = sff_from_derivatives([0.4], [0.1], [[slope]], [[[second]]], CIRCLE, CIRCLE)
    assert abs(sff.h[0, 0, 0]) == pytest.approx(abs(second) / (1 + slope**2) ** 1.5, rel=1e-13)


def test_graph_curvature_of_sine_curve_on_grid():
    # f = 0.3 sin x on the circle; curvature f''/(1+f'^2)^(3/2) to O(h^2).
    grid = grid_for(CIRCLE, 256)
    x = grid.coords()[..., 0]
    s = MapState(CIRCLE, CIRCLE, grid, (0.3 * np.sin(x))[..., None])
    h = np.abs(second_fundamental_form(s).h[..., 0, 0, 0])
    exact = np.abs(-0.3 * np.sin(x)) / (1 + (0.3 * np.cos(x)) ** 2) ** 1.5
    np.testing.assert_allclose(h, exact, atol=1e-3)


def test_mean_curvature_examples():
    h = np.zeros((1, 2, 2))
    h[0, 0, 0], h[0, 1, 1] = 1.0, -1.0
    assert mean_curvature(h)[0] == 0.0
    h[0, 1, 1] = 2.0
    assert mean_curvature(h)[0] == 3.0


def test_norm_A_squared_examples():
    h = np.zeros((2, 2, 2))
    assert norm_A_squared(h) == 0.0
    h[1, 0, 1] = 2.0
    assert norm_A_squared(h) == 4.0


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 4), st.integers(1, 4), st.integers(0, 2**32 - 1))
def test_norm_A_squared_brute_force(m, n, seed):
    rng = np.random.default_rng(seed)
    h = rng.standard_normal((m, n, n))
    brute = sum(h[p, i, j] ** 2 for p in range(m) for i in range(n) for j in range(n))
    assert norm_A_squared(h) == pytest.approx(brute, abs=1e-14 * max(1.0, brute))


def quadratic_brute(h, lam):
    m, n = h.shape[0], lam.shape[0]
    hn = lambda p, i, k: h[p, i, k] if p < m else 0.0
    total = np.sum(h**2)
    for i, k in itertools.product(range(n), repeat=2):
        total += lam[i] ** 2 * hn(i, i, k) ** 2
    for i, j, k in itertools.product(range(n), repeat=3):
        if i < j:
            total += 2 * lam[i] * lam[j] * hn(j, i, k) * hn(i, j, k)
    return total


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 4), st.integers(1, 4), st.integers(0, 2**32 - 1))
def test_quadratic_terms_brute_force(m, n, seed):
    rng = np.random.default_rng(seed)
    h = rng.standard_normal((m, n, n))
    h = 0.5 * (h + np.swapaxes(h, 1, 2))
    lam = np.sort(rng.uniform(0, 3, n))[::-1]
    lam[min(n, m):] = 0.0
    assert quadratic_terms(h, lam) == pytest.approx(quadratic_brute(h, lam), rel=1e-12, abs=1e-12)


def test_quadratic_terms_reduce_to_norm_when_lambda_vanishes():
    rng = np.random.default_rng(1)
    h = rng.standard_normal((2, 2, 2))
    assert quadratic_terms(h, np.zeros(2)) == pytest.approx(norm_A_squared(h), rel=1e-15)
    assert quadratic_terms(np.zeros((2, 2, 2)), np.array([1.5, 0.5])) == 0.0


def test_log_omega_curvature_term_examples():
    assert curvature_term_34([1.0, 0.0], 1.0, 1.0, 2) == pytest.approx(0.5, abs=1e-15)
    assert curvature_term_34([0.0, 0.0], 1.0, 1.0, 2) == 0.0
    assert curvature_term_34([1.3, 0.7], 0.0, 0.0, 2) == 0.0


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 5), st.floats(-2, 2), st.floats(-2, 2), st.integers(0, 2**32 - 1))
def test_log_omega_curvature_term_brute_force(n, k1, k2, seed):
    lam = np.random.default_rng(seed).uniform(0, 3, n)
    brute = 0.0
    for i in range(n):
        inner = (k1 + k2) * sum(1 / (1 + lam[j] ** 2) for j in range(n) if j != i) + k2 * (1 - n)
        brute += lam[i] ** 2 / (1 + lam[i] ** 2) * inner
    assert curvature_term_34(lam, k1, k2, n) == pytest.approx(brute, rel=1e-12, abs=1e-12)


@pytest.mark.parametrize("state", [constant_sphere_state(), linear_state([[0.5, 0.0], [0.2, -0.3]])],
                         ids=["constant", "linear"])
def test_grad_log_omega_trivial_maps(state):
    fd, formula = grad_log_omega_check(state)
    np.testing.assert_allclose(fd, 0.0, atol=1e-12)
    np.testing.assert_allclose(formula, 0.0, atol=1e-12)


@pytest.mark.parametrize("make", [constant_sphere_state, lambda time=0.0: linear_state([[0.5, 0.0], [0.2, -0.3]], time=time)],
                         ids=["constant", "linear"])
def test_log_omega_residual_trivial_maps(make):
    s0, s1 = make(), make(time=1e-3)
    np.testing.assert_allclose(residual_34(s0, s1), 0.0, atol=1e-10)
    np.testing.assert_allclose(normal_defect(s0), 0.0, atol=1e-12)


def test_log_omega_residual_needs_increasing_time():
    s = constant_sphere_state()
    with pytest.raises(ValueError):
        residual_34(s, s)


def test_consistency_measures_converge_at_second_order():
    coarse, fine = errors_at("torus_sphere", 16), errors_at("torus_sphere", 32)
    for key in coarse:
        assert 3.0 < coarse[key] / fine[key] < 5.0, key


def test_monitor_values_examples():
    so, ml, am, sd = monitor_values(np.array([[0.0, 0.0], [1.0, 0.5]]))
    assert so == pytest.approx(1 / np.sqrt(2 * 1.25))
    assert ml == 1.0
    assert am == pytest.approx(2 * (1 - 0.25) / (2 * 1.25))
    assert sd == pytest.approx(0.0)


def test_csv_columns_and_row_format():
    assert ",".join(CSV_COLUMNS) == (
        "step,t,dt,min_star_omega,max_lambda,min_area_margin,min_S_diag,max_A_sq,max_H_norm,"
        "max_normal_defect,max_residual_34"
    )
    rec = DiagnosticsRecord(3, 0.1, 0.01, 1.0, 0.0, 2.0, 1.0, 0.0, 0.0, 0.0)
    row = rec.row()
    assert row[0] == "3"
    assert row[1] == "0.1"
    assert row[-1] == "nan"
    assert [float(v) for v in row[1:-1]] == [0.1, 0.01, 1.0, 0.0, 2.0, 1.0, 0.0, 0.0, 0.0]


def test_compute_diagnostics_constant_map():
    rec = compute_diagnostics(constant_sphere_state(), 0, 0.0)
    assert rec.min_star_omega == 1.0
    assert rec.max_lambda == 0.0
    assert rec.min_area_margin == 2.0
    assert rec.max_A_sq == 0.0
    assert np.isnan(rec.max_residual_34)
