from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from graphflow.errors import DegenerateMetric
from graphflow.gridcalc import (
    MapState,
    grid_for,
    hessian_field,
    induced_metric,
    jet_at,
    jets_field,
    laplace_beltrami,
    pad,
    read_snapshot_values,
    write_snapshot,
)
from graphflow.spaceform import SpaceForm, sphere_to_ambient

TWO_PI = 2 * np.pi
TORUS2 = SpaceForm.torus([TWO_PI, TWO_PI])
SPHERE = SpaceForm.sphere()


def torus_map(n, fn, target=TORUS2):
    grid = grid_for(TORUS2, n)
    x = grid.coords()
    return MapState(TORUS2, target, grid, fn(x[..., 0], x[..., 1]))


def test_torus_grid_layout():
    g = grid_for(SpaceForm.torus([TWO_PI, 3.0]), (8, 6))
    assert g.shape == (8, 6)
    assert g.spacing == pytest.approx((TWO_PI / 8, 0.5))
    assert g.periodic == (True, True)
    assert g.pole_axis is None


def test_sphere_grid_avoids_poles():
    g = grid_for(SPHERE, (8, 16))
    theta = g.axes()[0]
    assert theta[0] == pytest.approx(np.pi / 16)
    assert theta[-1] == pytest.approx(np.pi - np.pi / 16)
    with pytest.raises(ValueError):
        grid_for(SPHERE, (8, 15))


def test_pole_ghosts_continue_smooth_fields_across_the_pole():
    g = grid_for(SPHERE, (8, 16))
    x = g.coords()
    ambient = sphere_to_ambient(SPHERE, x)
    padded = pad(ambient, g, 1)
    th = g.spacing[0] / 2
    phi = g.axes()[1]
    # Ghost above the first row sits at latitude -h/2, i.e. (h/2, phi + pi).
    expected = np.stack([-np.sin(th) * np.cos(phi), -np.sin(th) * np.sin(phi), np.full_like(phi, np.cos(th))], -1)
    np.testing.assert_allclose(padded[0, 1:-1], expected, atol=1e-15)


def test_constant_map_jet_vanishes():
    s = torus_map(8, lambda u, v: np.stack([0 * u + 1.5, 0 * v - 0.5], -1))
    jet = jet_at(s, (3, 4))
    np.testing.assert_array_equal(jet.df, 0.0)
    np.testing.assert_array_equal(jet.d2f, 0.0)


def test_linear_map_jet_exact_across_seams():
    a = np.array([[1.0, 2.0], [0.0, -1.0]])
    grid = grid_for(TORUS2, 8)
    vals = grid.coords() @ a.T
    s = MapState(TORUS2, TORUS2, grid, vals, winding=(a * TWO_PI).T)
    df, d2f = jets_field(s)
    np.testing.assert_allclose(df, np.broadcast_to(a, df.shape), atol=1e-13)
    np.testing.assert_allclose(d2f, 0.0, atol=1e-12)


def test_sine_derivative_oracle():
    s = torus_map(64, lambda u, v: np.stack([np.sin(u), 0 * v], -1))
    h = np.pi / 32
    jet = jet_at(s, (0, 0))
    # Leading truncation term of the centered difference: max|third derivative| h^2 / 6.
    assert abs(jet.df[0, 0] - 1.0) <= h**2 / 6
    assert jet.df[0, 0] == pytest.approx(np.sin(h) / h, rel=1e-14)


@settings(max_examples=30, deadline=None)
@given(st.floats(-3, 3), st.floats(-3, 3), st.floats(-3, 3))
def test_hessian_of_quadratic_exact(a, b, c):
    # Periodic stencils are exact on quadratics away from the seam.
    grid = grid_for(TORUS2, 16)
    x = grid.coords()
    u = a * x[..., 0] ** 2 + b * x[..., 0] * x[..., 1] + c * x[..., 1] ** 2
    hess = hessian_field(u, grid)[4:12, 4:12]
    np.testing.assert_allclose(hess[..., 0, 0], 2 * a, atol=1e-9)
    np.testing.assert_allclose(hess[..., 0, 1], b, atol=1e-9)
    np.testing.assert_allclose(hess[..., 1, 1], 2 * c, atol=1e-9)


def test_induced_metric_examples():
    g = np.eye(2)
    np.testing.assert_array_equal(induced_metric(np.zeros((2, 2)), g, g), g)
    np.testing.assert_array_equal(induced_metric(np.eye(2), g, g), 2 * np.eye(2))
    df = np.array([[1.0, 0.0], [2.0, 1.0]])
    lam = induced_metric(df, g, g)
    manual = np.array([[g[i, j] + sum(df[a, i] * df[a, j] for a in range(2)) for j in range(2)] for i in range(2)])
    np.testing.assert_array_equal(lam, [[6.0, 2.0], [2.0, 2.0]])
    np.testing.assert_array_equal(lam, manual)


def test_induced_metric_rejects_degenerate_domain_metric():
    with pytest.raises(DegenerateMetric):
        induced_metric(np.zeros((2, 2)), np.diag([1.0, 0.0]), np.eye(2))


def test_laplace_beltrami_trivial_cases():
    s = torus_map(16, lambda u, v: np.stack([0 * u, 0 * v], -1))
    np.testing.assert_allclose(laplace_beltrami(np.full(s.grid.shape, 3.0), s), 0.0, atol=1e-14)
    x = s.coords()
    # Affine in the first coordinate away from the seam.
    lb = laplace_beltrami(0.3 * x[..., 0] - 1.0, s)
    np.testing.assert_allclose(lb[2:-2], 0.0, atol=1e-13)


def test_laplace_beltrami_on_linear_graph():
    # Graph of f = (x1/2, 0): the induced metric is diag(5/4, 1) and constant,
    # so the operator is exact up to the compact-stencil factor.
    a = np.array([[0.5, 0.0], [0.0, 0.0]])
    grid = grid_for(TORUS2, 16)
    lin = MapState(TORUS2, TORUS2, grid, grid.coords() @ a.T, winding=(a * TWO_PI).T)
    x = grid.coords()
    h = grid.spacing[0]
    shrink = np.sin(h / 2) ** 2 / (h / 2) ** 2
    u = np.cos(x[..., 0]) + np.cos(x[..., 1])
    expected = -shrink * (np.cos(x[..., 0]) / 1.25 + np.cos(x[..., 1]))
    np.testing.assert_allclose(laplace_beltrami(u, lin), expected, atol=1e-13)


def test_laplace_beltrami_flat_sine_second_order():
    errs = []
    for n in (16, 32, 64):
        s = torus_map(n, lambda u, v: np.stack([0 * u, 0 * v], -1))
        x = s.coords()
        errs.append(np.max(np.abs(laplace_beltrami(np.sin(x[..., 0]), s) + np.sin(x[..., 0]))))
    ratios = [errs[i] / errs[i + 1] for i in range(2)]
    assert all(3.9 < r < 4.1 for r in ratios)
    # Frozen oracle: the compact stencil gives -sin(x) * sin^2(h/2) / (h/2)^2.
    h = TWO_PI / 64
    assert errs[-1] == pytest.approx(1 - np.sin(h / 2) ** 2 / (h / 2) ** 2, rel=1e-6)


def test_laplace_beltrami_round_sphere_eigenfunction():
    errs = []
    for n in (16, 32):
        grid = grid_for(SPHERE, (n, 2 * n))
        x = grid.coords()
        s = MapState(SPHERE, SPHERE, grid, np.broadcast_to([np.pi / 2, 0.0], grid.shape + (2,)).copy())
        u = np.cos(x[..., 0])
        err = np.abs(laplace_beltrami(u, s) + 2 * u)
        errs.append(np.max(err))
    assert errs[0] / errs[1] == pytest.approx(4.0, rel=0.1)


def test_snapshot_round_trip_is_bitwise(tmp_path):
    grid = grid_for(SPHERE, (6, 12))
    rng = np.random.default_rng(3)
    vals = np.stack([rng.uniform(0.5, 2.5, grid.shape), rng.uniform(-3, 3, grid.shape)], -1)
    s = MapState(SPHERE, SPHERE, grid, vals)
    write_snapshot(s, tmp_path / "snap.csv")
    back = read_snapshot_values(tmp_path / "snap.csv", grid, 2)
    np.testing.assert_array_equal(back, vals)
    header = (tmp_path / "snap.csv").read_text().splitlines()[0]
    assert header == "i1,i2,x1,x2,f1,f2"
