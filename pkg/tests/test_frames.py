from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from graphflow.errors import ArityError, DegenerateMetric
from graphflow.frames import (
    SingularData,
    adapted_frames,
    area_margin,
    p2_matrix,
    product_metric,
    s_restriction,
    s_tensor,
    singular_frames,
    singular_values,
    star_omega,
    wedge_pairs,
)


def spd(rng, k):
    a = rng.standard_normal((k, k))
    return a @ a.T + k * np.eye(k)


def test_zero_differential():
    sd = singular_frames(np.zeros((2, 3)), np.eye(3), np.eye(2))
    np.testing.assert_array_equal(sd.lambdas, 0.0)
    assert sd.rank == 0


def test_identity_between_flat_tori():
    sd = singular_frames(np.eye(2), np.eye(2), np.eye(2))
    np.testing.assert_allclose(sd.lambdas, [1.0, 1.0], atol=1e-15)
    np.testing.assert_allclose(sd.a_domain, np.eye(2), atol=1e-15)


def test_diagonal_differential_uses_coordinate_axes():
    df = np.diag([2.0, 0.5])
    sd = singular_frames(df, np.eye(2), np.eye(2))
    np.testing.assert_allclose(sd.lambdas, [2.0, 0.5], atol=1e-15)
    np.testing.assert_allclose(np.abs(sd.a_domain), np.eye(2), atol=1e-15)
    brute = np.sqrt(np.sort(np.linalg.eigvalsh(df.T @ df))[::-1])
    np.testing.assert_allclose(sd.lambdas, brute, atol=1e-15)


def test_singular_values_against_generalized_eigenproblem():
    rng = np.random.default_rng(0)
    for n, m in [(2, 2), (3, 2), (2, 3), (1, 2), (4, 4)]:
        df = rng.standard_normal((m, n))
        g, h = spd(rng, n), spd(rng, m)
        lam = singular_values(df, g, h)
        # lambda^2 are the eigenvalues of g^-1 df^T h df
        ev = np.sort(np.linalg.eigvals(np.linalg.solve(g, df.T @ h @ df)).real)[::-1]
        np.testing.assert_allclose(lam**2, np.clip(ev, 0, None), atol=1e-12)


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 4), st.integers(1, 4), st.integers(0, 2**32 - 1))
def test_singular_frames_invariants(n, m, seed):
    rng = np.random.default_rng(seed)
    df = rng.standard_normal((m, n)) * rng.uniform(0, 3)
    if n > 1 and rng.random() < 0.3:
        df[:, -1] = 0.0  # rank deficiency
    g, h = spd(rng, n), spd(rng, m)
    sd = singular_frames(df, g, h)
    lam = sd.lambdas
    assert np.all(lam >= 0)
    assert np.all(np.diff(lam) <= 1e-12)
    assert np.all(lam[sd.rank:] == 0)
    np.testing.assert_allclose(sd.a_domain.T @ g @ sd.a_domain, np.eye(n), atol=1e-10)
    np.testing.assert_allclose(sd.a_target.T @ h @ sd.a_target, np.eye(m), atol=1e-10)
    for i in range(n):
        image = df @ sd.a_domain[:, i]
        expected = lam[i] * sd.a_target[:, i] if i < m else np.zeros(m)
        np.testing.assert_allclose(image, expected, atol=1e-10 * (1 + lam[0]))


def test_degenerate_metric_rejected():
    with pytest.raises(DegenerateMetric):
        singular_values(np.eye(2), np.diag([1.0, -1.0]), np.eye(2))


def test_adapted_frames_zero_lambda():
    sd = SingularData(np.zeros(2), 0, np.eye(2), np.eye(3))
    fr = adapted_frames(sd)
    np.testing.assert_array_equal(fr.tangent, np.eye(5)[:, :2])
    np.testing.assert_array_equal(fr.normal, np.eye(5)[:, 2:])


def test_adapted_frames_unit_lambda():
    sd = SingularData(np.array([1.0, 0.0]), 1, np.eye(2), np.eye(2))
    fr = adapted_frames(sd)
    a1, a3 = np.eye(4)[0], np.eye(4)[2]
    np.testing.assert_allclose(fr.tangent[:, 0], (a1 + a3) / np.sqrt(2), atol=1e-15)
    np.testing.assert_allclose(fr.normal[:, 0], (a3 - a1) / np.sqrt(2), atol=1e-15)


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 4), st.integers(1, 4), st.integers(0, 2**32 - 1))
def test_adapted_frames_orthonormal(n, m, seed):
    rng = np.random.default_rng(seed)
    df = rng.standard_normal((m, n)) * 2
    g, h = spd(rng, n), spd(rng, m)
    fr = adapted_frames(singular_frames(df, g, h)).all()
    gram = fr.T @ product_metric(g, h) @ fr
    np.testing.assert_allclose(gram, np.eye(n + m), atol=1e-12 * (1 + np.max(np.abs(df))) ** 2)


def test_s_restriction_examples():
    diag, full = s_restriction(np.zeros(2), 3)
    np.testing.assert_array_equal(diag, [1.0, 1.0])
    np.testing.assert_array_equal(full, np.diag([1.0, 1.0, -1.0, -1.0, -1.0]))
    diag, full = s_restriction(np.array([1.0, 0.3]), 2)
    assert full[0, 0] == 0.0  # B_11
    assert full[0, 2] == -1.0  # D_11 = S(e_1, e_{n+1})


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 4), st.integers(1, 4), st.integers(0, 2**32 - 1))
def test_s_restriction_matches_direct_evaluation(n, m, seed):
    rng = np.random.default_rng(seed)
    df = rng.standard_normal((m, n)) * 2
    g, h = spd(rng, n), spd(rng, m)
    sd = singular_frames(df, g, h)
    fr = adapted_frames(sd).all()
    direct = fr.T @ s_tensor(g, h) @ fr
    _, full = s_restriction(sd.lambdas, m)
    np.testing.assert_allclose(full, direct, atol=1e-12 * (1 + np.max(np.abs(df))) ** 2)


def test_star_omega_examples():
    assert star_omega(np.zeros(3)) == 1.0
    assert star_omega(np.array([1.0, 1.0])) == 0.5
    assert star_omega(np.array([0.5, 2.0])) == pytest.approx(1 / np.sqrt(1.25 * 5), rel=1e-15)
    assert star_omega(np.array([0.5, 2.0])) == pytest.approx(0.4, rel=1e-15)


def test_area_margin_examples():
    assert area_margin(np.zeros(2)) == 2.0
    assert area_margin(np.array([1.0, 1.0])) == 0.0
    assert area_margin(np.array([0.5, 0.5])) == pytest.approx(1.2, rel=1e-15)
    assert area_margin(np.array([2.0, 0.4, 0.0])) == pytest.approx(2 * (1 - 4 * 0.16) / (5 * 1.16))
    with pytest.raises(ArityError):
        area_margin(np.array([0.5]))


def test_p2_matrix_examples():
    np.testing.assert_allclose(p2_matrix(np.eye(3)), 2 * np.eye(3))
    np.testing.assert_allclose(np.linalg.eigvalsh(p2_matrix(np.diag([1.0, 2.0, 3.0]))), [3.0, 4.0, 5.0])
    assert wedge_pairs(3) == [(0, 1), (0, 2), (1, 2)]


@settings(max_examples=40, deadline=None)
@given(st.integers(2, 5), st.integers(0, 2**32 - 1))
def test_p2_spectrum_is_pairwise_sums(n, seed):
    rng = np.random.default_rng(seed)
    a = rng.standard_normal((n, n))
    p = a + a.T
    mu = np.linalg.eigvalsh(p)
    sums = np.sort([mu[i] + mu[j] for i, j in wedge_pairs(n)])
    np.testing.assert_allclose(np.linalg.eigvalsh(p2_matrix(p)), sums, atol=1e-9)
