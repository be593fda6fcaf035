import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from dirichlet_lab import free_field as ff

UNIT = ff.RectangleDomain(1.0, 1.0)


def test_spectrum_examples():
    m1 = ff.build_modes(UNIT, 1)
    assert (m1[0].m, m1[0].n, m1[0].eigenvalue) == (0, 0, 1.0)
    lam = ff.eigenvalues(ff.build_modes(UNIT, 3))
    np.testing.assert_allclose(lam, [1, 1 + np.pi**2, 1 + np.pi**2])
    wide = ff.build_modes(ff.RectangleDomain(2.0, 1.0), 2)
    assert (wide[1].m, wide[1].n) == (1, 0)
    assert wide[1].eigenvalue == pytest.approx(1 + np.pi**2 / 4)


def test_h_alpha_norm_examples():
    modes = ff.build_modes(UNIT, 3)
    assert ff.h_alpha_norm([1, 0, 0], modes, -1) == pytest.approx(1.0)
    assert ff.h_alpha_norm([0, 1, 0], modes, -1) == pytest.approx((1 + np.pi**2) ** -0.5, rel=1e-14)
    l = np.array([0.3, -1.2, 2.0])
    assert ff.h_alpha_norm(l, modes, 0) == pytest.approx(np.linalg.norm(l))


def test_point_values():
    m1 = ff.build_modes(UNIT, 1)
    assert ff.field_point_value([1.7], m1, [0.3, 0.8]) == pytest.approx(1.7)
    m5 = ff.build_modes(UNIT, 5)
    assert ff.field_point_value(np.zeros(5), m5, [0.2, 0.4]) == 0.0
    e = np.zeros(5)
    e[1] = 1.0
    assert ff.field_point_value(e, m5, [0.0, 0.0]) == pytest.approx(np.sqrt(2))


def test_local_variance_examples():
    assert ff.local_variance(ff.build_modes(UNIT, 1), [0.4, 0.4]) == pytest.approx(1.0)
    assert ff.local_variance(ff.build_modes(UNIT, 3), [0.5, 0.5]) == pytest.approx(1.0)


def test_local_variance_monte_carlo():
    modes = ff.build_modes(UNIT, 8)
    x = np.array([0.21, 0.67])
    vals = ff.field_point_value(ff.sample_coefficients(modes, 100_000, 5), modes, x) ** 2
    assert abs(vals.mean() - ff.local_variance(modes, x)) <= 4 * vals.std() / np.sqrt(vals.size)


def test_modes_orthonormal():
    for dom in (UNIT, ff.RectangleDomain(2.0, 0.5)):
        G = ff.gram_matrix(ff.build_modes(dom, 12))
        np.testing.assert_allclose(G, np.eye(12), atol=1e-12)


def test_points_outside_rejected():
    with pytest.raises(ff.DomainError):
        ff.field_point_value(np.zeros(1), ff.build_modes(UNIT, 1), [1.5, 0.5])


def test_sampling_deterministic_and_chunk_independent():
    modes = ff.build_modes(UNIT, 6)
    a = ff.sample_coefficients(modes, 20_000, 11)
    b = ff.sample_coefficients(modes, 20_000, 11)
    np.testing.assert_array_equal(a, b)
    assert not np.array_equal(a, ff.sample_coefficients(modes, 20_000, 12))


@given(st.integers(1, 30))
def test_eigenvalues_sorted_and_at_least_one(K):
    lam = ff.eigenvalues(ff.build_modes(UNIT, K))
    assert np.all(np.diff(lam) >= -1e-12)
    assert np.all(lam >= 1.0)
    assert (lam == 1.0).sum() == 1


@given(st.floats(0.05, 3.0), st.floats(0.01, 3.0))
def test_rigging_condition(alpha, delta):
    assert ff.rigging_admissible(alpha, delta) == (alpha > max(0.0, 1 - delta / 2))
