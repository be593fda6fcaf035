import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from dirichlet_lab.rigged_space import (
    DimensionError,
    RiggedBasis,
    default_basis,
    inner_minus,
    inner_plus,
    norm_minus,
    norm_plus,
    norm_zero,
    one_sided_bound,
    project,
)

B23 = RiggedBasis((2.0, 3.0))
B12 = RiggedBasis((1.0, 2.0))


def test_minus_norm_examples():
    assert norm_minus([1, 0], B23) == pytest.approx(0.5)
    assert norm_minus([0, 0], B23) == 0.0
    assert norm_minus([1, 1], B12) == pytest.approx(1.118033988749895)


def test_plus_norm_examples():
    assert norm_plus([1, 0], B23) == pytest.approx(2.0)
    assert norm_plus([0, 1], B23) == pytest.approx(3.0)
    assert norm_plus([1, 1], B12) == pytest.approx(np.sqrt(5.0))


def test_zero_norm_examples():
    assert norm_zero([3, 4]) == pytest.approx(5.0)
    assert norm_zero([0, 0, 0]) == 0.0
    assert norm_zero([1, 1, 1]) == pytest.approx(np.sqrt(3.0))


def test_inner_products():
    assert inner_plus([1, 0], [1, 0], B23) == pytest.approx(4.0)
    assert inner_plus([1, 0], [0, 1], B23) == 0.0
    assert inner_plus([1, 2], [2, 1], B12) == pytest.approx(10.0)


def test_projection():
    np.testing.assert_array_equal(project([1, 2, 3], 2), [1, 2])
    np.testing.assert_array_equal(project([1, 2, 3], 3), [1, 2, 3])
    np.testing.assert_array_equal(project(project([5, 6, 7, 8], 3), 2), [5, 6])
    with pytest.raises(DimensionError):
        project([1, 2], 3)


def test_basis_validation():
    with pytest.raises(ValueError):
        RiggedBasis((0.5, 1.0))
    with pytest.raises(ValueError):
        RiggedBasis((2.0, 1.0))
    with pytest.raises(DimensionError):
        norm_plus([1, 2, 3], B12)


def test_parse_and_power():
    assert RiggedBasis.parse("power:1", 3).lambdas == (1.0, 2.0, 3.0)
    assert RiggedBasis.parse("1, 2, 3.5").lambdas == (1.0, 2.0, 3.5)
    assert default_basis(4).N == 4
    assert np.all(np.diff(default_basis(50).hs_partial_sums()) > 0)


def test_one_sided_bound_closed_forms():
    w = np.array([1.0, 2.0])
    assert one_sided_bound(-np.eye(2), w) == pytest.approx(-1.0)
    assert one_sided_bound(np.zeros((2, 2)), w) == pytest.approx(0.0)
    rot = np.array([[0.0, -1.0], [1.0, 0.0]])
    assert one_sided_bound(rot, np.ones(2)) == pytest.approx(0.0, abs=1e-15)


vec = arrays(np.float64, 4, elements=st.floats(-1e3, 1e3))
lams = st.lists(st.floats(1.0, 50.0), min_size=4, max_size=4).map(lambda v: RiggedBasis(tuple(sorted(v))))


@given(vec, vec, lams)
def test_triangle_inequality(x, y, basis):
    for norm in (lambda v: norm_minus(v, basis), lambda v: norm_plus(v, basis), norm_zero):
        assert norm(x + y) <= norm(x) + norm(y) + 1e-9 * (1 + norm(x) + norm(y))


@given(vec, st.floats(-100, 100), lams)
def test_homogeneity(x, a, basis):
    for norm in (lambda v: norm_minus(v, basis), lambda v: norm_plus(v, basis), norm_zero):
        assert norm(a * x) == pytest.approx(abs(a) * norm(x), rel=1e-12, abs=1e-12)


@given(vec, lams)
def test_norm_ordering(x, basis):
    # λ >= 1 makes the rigging a chain: |x|_- <= |x|_0 <= |x|_+
    assert norm_minus(x, basis) <= norm_zero(x) * (1 + 1e-12) + 1e-300
    assert norm_zero(x) <= norm_plus(x, basis) * (1 + 1e-12) + 1e-300


@given(vec, vec, lams)
def test_duality_pairing(x, y, basis):
    # |(x, y)_0| <= |x|_+ |y|_-
    assert abs(np.dot(x, y)) <= norm_plus(x, basis) * norm_minus(y, basis) * (1 + 1e-12) + 1e-9
    assert inner_minus(x, x, basis) == pytest.approx(norm_minus(x, basis) ** 2, rel=1e-12, abs=1e-12)
