from fractions import Fraction
from math import factorial

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from dirichlet_lab.hermite_wick import (
    hermite_coefficients,
    hermite_coefficients_recurrence,
    hermite_eval,
    hermite_eval_power_sum,
    wick_power,
    wick_powers,
)


def test_hermite_examples():
    assert hermite_eval(0, 3.7) == 1.0
    assert hermite_eval(2, 1.0) == pytest.approx(0.0)
    assert hermite_eval(3, 2.0) == pytest.approx(2.0)


def test_wick_examples():
    assert wick_power(5.0, 1.0, 0) == 1.0
    assert wick_power(2.0, 1.0, 2) == pytest.approx(3.0)
    assert wick_power(3.0, 4.0, 2) == pytest.approx(5.0)


@pytest.mark.parametrize("n", range(21))
def test_coefficients_match_recurrence_exactly(n):
    a = [Fraction(c) for c in hermite_coefficients(n)]
    b = [Fraction(c) for c in hermite_coefficients_recurrence(n)]
    assert a == b


def test_rejects_bad_input():
    with pytest.raises(ValueError):
        hermite_coefficients(-1)
    with pytest.raises(ValueError):
        wick_power(1.0, 0.0, 2)


@given(st.integers(0, 12), st.floats(-4, 4))
def test_power_sum_and_recurrence_routes_agree(n, t):
    assert hermite_eval(n, t) == pytest.approx(hermite_eval_power_sum(n, t), rel=1e-9, abs=1e-9)


@given(st.integers(1, 10), st.floats(-3, 3), st.floats(0.1, 5))
def test_wick_scaling(n, z, c):
    # :z^n:_c = c^{n/2} H_n(z / sqrt c)
    assert wick_power(z, c, n) == pytest.approx(c ** (n / 2) * hermite_eval_power_sum(n, z / np.sqrt(c)),
                                                 rel=1e-9, abs=1e-9)


@given(st.integers(1, 10), st.floats(-3, 3), st.floats(0.1, 5))
def test_derivative_lowers_degree(n, z, c):
    # d/dz :z^n: = n :z^{n-1}:, checked by central differences
    h = 1e-5
    fd = (wick_power(z + h, c, n) - wick_power(z - h, c, n)) / (2 * h)
    assert fd == pytest.approx(n * wick_power(z, c, n - 1), rel=1e-5, abs=1e-5)


def test_orthogonality_monte_carlo():
    c = 1.5
    g = np.random.default_rng(3).standard_normal(400_000) * np.sqrt(c)
    W = wick_powers(g, c, 4)
    for n in range(5):
        for m in range(5):
            prod = W[n] * W[m]
            target = factorial(n) * c**n if n == m else 0.0
            se = prod.std() / np.sqrt(g.size)
            assert abs(prod.mean() - target) <= 4 * se + 1e-12
