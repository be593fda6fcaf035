import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from dirichlet_lab import presets
from dirichlet_lab.cylinder import constant, coordinate, cosine, gaussian_bump, monomial
from dirichlet_lab.dirichlet_form import (
    apply_A,
    dirichlet_energy,
    invariance_check,
    markov_checks,
    markov_suite,
    symmetry_check,
)
from dirichlet_lab.p_phi2 import gaussian_sample_set
from dirichlet_lab.parabolic_solver import Grid, solve_cauchy

LAM = np.array([1.0, 3.0, 5.0])


@pytest.fixture(scope="module")
def gset():
    return gaussian_sample_set(LAM, 200_000, 13)


def test_energy_examples(gset):
    assert dirichlet_energy(coordinate(1), constant(4.0), gset).value == 0.0
    assert dirichlet_energy(coordinate(1), coordinate(1), gset).value == pytest.approx(1.0, abs=1e-12)


def test_energy_bilinear_exactly(gset):
    f, g1, g2 = gaussian_bump([0.2, 0.1]), cosine(1), monomial([1, 2])
    lhs = dirichlet_energy(f, g1 + g2, gset).value
    rhs = dirichlet_energy(f, g1, gset).value + dirichlet_energy(f, g2, gset).value
    assert lhs == pytest.approx(rhs, rel=1e-12, abs=1e-15)


def test_generator_closed_forms():
    x = np.random.default_rng(0).standard_normal((5, 3))
    beta = -LAM * x
    np.testing.assert_allclose(apply_A(constant(2.0), beta, x), 0.0)
    np.testing.assert_allclose(apply_A(coordinate(1), beta, x), LAM[0] * x[:, 0])
    np.testing.assert_allclose(apply_A(monomial([2]), beta, x), -2 + 2 * LAM[0] * x[:, 0] ** 2)
    single = apply_A(coordinate(2), lambda y: -LAM * y, x[0])
    assert single == pytest.approx(LAM[1] * x[0, 1])


def test_symmetry_examples(gset):
    r = symmetry_check(coordinate(1), coordinate(2), sample_set=gset)
    assert r["status"] == "pass"
    assert all(abs(v["value"]) < 0.02 for v in r["estimates"].values())
    r = symmetry_check(coordinate(1), coordinate(1), sample_set=gset)
    assert r["status"] == "pass"
    assert r["estimates"]["energy"]["value"] == pytest.approx(1.0)
    r = symmetry_check(constant(1.0), constant(1.0), sample_set=gset)
    assert r["status"] == "pass"
    assert r["estimates"]["Af_g"]["value"] == 0.0


@pytest.mark.parametrize("f", [gaussian_bump([0.3]), cosine(2), monomial([1, 1]), monomial([0, 0, 2])])
def test_symmetry_and_invariance_nonlinear(gset, f):
    assert symmetry_check(f, gaussian_bump([0.0, 0.5]), sample_set=gset)["status"] == "pass"
    assert invariance_check(f, sample_set=gset)["status"] == "pass"


def test_markov_examples():
    g = Grid(2, 6.0, 61)
    b = presets.drift("ou", 2)
    bump = solve_cauchy(b, lambda X: np.exp(-np.sum(X**2, axis=0)), 1.0, g, n_snapshots=4)
    assert markov_checks(bump)["positivity"]["pass"]
    assert markov_checks(bump)["contraction"]["pass"]
    one = solve_cauchy(b, 1.0, 1.0, g, n_snapshots=4, check_support=False)
    assert markov_checks(one)["conservation"]["pass"]


@pytest.mark.parametrize("name,d", [("zero", 1), ("ou", 1), ("anti-ou", 1), ("rotation", 2), ("ou+rotation", 2)])
def test_markov_suite_presets(name, d):
    rep = markov_suite(presets.drift(name, d), Grid(d, 6.0, 121 if d == 1 else 61), 1.0)
    assert rep["status"] == "pass"


@given(st.floats(-2, 2), st.floats(-2, 2), st.floats(0.5, 4))
def test_generator_linear_in_beta(a, b, lam):
    x = np.array([[a, b]])
    f = gaussian_bump([0.1, -0.2], 0.9)
    b1, b2 = -lam * x, np.array([[0.3, -0.7]])
    lhs = apply_A(f, b1 + b2, x)
    rhs = apply_A(f, b1, x) + apply_A(f, b2, x) + f.laplacian(x)
    np.testing.assert_allclose(lhs, rhs, rtol=1e-12, atol=1e-12)
