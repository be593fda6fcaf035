import numpy as np
import pytest

from dirichlet_lab import free_field as ff
from dirichlet_lab.cylinder import constant, coordinate, from_name, gaussian_bump, monomial
from dirichlet_lab.p_phi2 import (
    WickQuadrature,
    WickSpec,
    check_ibp,
    check_drift_conditions,
    delta_tail_norms,
    density_phi,
    drift_alpha,
    drift_delta,
    gaussian_ibp_reduction,
    interaction,
    log_density_phi2,
    perturbative_covariance_check,
    sample_nu,
    wick_integral,
)

UNIT = ff.RectangleDomain()
M1 = ff.build_modes(UNIT, 1)
M8 = ff.build_modes(UNIT, 8)


@pytest.fixture(scope="module")
def quartic_set():
    spec = WickSpec((0, 0, 0, 0, 0.1), 8)
    return spec, sample_nu(spec, M8, 40_000, 21)


def test_wick_integral_examples():
    assert wick_integral(np.array([0.7]), M1, None, 0) == pytest.approx(1.0)
    assert wick_integral(np.array([0.7]), M1, None, 1) == pytest.approx(0.7)


def test_wick_integral_mean_zero():
    z = ff.sample_coefficients(M8, 50_000, 2)
    for n in (1, 2, 3, 4):
        v = wick_integral(z, M8, None, n)
        assert abs(v.mean()) <= 4 * v.std() / np.sqrt(v.size)


def test_interaction_examples():
    assert interaction(np.array([1.3]), WickSpec((0.0,), 1), M1) == 0.0
    spec = WickSpec((0, 0, 1), 1)
    assert interaction(np.array([2.0]), spec, M1) == pytest.approx(3.0)
    neg = WickSpec((0, 0, 0, 0, -1), 8, strict=False)
    assert np.all(np.isfinite(interaction(ff.sample_coefficients(M8, 100, 0), neg, M8)))


def test_density_examples():
    z = np.array([2.0])
    spec = WickSpec((0, 0, 1), 1)
    assert density_phi(z, WickSpec((0.0,), 1), M1) == pytest.approx(1.0)
    assert density_phi(z, WickSpec((0, 0, 2 / 3), 1), M1) == pytest.approx(np.exp(-1.0))
    assert log_density_phi2(z, spec, M1) == pytest.approx(-interaction(z, spec, M1))


def test_drift_delta_examples():
    spec = WickSpec((0.0,), 8)
    np.testing.assert_array_equal(drift_delta(np.zeros(8), spec, M8), np.zeros(8))
    assert drift_delta(np.array([1.5]), WickSpec((0.0,), 1), M1)[0] == pytest.approx(-1.5)
    z = np.random.default_rng(0).standard_normal(8)
    np.testing.assert_allclose(drift_delta(2 * z, spec, M8), 2 * drift_delta(z, spec, M8))


def test_drift_alpha_examples():
    z = np.random.default_rng(1).standard_normal(8)
    np.testing.assert_array_equal(drift_alpha(z, WickSpec((0.0,), 8), M8), np.zeros(8))
    lin = WickSpec((0, 1), 8, strict=False)
    q = WickQuadrature(M8, 2)
    rule = ff.gauss_legendre_rule(UNIT, 20)
    ints = ff.mode_values(M8, rule.x, rule.y) @ rule.weights
    expected = -(ff.eigenvalues(M8) ** -1.0) * ints
    np.testing.assert_allclose(drift_alpha(z, lin, M8, q), expected, atol=1e-12)


def test_spec_sign_validation():
    with pytest.raises(ValueError, match="leading coefficient"):
        WickSpec((0, 0, 0, 0, -0.1), 8)
    with pytest.raises(ValueError, match="even"):
        WickSpec((0, 0, 0, 1.0), 8)
    with pytest.raises(ValueError):
        WickSpec((0.0,), 8, alpha_idx=0.2, delta_idx=1.0)


def test_weighted_set_basics():
    free = sample_nu(WickSpec((0.0,), 8), M8, 1000, 3)
    np.testing.assert_allclose(free.weights, 1 / 1000)
    assert free.mean(np.ones(1000)).value == pytest.approx(1.0, abs=1e-15)


def test_gaussian_ibp_single_coordinate():
    free = WickSpec.free(8)
    lhs, rhs = gaussian_ibp_reduction(free, M8, [1])["pairs"][0]
    assert lhs == pytest.approx(1.0)
    assert rhs == pytest.approx(1.0)


@pytest.mark.parametrize("powers", [[1], [2], [3], [1, 1], [2, 1], [1, 2], [1, 1, 1], [0, 3], [0, 0, 2]])
def test_gaussian_ibp_reduction_exact(powers):
    for lhs, rhs in gaussian_ibp_reduction(WickSpec.free(8), M8, powers)["pairs"]:
        assert lhs == pytest.approx(rhs, rel=1e-12, abs=1e-14)


def test_gaussian_ibp_monte_carlo_all_directions():
    free = WickSpec.free(8)
    ss = sample_nu(free, M8, 40_000, 4)
    fns = [monomial(p) for p in ([1], [2], [3], [1, 1], [0, 2, 1])]
    for f in fns:
        for j in range(1, 9):
            assert check_ibp(free, M8, f, j, ss)["status"] == "pass", (f.name, j)


def test_quartic_ibp(quartic_set):
    spec, ss = quartic_set
    assert ss.ess >= 0.2 * ss.count
    for name in ("bump1", "x1", "cos1", "x1*x2"):
        for j in (1, 2):
            assert check_ibp(spec, M8, from_name(name), j, ss)["status"] == "pass"


def test_constant_row_checks_mean_beta(quartic_set):
    spec, ss = quartic_set
    r = check_ibp(spec, M8, constant(2.0), 1, ss)
    assert r["lhs"]["value"] == 0.0
    assert r["status"] == "pass"


def test_negative_quartic_degenerates():
    spec = WickSpec((0, 0, 0, 0, -0.1), 8, strict=False)
    ss = sample_nu(spec, M8, 20_000, 5)
    assert ss.degenerate
    assert check_ibp(spec, M8, gaussian_bump([0.0]), 1, ss)["status"] == "inconclusive"


def test_drift_conditions_closed_forms(quartic_set):
    spec, ss = quartic_set
    rep = check_drift_conditions(spec, M8, ss, ms=(2, 4, 8))
    assert rep["one_sided_bound"]["c_plus_zero_admissible"]
    assert rep["coercivity"]["eps0"] == 1.0
    assert rep["tail_decay"]["rows"][-1]["value"] == 0.0
    assert rep["tail_decay"]["strictly_decreasing"]
    lam = ff.eigenvalues(M8)
    assert all(v <= 0 for v in rep["one_sided_bound"]["form_at_unit_vectors"])
    np.testing.assert_allclose(rep["one_sided_bound"]["jacobian_diagonal"], -(lam**0.0))


def test_tail_norm_zero_at_full_truncation(quartic_set):
    spec, ss = quartic_set
    assert delta_tail_norms(ss, spec, M8, [8])[0]["value"] == 0.0


def test_perturbative_covariance():
    spec = WickSpec((0, 0, 0, 0, 1e-3), 8)
    ss = sample_nu(spec, M8, 40_000, 6)
    l = np.zeros(8)
    l[:2] = 1 / np.sqrt(2)
    assert perturbative_covariance_check(ss, M8, l)["within"]
