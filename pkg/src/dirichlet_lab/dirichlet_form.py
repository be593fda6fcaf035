"""Dirichlet form, generator and Markov-semigroup checks.

Cylinder functions act on the H0-orthonormal coordinates of a sample set;
the pairing of β with ∇f is the plain coordinate sum Σ_j β_j ∂_j f.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .cylinder import CylinderFunction, constant, from_name, registry  # noqa: F401  (re-exported)
from .p_phi2 import WeightedSampleSet
from .parabolic_solver import DriftFieldFD, Grid, GridSolution, solve_cauchy
from .stats import Estimate, weighted_mean


@dataclass(frozen=True)
class FormEstimate(Estimate):
    inconclusive: bool = False

    def as_dict(self) -> dict:
        return {"value": self.value, "stderr": self.stderr, "inconclusive": self.inconclusive}


def _coords(sample_set: WeightedSampleSet) -> np.ndarray:
    return sample_set.samples if sample_set.coords is None else sample_set.coords


def dirichlet_energy(f: CylinderFunction, g: CylinderFunction, sample_set: WeightedSampleSet) -> FormEstimate:
    """Weighted estimate of ⟨(∇f, ∇g)_0⟩."""
    x = _coords(sample_set)
    K = x.shape[1]
    if max(f.N, g.N) > K:
        raise ValueError(f"cylinder base dimension exceeds sample truncation {K}")
    integrand = np.sum(f.grad(x, K) * g.grad(x, K), axis=1)
    est = weighted_mean(integrand, sample_set.weights)
    return FormEstimate(est.value, est.stderr, sample_set.degenerate)


def apply_A(f: CylinderFunction, beta, sample) -> np.ndarray:
    """A f = -(Δf + Σ_j β_j ∂_j f) at one point (shape (K,)) or a batch (S, K).

    ``beta`` is an array of β values aligned with ``sample`` or a callable of it.
    """
    x = np.asarray(sample, dtype=float)
    single = x.ndim == 1
    x = np.atleast_2d(x)
    b = np.atleast_2d(beta(x) if callable(beta) else np.asarray(beta, dtype=float))
    K = x.shape[1]
    out = -(f.laplacian(x) + np.sum(b * f.grad(x, K), axis=1))
    return out[0] if single else out


def _paired(values_a, values_b, sample_set, sigma):
    diff = weighted_mean(np.asarray(values_a) - np.asarray(values_b), sample_set.weights)
    scale = max(1.0, float(np.max(np.abs(values_a))), float(np.max(np.abs(values_b))))
    if diff.stderr == 0.0:
        ok = abs(diff.value) <= 1e-12 * scale
    else:
        ok = abs(diff.value) <= sigma * diff.stderr
    return {"residual": diff.value, "stderr": diff.stderr, "within": bool(ok)}


def _status(ok: bool, inconclusive: bool) -> str:
    if inconclusive:
        return "inconclusive"
    return "pass" if ok else "fail"


def symmetry_check(f, g, beta=None, sample_set: WeightedSampleSet | None = None, sigma: float = 4.0) -> dict:
    """⟨Af, g⟩, ⟨f, Ag⟩ and E(f, g) on one sample set, with paired residuals at ``sigma``."""
    x = _coords(sample_set)
    K = x.shape[1]
    beta = sample_set.beta if beta is None else beta
    Af = apply_A(f, beta, x)
    Ag = apply_A(g, beta, x)
    fv, gv = f.value(x), g.value(x)
    grad = np.sum(f.grad(x, K) * g.grad(x, K), axis=1)
    w = sample_set.weights
    est = {
        "Af_g": weighted_mean(Af * gv, w).as_dict(),
        "f_Ag": weighted_mean(fv * Ag, w).as_dict(),
        "energy": weighted_mean(grad, w).as_dict(),
    }
    residuals = {
        "Af_g-energy": _paired(Af * gv, grad, sample_set, sigma),
        "f_Ag-energy": _paired(fv * Ag, grad, sample_set, sigma),
        "Af_g-f_Ag": _paired(Af * gv, fv * Ag, sample_set, sigma),
    }
    ok = all(r["within"] for r in residuals.values())
    return {
        "f": f.name,
        "g": g.name,
        "estimates": est,
        "residuals": residuals,
        "sigma": sigma,
        "ess": sample_set.ess,
        "status": _status(ok, sample_set.degenerate),
    }


def invariance_check(f, beta=None, sample_set: WeightedSampleSet | None = None, sigma: float = 4.0) -> dict:
    """⟨A f, 1⟩ should vanish: ν is invariant."""
    x = _coords(sample_set)
    beta = sample_set.beta if beta is None else beta
    est = weighted_mean(apply_A(f, beta, x), sample_set.weights)
    ok = abs(est.value) <= sigma * est.stderr if est.stderr > 0 else abs(est.value) <= 1e-12
    return {"f": f.name, "value": est.value, "stderr": est.stderr,
            "status": _status(bool(ok), sample_set.degenerate)}


# ---------------------------------------------------------------------------
# Markov properties of the grid semigroup
# ---------------------------------------------------------------------------


def markov_checks(solution: GridSolution, tol: float = 1e-6) -> dict:
    """Positivity, sup contraction and, for constant data, conservation on the interior."""
    u = solution.u
    f = u[0]
    f_inf = float(np.max(np.abs(f)))
    interior = solution.grid.interior_mask()
    out = {}
    if np.all(f >= 0):
        worst = float(np.min(u))
        out["positivity"] = {"min_u": worst, "tol": tol, "pass": worst >= -tol}
    sup = float(np.max(np.abs(u)))
    out["contraction"] = {"max_u": sup, "f_sup": f_inf, "tol": tol, "pass": sup <= f_inf + tol}
    if np.ptp(f) == 0.0:
        dev = float(np.max(np.abs(u[:, interior] - f.flat[0])))
        out["conservation"] = {"max_deviation": dev, "tol": tol, "pass": dev <= tol}
    return out


def markov_suite(drift: DriftFieldFD, grid: Grid, T: float = 1.0, tol: float = 1e-6, n_snapshots: int = 16) -> dict:
    """Run a nonnegative bump and f ≡ 1 through the grid semigroup and collect the three properties."""

    def bump(X):
        return np.exp(-0.5 * np.sum((X - 0.25) ** 2, axis=0) / 0.64)

    bump_sol = solve_cauchy(drift, bump, T, grid, n_snapshots=n_snapshots, check_support=False)
    one_sol = solve_cauchy(drift, 1.0, T, grid, n_snapshots=n_snapshots, check_support=False)
    checks = markov_checks(bump_sol, tol)
    checks["conservation"] = markov_checks(one_sol, tol)["conservation"]
    checks["contraction_one"] = markov_checks(one_sol, tol)["contraction"]
    ok = all(v["pass"] for v in checks.values())
    return {"drift": drift.name, "d": grid.d, "points": grid.points_per_axis, "T": T, "checks": checks,
            "status": "pass" if ok else "fail"}
