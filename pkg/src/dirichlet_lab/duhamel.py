"""Approximating semigroups and the Duhamel error bound.

A ladder carries the target measure ν (log-derivative β = α + δ on an
ambient grid of dimension D <= 3) together with the approximants α^n, δ^m.
For each rung the projected drift lives on R^{d_{n,m}}; its solution is
lifted back through P_d and compared with the reference solve of the
target drift.  The reference stands in for e^{-tB}.
"""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .apriori_checks import (
    DEFAULT_BUDGET_FACTOR,
    ReferenceMeasureFD,
    _cumtrapz,
    _minus_norm,
    anharmonic_measure,
    gaussian_measure,
    richardson_budget,
)
from .cylinder import CylinderFunction, gaussian_bump
from .parabolic_solver import (
    MAX_DIM,
    ConfigurationError,
    DriftFieldFD,
    Grid,
    GridSolution,
    linear_drift,
    plus_norm_field,
    solve_cauchy,
    zero_drift,
)

log = logging.getLogger(__name__)


# ---------------------------------------------------------------------------
# cutoffs
# ---------------------------------------------------------------------------


def _smooth_step(s):
    """C^∞ step: 0 for s <= 0, 1 for s >= 1."""
    s = np.clip(np.asarray(s, dtype=float), 0.0, 1.0)
    with np.errstate(divide="ignore", over="ignore"):
        a = np.where(s > 0, np.exp(-1.0 / np.where(s > 0, s, 1.0)), 0.0)
        b = np.where(s < 1, np.exp(-1.0 / np.where(s < 1, 1.0 - s, 1.0)), 0.0)
    return a / (a + b)


CUTOFF_GRAD_SUP = 2.0  # max slope of the smooth step, attained at s = 1/2


def cutoff(k: float, X) -> np.ndarray:
    """χ_k(x) = 1 for |x| <= k, 0 for |x| >= k + 1, smooth in between; X has shape (d, ...)."""
    r = np.sqrt(np.sum(np.asarray(X, dtype=float) ** 2, axis=0))
    return 1.0 - _smooth_step(r - k)


# ---------------------------------------------------------------------------
# ladders
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ApproximationLadder:
    """Target ν plus the families n -> α^n and m -> δ^m, each a drift on the ambient grid.

    ``alpha_dims(n)`` and ``delta_dims(m)`` give a_n and N_m, the number of
    leading coordinates the approximants depend on.
    """

    name: str
    measure: ReferenceMeasureFD
    alpha_n: Callable[[int], DriftFieldFD]
    delta_m: Callable[[int], DriftFieldFD]
    alpha_dims: Callable[[int], int]
    delta_dims: Callable[[int], int]
    schedule: tuple = ()
    gamma: float = 0.0
    description: str = ""
    weights: tuple = ()

    @property
    def ambient_dim(self) -> int:
        return self.measure.d

    @property
    def mu(self) -> np.ndarray:
        """Weights of the + / - norms; λ_i = i unless given."""
        if self.weights:
            return np.asarray(self.weights, dtype=float)
        return np.arange(1, self.ambient_dim + 1, dtype=float)

    def effective_dim(self, n: int, m: int) -> int:
        """d_{n,m} = max(m, a_n, N_m), capped at the ambient truncation where P_d is the identity."""
        return min(self.ambient_dim, max(m, self.alpha_dims(n), self.delta_dims(m)))

    def cutoff_radius(self, grid: Grid) -> float:
        """k beyond every grid node, so χ_{n,m,k} = 1 on the box and the cutoff is inactive."""
        return grid.R * math.sqrt(grid.d)


def _restricted(drift: DriftFieldFD, D: int, d: int) -> DriftFieldFD:
    """x in R^d -> P_d drift(x, 0, ..., 0)."""
    if d == D:
        return drift

    def embed(X):
        Z = np.zeros((D,) + X.shape[1:])
        Z[:d] = X
        return Z

    return DriftFieldFD(
        f"P{d}{drift.name}", d,
        lambda X: drift(embed(X))[:d],
        lambda X: drift.jacobian(embed(X))[:d, :d],
    )


def build_projected_drift(ladder: ApproximationLadder, n: int, m: int) -> DriftFieldFD:
    """b^{n,m} = P_d (α^n + δ^m) restricted to R^{d_{n,m}}, keeping the α/δ split."""
    d = ladder.effective_dim(n, m)
    if d > MAX_DIM:
        raise ConfigurationError(f"rung ({n},{m}) needs dimension {d} > {MAX_DIM}")
    D = ladder.ambient_dim
    a = _restricted(ladder.alpha_n(n), D, d)
    dl = _restricted(ladder.delta_m(m), D, d)
    b = a + dl
    return DriftFieldFD(f"b[{n},{m}]", d, b.b, b.jac, a, dl)


def _lift(values: np.ndarray, D: int) -> np.ndarray:
    """Broadcast a function on the R^d grid to the R^D grid (independent of the extra axes)."""
    d = values.ndim
    return np.broadcast_to(values.reshape(values.shape + (1,) * (D - d)), values.shape[:d] + (values.shape[0],) * (D - d))


def _lift_field(vec: np.ndarray, D: int) -> np.ndarray:
    d = vec.shape[0]
    out = np.zeros((D,) + (vec.shape[1],) * D)
    for i in range(d):
        out[i] = _lift(vec[i], D)
    return out


def _initial_values(f: CylinderFunction, grid: Grid, k: float) -> np.ndarray:
    X = grid.mesh
    pts = X.reshape(grid.d, -1).T
    if f.N > grid.d:
        raise ConfigurationError(f"{f.name} depends on {f.N} coordinates but the rung has dimension {grid.d}")
    G = f.value(pts).reshape(grid.shape)
    return cutoff(k, X) * G


def solve_rung(ladder, n, m, f: CylinderFunction, times, R: float, points: int) -> GridSolution:
    b = build_projected_drift(ladder, n, m)
    grid = Grid(b.d, R, points)
    k = ladder.cutoff_radius(grid)
    G = _initial_values(f, grid, k)
    return solve_cauchy(b, G, float(times[-1]), grid, times=times, check_support=False)


def reference_solution(ladder, f: CylinderFunction, T: float, R: float, points: int, n_snapshots: int = 32):
    """The target-drift solve on the ambient grid, standing in for e^{-tB} f."""
    grid = Grid(ladder.ambient_dim, R, points)
    G = _initial_values(f, grid, ladder.cutoff_radius(grid))
    return solve_cauchy(ladder.measure.beta, G, T, grid, n_snapshots=n_snapshots, check_support=False)


# ---------------------------------------------------------------------------
# gap bounds
# ---------------------------------------------------------------------------


def _gap_terms(ladder, n, m, f, t, reference: GridSolution, measure: ReferenceMeasureFD, norm: str):
    grid = reference.grid
    D = grid.d
    k_t = reference.index(t)
    times = reference.times[: k_t + 1]
    approx = solve_rung(ladder, n, m, f, times, grid.R, grid.points_per_axis)
    b = approx.drift
    d = b.d
    nu = measure.weights(grid)
    X = grid.mesh

    diff = reference.u[k_t] - _lift(approx.u[-1], D)
    # drift errors on the ambient grid; components beyond d are not paired with ∇u but stay in the bound
    alpha_app = _lift_field(b.alpha_part(approx.grid.mesh), D)
    delta_app = _lift_field(b.delta_part(approx.grid.mesh), D)
    a_err = np.sqrt(np.sum((measure.alpha(X) - alpha_app) ** 2, axis=0))
    mu = ladder.mu
    d_err = _minus_norm(measure.delta(X) - delta_app, mu)

    grads0, gradsp = [], []
    for k in range(len(times)):
        g = approx.grad(k)
        g0 = np.sqrt(np.sum(g**2, axis=0))
        gp = plus_norm_field(g, mu[:d])
        gradsp.append(float(np.max(gp[approx.grid.interior_mask()])))
        grads0.append(_lift(g0, D))
    pa, pd = (4.0, 2.0) if norm == "L2" else (2.0, 1.0)
    pg = 4.0 if norm == "L2" else 2.0
    a_norm = float(np.sum(nu * a_err**pa)) ** (1.0 / pa)
    d_norm = float(np.sum(nu * d_err**pd)) ** (1.0 / pd)
    g_int = float(_cumtrapz(np.array([np.sum(nu * g**pg) ** (1.0 / pg) for g in grads0]), times)[-1])
    gp_int = float(_cumtrapz(np.array(gradsp), times)[-1])
    if norm == "L2":
        lhs = float(np.sqrt(np.sum(nu * diff**2)))
    else:
        lhs = float(np.sum(nu * np.abs(diff)))
    prefactor = math.exp(t * ladder.gamma)
    rhs = prefactor * (a_norm * g_int + d_norm * gp_int)
    return lhs, rhs, {
        "d_nm": d,
        "alpha_err_norm": a_norm,
        "delta_err_norm": d_norm,
        "grad0_time_integral": g_int,
        "grad_plus_sup_time_integral": gp_int,
        "prefactor": prefactor,
        "cutoff_k": ladder.cutoff_radius(grid),
        "cutoff_active": False,
    }


@dataclass
class GapReport:
    ladder: str
    n: int
    m: int
    t: float
    norm: str
    lhs: float
    rhs: float
    budget: float
    terms: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return self.lhs <= self.rhs + self.budget

    def row(self) -> dict:
        return {"n": self.n, "m": self.m, "t": self.t, "norm": self.norm, "LHS": self.lhs, "RHS": self.rhs,
                "budget": self.budget, "pass": self.passed}

    def as_dict(self) -> dict:
        out = dict(self.row(), ladder=self.ladder)
        out["terms"] = {k: (float(v) if isinstance(v, (float, np.floating)) else v) for k, v in self.terms.items()}
        return out


def _gap(ladder, n, m, f, t, reference, measure, norm, coarse_reference, budget_factor):
    measure = measure or ladder.measure
    lhs, rhs, terms = _gap_terms(ladder, n, m, f, t, reference, measure, norm)
    budget = 0.0
    if coarse_reference is not None:
        lc, rc, _ = _gap_terms(ladder, n, m, f, t, coarse_reference, measure, norm)
        budget = float(richardson_budget(lhs, lc, budget_factor) + richardson_budget(rhs, rc, budget_factor))
        terms.update(lhs_coarse=lc, rhs_coarse=rc)
    return GapReport(ladder.name, n, m, float(t), norm, lhs, rhs, budget, terms)


def duhamel_gap(ladder, n, m, f, t, reference, measure=None, coarse_reference=None,
                budget_factor=DEFAULT_BUDGET_FACTOR) -> GapReport:
    """L²(ν) distance to the reference against e^{tγ}(|α^n-α| L⁴ · ∫||∇u||_4 + |δ^m-δ|_- L² · ∫ sup|∇u|_+)."""
    return _gap(ladder, n, m, f, t, reference, measure, "L2", coarse_reference, budget_factor)


def duhamel_gap_l1(ladder, n, m, f, t, reference, measure=None, coarse_reference=None,
                   budget_factor=DEFAULT_BUDGET_FACTOR) -> GapReport:
    """L¹(ν) distance against e^{tγ}(|α^n-α| L² · ∫||∇u||_2 + |δ^m-δ|_- L¹ · ∫ sup|∇u|_+)."""
    return _gap(ladder, n, m, f, t, reference, measure, "L1", coarse_reference, budget_factor)


# ---------------------------------------------------------------------------
# studies
# ---------------------------------------------------------------------------


def lp_uniqueness_interval(eps0: float) -> tuple:
    """(1 + 1/(1 + √ε0), 1 + 1/(1 - √ε0)); the upper end is +∞ at ε0 = 1."""
    if not (0.0 < eps0 <= 1.0) or not math.isfinite(eps0):
        raise ValueError(f"eps0 must lie in (0, 1], got {eps0}")
    r = math.sqrt(eps0)
    hi = math.inf if eps0 == 1.0 else 1.0 + 1.0 / (1.0 - r)
    return 1.0 + 1.0 / (1.0 + r), hi


def monotone_within_budget(values: Sequence[float], budgets: Sequence[float]) -> bool:
    v = np.asarray(values, dtype=float)
    b = np.asarray(budgets, dtype=float)
    return bool(np.all(v[1:] <= v[:-1] + b[1:] + b[:-1]))


@dataclass
class StudyResult:
    ladder: str
    t: float
    reports: list

    def rows(self) -> list:
        return [r.row() for r in self.reports]

    def write_csv(self, path) -> None:
        rows = self.rows()
        with open(path, "w", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=list(rows[0]))
            writer.writeheader()
            writer.writerows(rows)

    def monotone_in_m(self, norm: str = "L2") -> dict:
        """Per fixed n, whether the gap is non-increasing in m within budget."""
        out = {}
        for n in sorted({r.n for r in self.reports}):
            rs = sorted((r for r in self.reports if r.n == n and r.norm == norm), key=lambda r: r.m)
            out[n] = monotone_within_budget([r.lhs for r in rs], [r.budget for r in rs])
        return out

    @property
    def all_bounds_hold(self) -> bool:
        return all(r.passed for r in self.reports)


def convergence_study(ladder, f, t, schedule=None, R=6.0, points=121, coarse_points=None,
                      n_snapshots=32, budget_factor=DEFAULT_BUDGET_FACTOR) -> StudyResult:
    """Gap table over the schedule (m swept at fixed n, then n advanced)."""
    schedule = list(schedule or ladder.schedule)
    ordered = sorted(schedule, key=lambda nm: (nm[0], nm[1]))
    if ordered != schedule:
        log.info("schedule reordered to sweep m at fixed n")
    ref = reference_solution(ladder, f, t, R, points, n_snapshots)
    coarse = None
    if coarse_points is None:
        coarse_points = (points - 1) // 2 + 1
    if coarse_points:
        coarse = reference_solution(ladder, f, t, R, coarse_points, n_snapshots)
    reports = []
    for n, m in ordered:
        reports.append(duhamel_gap(ladder, n, m, f, t, ref, None, coarse, budget_factor))
        reports.append(duhamel_gap_l1(ladder, n, m, f, t, ref, None, coarse, budget_factor))
    return StudyResult(ladder.name, float(t), reports)


# ---------------------------------------------------------------------------
# presets
# ---------------------------------------------------------------------------


def _tanh_cubic(kappa: float, r: float) -> DriftFieldFD:
    """-kappa r^3 tanh(x/r)^3: bounded, smooth, increasing to -kappa x^3 as r grows."""

    def b(X):
        return -kappa * r**3 * np.tanh(X / r) ** 3

    def jac(X):
        th = np.tanh(X[0] / r)
        return (-kappa * r**2 * 3 * th**2 * (1 - th**2))[None, None]

    return DriftFieldFD(f"tanh3(r={r:g})", 1, b, jac)


def ladder_preset(name: str, kappa: float = 0.5) -> ApproximationLadder:
    if name == "exact":
        nu = gaussian_measure([1.0])
        return ApproximationLadder(
            "exact", nu, lambda n: zero_drift(1), lambda m: nu.delta, lambda n: 1, lambda m: 1,
            ((1, 1), (1, 2)), description="every rung equals the target drift",
        )
    if name == "linear-gaussian":
        lam = np.array([1.0, 2.0])
        nu = gaussian_measure(lam)
        return ApproximationLadder(
            "linear-gaussian", nu, lambda n: zero_drift(2),
            lambda m: linear_drift(-np.diag((1.0 - 2.0**-m) * lam), f"delta^{m}"),
            lambda n: 2, lambda m: 2, tuple((1, m) for m in range(1, 5)),
            description="delta^m = -(1 - 2^-m) lambda x, nested",
        )
    if name == "truncation":
        Q = np.array([[1.0, 0.4], [0.4, 2.0]])
        nu = gaussian_measure(Q)
        first = np.array([[-Q[0, 0], 0.0], [0.0, 0.0]])
        return ApproximationLadder(
            "truncation", nu, lambda n: zero_drift(2),
            lambda m: linear_drift(first, "P1 delta") if m == 1 else nu.delta,
            lambda n: 1, lambda m: 1 if m == 1 else 2, ((1, 1), (1, 2)),
            description="coupled Gaussian; the first rung solves on R^1",
        )
    if name == "anharmonic":
        nu = anharmonic_measure(kappa)
        return ApproximationLadder(
            "anharmonic", nu, lambda n: _tanh_cubic(kappa, float(n)),
            lambda m: linear_drift(-np.eye(1) * (1.0 - 2.0**-m), f"delta^{m}") if m < 8 else nu.delta,
            lambda n: 1, lambda m: 1, tuple((n, m) for n in (1, 2, 4) for m in (2, 4, 8)),
            description="alpha^n = -kappa n^3 tanh(x/n)^3, delta^m = -(1 - 2^-m) x",
        )
    raise KeyError(f"unknown ladder preset {name!r}")


LADDER_PRESETS = ("exact", "linear-gaussian", "truncation", "anharmonic")


def default_datum(ladder: ApproximationLadder) -> CylinderFunction:
    """Bump in the coordinates every rung resolves."""
    sched = ladder.schedule or ((1, 1),)
    N = min(ladder.effective_dim(n, m) for n, m in sched)
    return gaussian_bump([0.3] * N, 0.8)
