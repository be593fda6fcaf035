"""P(φ)₂ measure on a rectangle at spectral truncation K.

Pieces: Wick integrals ``:z^n:(h)``, the interaction V, the density
φ = exp(-V/2), ν = φ²μ by self-normalised importance sampling from the free
field μ, and the logarithmic derivative β = α + δ.

Coordinate bookkeeping
----------------------
Samples are stored as L² coefficients ``z_j = <z, e_j>``.  With rigging
indices (a, d) (``alpha_idx``, ``delta_idx``) the spaces are
H- = H_{-d}, H0 = H_a, H+ = H_{d+2a}.  The orthonormal basis of H0 is
``λ_j^{-a/2} e_j``, so the coordinates used by the Dirichlet-form layer are

    x_j = λ_j^{a/2} z_j,

and the operator T generating the rigging has eigenvalues ``λ_j^{(a+d)/2}``.
All conversions go through :func:`rigged_coordinates` and
:func:`rigged_basis`.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import free_field as ff
from .cylinder import CylinderFunction
from .free_field import FieldSample, NeumannMode
from .hermite_wick import wick_powers
from .rigged_space import RiggedBasis, one_sided_bound
from .stats import (
    Estimate,
    effective_sample_size,
    lp_norm_estimate,
    normalized_weights,
    weighted_mean,
)

log = logging.getLogger(__name__)

WICK_CHUNK = 4096


class QuadratureInstability(RuntimeError):
    """Wick integrals changed when the quadrature was refined."""


@dataclass(frozen=True)
class WickSpec:
    """Interaction ``V = sum_n a_n :z^n:(1_Λ)`` plus truncation and rigging indices.

    With ``strict`` the coefficients must vanish identically (free field) or
    have even degree with a positive leading coefficient, the sign for which
    exp(-V) is μ-integrable.
    """

    coefficients: tuple
    K: int
    alpha_idx: float = 1.0
    delta_idx: float = 1.0
    strict: bool = True

    def __post_init__(self):
        a = tuple(float(v) for v in self.coefficients) or (0.0,)
        object.__setattr__(self, "coefficients", a)
        if self.K < 1:
            raise ValueError("truncation K must be positive")
        if not self.strict:
            return
        if not ff.rigging_admissible(self.alpha_idx, self.delta_idx):
            raise ValueError(
                f"rigging indices alpha={self.alpha_idx}, delta={self.delta_idx} violate "
                "alpha > max(0, 1 - delta/2)"
            )
        if self.is_free:
            return
        deg = self.degree
        if deg < 2 or deg % 2:
            raise ValueError(f"interaction degree must be even and >= 2, got {deg}")
        if a[-1] <= 0:
            raise ValueError(
                f"leading coefficient a_{deg} = {a[-1]} makes exp(-V) non-integrable; need a_{deg} > 0"
            )

    @property
    def degree(self) -> int:
        a = self.coefficients
        deg = len(a) - 1
        while deg > 0 and a[deg] == 0.0:
            deg -= 1
        return deg

    @property
    def is_free(self) -> bool:
        return all(v == 0.0 for v in self.coefficients)

    @property
    def max_coupling(self) -> float:
        return max(abs(v) for v in self.coefficients)

    @classmethod
    def free(cls, K: int, alpha_idx: float = 1.0, delta_idx: float = 1.0) -> "WickSpec":
        return cls((0.0,), K, alpha_idx, delta_idx)


# ---------------------------------------------------------------------------
# pairing bookkeeping
# ---------------------------------------------------------------------------


def rigged_coordinates(l2_coeffs, modes: Sequence[NeumannMode], spec: WickSpec, inverse=False):
    """x_j = λ_j^{a/2} z_j (or the inverse map)."""
    lam = ff.eigenvalues(modes)
    scale = lam ** (0.5 * spec.alpha_idx)
    c = np.asarray(l2_coeffs, dtype=float)
    return c / scale if inverse else c * scale


def rigged_basis(modes: Sequence[NeumannMode], spec: WickSpec) -> RiggedBasis:
    """Eigenvalues of T: λ_j^{(a+d)/2}, so |x|_- is the H_{-d} norm and |x|_+ the H_{d+2a} norm."""
    lam = ff.eigenvalues(modes)
    return RiggedBasis(tuple(lam ** (0.5 * (spec.alpha_idx + spec.delta_idx))))


def h_minus_norm(l2_coeffs, modes, spec: WickSpec):
    """|v|_- = ||v||_{H_{-d}} for a vector given by L² coefficients."""
    return ff.h_alpha_norm(l2_coeffs, modes, -spec.delta_idx)


def h_zero_norm(l2_coeffs, modes, spec: WickSpec):
    """|v|_0 = ||v||_{H_a}."""
    return ff.h_alpha_norm(l2_coeffs, modes, spec.alpha_idx)


# ---------------------------------------------------------------------------
# Wick integrals
# ---------------------------------------------------------------------------


class WickQuadrature:
    """Cell-centred rule on Λ with mode values and c_K(x) cached at the nodes.

    Every Wick power at fixed K is a trigonometric polynomial, so the
    midpoint rule is exact once ``q`` exceeds half the top frequency index;
    :meth:`check_stability` confirms this against a doubled rule.
    """

    def __init__(self, modes: Sequence[NeumannMode], max_degree: int, q: int | None = None):
        self.modes = tuple(modes)
        self.max_degree = int(max_degree)
        top = max(max(md.m, md.n) for md in self.modes)
        self.q = int(q) if q else (self.max_degree + 1) * top + 2
        self.rule = ff.midpoint_rule(ff.domain_of(self.modes), self.q)
        self.E = ff.mode_values(self.modes, self.rule.x, self.rule.y)  # (K, Q)
        self.lam = ff.eigenvalues(self.modes)
        self.c = (self.E**2).T @ (1.0 / self.lam)  # (Q,)

    def test_matrix(self, h) -> np.ndarray:
        """Columns of test-function values times weights, shape (Q, J)."""
        if h is None:
            H = np.ones((self.rule.weights.size, 1))
        elif isinstance(h, str) and h == "modes":
            H = self.E.T
        elif isinstance(h, np.ndarray):
            H = h.reshape(self.rule.weights.size, -1)
        else:
            H = np.asarray(h(self.rule.x, self.rule.y), dtype=float).reshape(self.rule.weights.size, -1)
        return H * self.rule.weights[:, None]

    def integrals(self, Z, nmax: int, h=None) -> np.ndarray:
        """``out[s, n, j] = ∫ :z_s^n:(x) h_j(x) dx`` for n <= nmax."""
        Z = np.atleast_2d(np.asarray(Z, dtype=float))
        Hw = self.test_matrix(h)
        out = np.empty((Z.shape[0], nmax + 1, Hw.shape[1]))
        for start in range(0, Z.shape[0], WICK_CHUNK):
            zs = Z[start : start + WICK_CHUNK]
            F = zs @ self.E  # field at nodes
            W = wick_powers(F, self.c[None, :], nmax)  # (n, S, Q)
            out[start : start + WICK_CHUNK] = np.einsum("nsq,qj->snj", W, Hw, optimize=True)
        return out

    def check_stability(self, Z, nmax: int, h=None, tol: float = 1e-9) -> float:
        """Max relative change of the integrals under a doubled rule; raises past ``tol``."""
        fine = WickQuadrature(self.modes, self.max_degree, 2 * self.q)
        Z = np.atleast_2d(Z)[:16]
        if callable(h) or h is None or (isinstance(h, str)):
            a = self.integrals(Z, nmax, h)
            b = fine.integrals(Z, nmax, h)
        else:
            raise ValueError("stability check needs a callable test function")
        scale = max(1.0, float(np.max(np.abs(b))))
        err = float(np.max(np.abs(a - b))) / scale
        if err > tol:
            raise QuadratureInstability(f"Wick integrals moved by {err:.3e} under refinement (q={self.q})")
        return err


def _quad(modes, nmax, quad):
    if quad is not None and quad.max_degree >= nmax:
        return quad
    return WickQuadrature(modes, nmax)


def wick_integral(sample, modes, h, n: int, quad: WickQuadrature | None = None):
    """``:z^n:(h) = ∫ :z^n:(x) h(x) dx``; h is a callable h(x, y) or None for 1_Λ."""
    if n < 0:
        raise ValueError("Wick degree must be nonnegative")
    z = sample.coeffs if isinstance(sample, FieldSample) else sample
    z = np.asarray(z, dtype=float)
    q = _quad(modes, n + 1 if h is not None else n, quad)
    vals = q.integrals(z, n, h)[:, n, 0]
    return vals if z.ndim > 1 else float(vals[0])


def interaction(sample, spec: WickSpec, modes, quad: WickQuadrature | None = None):
    """V(z) = sum_n a_n :z^n:(1_Λ)."""
    z = np.asarray(sample.coeffs if isinstance(sample, FieldSample) else sample, dtype=float)
    if spec.is_free:
        return np.zeros(z.shape[0]) if z.ndim > 1 else 0.0
    deg = spec.degree
    q = _quad(modes, deg, quad)
    I = q.integrals(z, deg)[:, :, 0]
    V = I @ np.asarray(spec.coefficients[: deg + 1])
    return V if z.ndim > 1 else float(V[0])


def log_density_phi2(sample, spec, modes, quad=None):
    """log φ² = -V."""
    return -np.asarray(interaction(sample, spec, modes, quad))


def density_phi(sample, spec, modes, quad=None):
    """φ = exp(-V/2)."""
    return np.exp(-0.5 * np.asarray(interaction(sample, spec, modes, quad)))


def _alpha_sums(z, spec: WickSpec, modes, quad) -> np.ndarray:
    """S_j = sum_{n>=1} n a_n :z^{n-1}:(e_j), shape (S, K)."""
    deg = spec.degree
    if spec.is_free or deg < 1:
        return np.zeros((z.shape[0], len(modes)))
    q = _quad(modes, deg, quad)
    I = q.integrals(z, deg - 1, "modes")  # (S, deg, K)
    na = np.arange(1, deg + 1) * np.asarray(spec.coefficients[1 : deg + 1])
    return np.einsum("snj,n->sj", I, na)


def drift_delta(sample, spec: WickSpec, modes):
    """Linear part of β as L² coefficients: -λ_j^{1-a} z_j."""
    z = np.asarray(sample.coeffs if isinstance(sample, FieldSample) else sample, dtype=float)
    return -(ff.eigenvalues(modes) ** (1.0 - spec.alpha_idx)) * z


def drift_alpha(sample, spec: WickSpec, modes, quad=None):
    """Interaction part of β as L² coefficients: -λ_j^{-a} S_j."""
    z = np.asarray(sample.coeffs if isinstance(sample, FieldSample) else sample, dtype=float)
    single = z.ndim == 1
    S = _alpha_sums(np.atleast_2d(z), spec, modes, quad)
    out = -(ff.eigenvalues(modes) ** (-spec.alpha_idx)) * S
    return out[0] if single else out


def beta_coordinates(sample, spec: WickSpec, modes, quad=None):
    """β_j = _-(β, λ_j^{-a/2} e_j)_+ , i.e. β in the x-coordinates."""
    z = np.asarray(sample.coeffs if isinstance(sample, FieldSample) else sample, dtype=float)
    l2 = drift_delta(z, spec, modes) + drift_alpha(z, spec, modes, quad)
    return rigged_coordinates(l2, modes, spec)


# ---------------------------------------------------------------------------
# importance sampling of ν
# ---------------------------------------------------------------------------


@dataclass
class WeightedSampleSet:
    samples: np.ndarray  # L² coefficients, (count, K)
    log_weights: np.ndarray
    seed: int
    coords: np.ndarray | None = None  # x-coordinates
    beta: np.ndarray | None = None  # β in x-coordinates
    ess_floor: float = 0.2
    warnings: list = field(default_factory=list)

    @property
    def count(self) -> int:
        return int(self.samples.shape[0])

    @property
    def weights(self) -> np.ndarray:
        return normalized_weights(self.log_weights)

    @property
    def ess(self) -> float:
        return effective_sample_size(self.log_weights)

    @property
    def degenerate(self) -> bool:
        return self.ess < self.ess_floor * self.count

    def mean(self, values) -> Estimate:
        return weighted_mean(values, self.weights)

    def rescaled(self, log_factor: float) -> "WeightedSampleSet":
        return WeightedSampleSet(
            self.samples, self.log_weights + log_factor, self.seed, self.coords, self.beta,
            self.ess_floor, list(self.warnings),
        )


def gaussian_sample_set(lambdas, count: int, seed: int) -> WeightedSampleSet:
    """Product Gaussian with precisions ``lambdas``: coordinates y_j ~ N(0, 1/λ_j), β = -λ y."""
    lam = np.asarray(lambdas, dtype=float)
    children = np.random.SeedSequence(seed)
    y = np.random.default_rng(children).standard_normal((count, lam.size)) / np.sqrt(lam)
    return WeightedSampleSet(y, np.zeros(count), seed, y, -lam * y)


def sample_nu(
    spec: WickSpec,
    modes,
    count: int,
    seed: int,
    ess_floor: float = 0.2,
    quad: WickQuadrature | None = None,
) -> WeightedSampleSet:
    """Free-field draws weighted by φ² = exp(-V), with β evaluated per sample."""
    if count < 1:
        raise ValueError("count must be >= 1")
    if len(modes) != spec.K:
        raise ValueError(f"spec truncation K={spec.K} but {len(modes)} modes supplied")
    deg = max(spec.degree, 1)
    q = _quad(modes, deg, quad)
    zs, lws, betas = [], [], []
    for z in ff.coefficient_chunks(modes, count, seed):
        zs.append(z)
        if spec.is_free:
            lws.append(np.zeros(z.shape[0]))
            betas.append(rigged_coordinates(drift_delta(z, spec, modes), modes, spec))
            continue
        I1 = q.integrals(z, deg, None)[:, :, 0]
        lws.append(-(I1 @ np.asarray(spec.coefficients[: deg + 1])))
        betas.append(beta_coordinates(z, spec, modes, q))
    Z = np.concatenate(zs)
    out = WeightedSampleSet(
        Z, np.concatenate(lws), seed, rigged_coordinates(Z, modes, spec), np.concatenate(betas),
        ess_floor,
    )
    if not spec.is_free:
        out.warnings.append(f"quadrature refinement change {q.check_stability(Z, deg):.2e}")
    if spec.max_coupling > 0.5:
        out.warnings.append(f"coupling {spec.max_coupling:g} exceeds the perturbative range 0.5")
    if out.degenerate:
        msg = f"degenerate weights: ESS {out.ess:.1f} < {ess_floor:g} * {count}"
        out.warnings.append(msg)
        log.warning(msg)
    return out


# ---------------------------------------------------------------------------
# checks
# ---------------------------------------------------------------------------


def _status(ok: bool, inconclusive: bool) -> str:
    if inconclusive:
        return "inconclusive"
    return "pass" if ok else "fail"


def check_ibp(spec, modes, f: CylinderFunction, j: int, sample_set: WeightedSampleSet, sigma=4.0) -> dict:
    """∫ ∇_j f dν = -∫ β_j f dν, estimated on one weighted sample set.

    ``j`` is 1-based; f acts on the x-coordinates.
    """
    if f.N > sample_set.coords.shape[1] or not 1 <= j <= sample_set.coords.shape[1]:
        raise ValueError("cylinder function or direction exceeds the truncation")
    x = sample_set.coords
    w = sample_set.weights
    dfj = f.grad(x, x.shape[1])[:, j - 1]
    bf = sample_set.beta[:, j - 1] * f.value(x)
    lhs = weighted_mean(dfj, w)
    rhs = weighted_mean(-bf, w)
    resid = weighted_mean(dfj + bf, w)
    ok = abs(resid.value) <= sigma * resid.stderr or abs(resid.value) < 1e-13
    return {
        "function": f.name,
        "direction": j,
        "lhs": lhs.as_dict(),
        "rhs": rhs.as_dict(),
        "residual": resid.value,
        "residual_stderr": resid.stderr,
        "sigma": sigma,
        "ess": sample_set.ess,
        "count": sample_set.count,
        "status": _status(ok, sample_set.degenerate),
    }


def gaussian_ibp_reduction(spec: WickSpec, modes, powers) -> dict:
    """Closed-form sides of the IBP identity for V = 0 and f = prod x_j^{k_j}.

    Under μ the x-coordinates are independent N(0, λ^{a-1}) and
    β_j = -λ_j^{1-a} x_j, so both sides reduce to Gaussian moments.
    Returns one (lhs, rhs) pair per direction.
    """
    lam = ff.eigenvalues(modes)
    var = lam ** (spec.alpha_idx - 1.0)
    k = np.zeros(len(modes), dtype=int)
    k[: len(powers)] = powers

    def moment(p, v):  # E[X^p], X ~ N(0, v)
        if p % 2:
            return 0.0
        return float(np.prod(np.arange(p - 1, 0, -2, dtype=float))) * v ** (p // 2)

    out = []
    for j in range(len(powers)):
        base = [moment(int(k[i]), var[i]) for i in range(len(modes))]
        lhs_factors = list(base)
        lhs_factors[j] = k[j] * moment(int(k[j]) - 1, var[j]) if k[j] > 0 else 0.0
        rhs_factors = list(base)
        rhs_factors[j] = lam[j] ** (1.0 - spec.alpha_idx) * moment(int(k[j]) + 1, var[j])
        out.append((float(np.prod(lhs_factors)), float(np.prod(rhs_factors))))
    return {"powers": list(map(int, powers)), "pairs": out}


def delta_tail_norms(sample_set: WeightedSampleSet, spec, modes, ms) -> list[dict]:
    """||  |δ - δ^m|_-  ||_{L²(ν)} for each m (δ^m keeps the first m modes)."""
    lam = ff.eigenvalues(modes)
    coef2 = (lam ** (-spec.delta_idx)) * (lam ** (2.0 - 2.0 * spec.alpha_idx)) * sample_set.samples**2
    w = sample_set.weights
    rows = []
    for m in ms:
        tail = coef2[:, m:].sum(axis=1)
        est = lp_norm_estimate(np.sqrt(tail), w, 2.0)
        rows.append({"m": int(m), "value": est.value, "stderr": est.stderr})
    return rows


def alpha_l4_norm(sample_set: WeightedSampleSet, spec, modes, quad=None) -> Estimate:
    """|| |α|_0 ||_{L⁴(ν)} with |α|_0² = sum λ^{-a} S_j²."""
    S = _alpha_sums(sample_set.samples, spec, modes, quad)
    a2 = np.sum(ff.eigenvalues(modes) ** (-spec.alpha_idx) * S**2, axis=1)
    return lp_norm_estimate(np.sqrt(a2), sample_set.weights, 4.0)


def delta_l2_norm(sample_set: WeightedSampleSet, spec, modes) -> Estimate:
    return Estimate(**{k: v for k, v in delta_tail_norms(sample_set, spec, modes, [0])[0].items() if k != "m"})


def delta_jacobian(spec: WickSpec, modes, m: int | None = None) -> np.ndarray:
    """Jacobian of δ^m in x-coordinates: diag(-λ_j^{1-a}) for j <= m, zero beyond."""
    lam = ff.eigenvalues(modes)
    diag = -(lam ** (1.0 - spec.alpha_idx))
    if m is not None:
        diag[m:] = 0.0
    return np.diag(diag)


def check_drift_conditions(
    spec: WickSpec,
    modes,
    sample_set: WeightedSampleSet | None = None,
    ms=(2, 4, 8, 16),
    refined: tuple | None = None,
    sigma: float = 4.0,
) -> dict:
    """Condition report for the drift decomposition of ν.

    ``refined`` optionally holds ``(modes_2K, sample_set_2K, spec_2K)`` for
    the K -> 2K stability of the |α|_0 L⁴ estimate.
    """
    basis = rigged_basis(modes, spec)
    tau = basis.array
    report: dict = {"K": spec.K, "alpha_idx": spec.alpha_idx, "delta_idx": spec.delta_idx}

    # δ^m depends on the first m coordinates and is linear, hence C_b^1 with constant derivative
    report["finite_dim_smooth"] = True

    # one-sided bound in (·,·)_+
    cps, forms = [], []
    for m in ms:
        mm = min(m, len(modes))
        J = delta_jacobian(spec, modes, mm)
        cps.append(float(one_sided_bound(J, tau)))
        forms.append([float(tau[i] ** 2 * J[i, i]) for i in range(mm)])
    c_plus_min = max(cps)
    report["one_sided_bound"] = {
        "c_plus_min_per_m": cps,
        "c_plus_min": c_plus_min,
        "c_plus_zero_admissible": c_plus_min <= 0.0,
        "form_at_unit_vectors": forms[-1],
        "jacobian_diagonal": np.diag(delta_jacobian(spec, modes)).tolist(),
    }

    # Λ_δ <= 0 gives the coercivity condition with eps0 = 1 and c(eps0) = 0
    lam_delta_max = float(np.max(np.diag(delta_jacobian(spec, modes))))
    report["coercivity"] = {
        "max_eigenvalue_of_delta_jacobian": lam_delta_max,
        "eps0": 1.0 if lam_delta_max <= 0 else None,
        "c_eps0": 0.0 if lam_delta_max <= 0 else None,
        "holds": lam_delta_max <= 0,
    }

    if sample_set is not None:
        tails = delta_tail_norms(sample_set, spec, modes, list(ms))
        vals = [r["value"] for r in tails]
        decreasing = all(b < a for a, b in zip(vals, vals[1:]))
        report["tail_decay"] = {"rows": tails, "strictly_decreasing": decreasing}
        a4 = alpha_l4_norm(sample_set, spec, modes)
        d2 = delta_l2_norm(sample_set, spec, modes)
        report["integrability"] = {
            "alpha_L4": a4.as_dict(),
            "delta_L2": d2.as_dict(),
            "ess": sample_set.ess,
            "count": sample_set.count,
        }
        if refined is not None:
            modes2, set2, spec2 = refined
            a4b = alpha_l4_norm(set2, spec2, modes2)
            diff = a4b.value - a4.value
            comb = float(np.hypot(a4.stderr, a4b.stderr))
            report["alpha_L4_refinement"] = {
                "K": spec.K,
                "K_refined": spec2.K,
                "value_K": a4.as_dict(),
                "value_2K": a4b.as_dict(),
                "difference": diff,
                "combined_stderr": comb,
                "sigma": sigma,
                "stable": abs(diff) <= sigma * comb,
            }
        degenerate = sample_set.degenerate
    else:
        degenerate = False
    checks = [report["one_sided_bound"]["c_plus_zero_admissible"], report["coercivity"]["holds"]]
    if "tail_decay" in report:
        checks.append(report["tail_decay"]["strictly_decreasing"])
    if "alpha_L4_refinement" in report:
        checks.append(report["alpha_L4_refinement"]["stable"])
    report["status"] = _status(all(checks), degenerate)
    return report


def perturbative_covariance_check(sample_set: WeightedSampleSet, modes, l, sigma=4.0) -> dict:
    """Weighted ∫ l(z)² dν against ||l||²_{H_{-1}} (agrees only for small couplings)."""
    l = np.asarray(l, dtype=float)
    vals = (sample_set.samples @ l) ** 2
    est = sample_set.mean(vals)
    target = float(ff.h_alpha_norm(l, modes, -1.0) ** 2)
    return {
        "estimate": est.as_dict(),
        "free_field_value": target,
        "within": abs(est.value - target) <= sigma * est.stderr,
    }
