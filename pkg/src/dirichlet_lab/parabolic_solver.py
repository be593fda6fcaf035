"""Explicit finite differences for u_t = Δu + (b, ∇u) on the box [-R, R]^d.

Node-centred grid, reflecting ghost nodes (homogeneous Neumann), central
differences for the drift with per-node upwinding once the cell Péclet
number |b_k| h exceeds 2.  Each node then has nonnegative neighbour weights
and rows summing to zero, so the scheme is monotone, keeps constants fixed
and satisfies the discrete maximum principle for dt <= 1/max|A0|.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import kernels
from .rigged_space import RiggedBasis, one_sided_bound

log = logging.getLogger(__name__)

MAX_DIM = 3
BOUNDARY_LAYER = 3


class NumericalAbort(RuntimeError):
    """The explicit scheme blew up."""


class ConfigurationError(ValueError):
    pass


@dataclass(frozen=True)
class Grid:
    d: int
    R: float
    points_per_axis: int
    dt: float | None = None
    safety: float = 0.9

    def __post_init__(self):
        if not 1 <= self.d <= MAX_DIM:
            raise ConfigurationError(f"grid dimension must be in 1..{MAX_DIM}, got {self.d}")
        if self.R <= 0 or self.points_per_axis < 2 * BOUNDARY_LAYER + 3:
            raise ConfigurationError("grid too small")
        if self.dt is not None and self.dt > self.h**2 / (2 * self.d):
            raise ConfigurationError(f"dt={self.dt} exceeds the stability bound h^2/(2d)={self.h**2 / (2 * self.d)}")

    @property
    def h(self) -> float:
        return 2.0 * self.R / (self.points_per_axis - 1)

    @property
    def axis(self) -> np.ndarray:
        return np.linspace(-self.R, self.R, self.points_per_axis)

    @property
    def shape(self) -> tuple:
        return (self.points_per_axis,) * self.d

    @property
    def mesh(self) -> np.ndarray:
        """Coordinates with shape (d, n, ..., n)."""
        return np.stack(np.meshgrid(*([self.axis] * self.d), indexing="ij"))

    @property
    def cell_volume(self) -> float:
        return self.h**self.d

    def trapezoid_weights(self) -> np.ndarray:
        w1 = np.full(self.points_per_axis, self.h)
        w1[[0, -1]] *= 0.5
        w = w1
        for _ in range(self.d - 1):
            w = np.multiply.outer(w, w1)
        return w

    def interior_mask(self, layer: int = BOUNDARY_LAYER) -> np.ndarray:
        m1 = np.zeros(self.points_per_axis, dtype=bool)
        m1[layer:-layer] = True
        m = m1
        for _ in range(self.d - 1):
            m = np.logical_and.outer(m, m1)
        return m

    def inner_box_mask(self, fraction: float = 0.5) -> np.ndarray:
        X = self.mesh
        return np.all(np.abs(X) <= fraction * self.R + 1e-12, axis=0)

    def refined(self, factor: int = 2) -> "Grid":
        n = (self.points_per_axis - 1) * factor + 1
        return Grid(self.d, self.R, n, None if self.dt is None else self.dt / factor**2, self.safety)

    def coarsened(self) -> "Grid":
        if (self.points_per_axis - 1) % 2:
            raise ConfigurationError("cannot coarsen a grid with an odd number of cells")
        n = (self.points_per_axis - 1) // 2 + 1
        return Grid(self.d, self.R, n, None if self.dt is None else self.dt * 4, self.safety)


# ---------------------------------------------------------------------------
# drifts
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DriftFieldFD:
    """b: R^d -> R^d with Jacobian J[i, j] = ∂_i b_j; evaluators take X of shape (d, ...)."""

    name: str
    d: int
    b: Callable
    jac: Callable
    alpha_part: "DriftFieldFD | None" = None
    delta_part: "DriftFieldFD | None" = None
    notes: str = ""

    def __call__(self, X):
        return np.asarray(self.b(np.asarray(X, dtype=float)), dtype=float)

    def jacobian(self, X):
        return np.asarray(self.jac(np.asarray(X, dtype=float)), dtype=float)

    def div(self, X):
        J = self.jacobian(X)
        return np.trace(J, axis1=0, axis2=1)

    def __add__(self, other: "DriftFieldFD") -> "DriftFieldFD":
        if other.d != self.d:
            raise ConfigurationError("drift dimensions differ")
        return DriftFieldFD(
            f"{self.name}+{other.name}", self.d,
            lambda X: self(X) + other(X), lambda X: self.jacobian(X) + other.jacobian(X),
        )

    def scaled(self, s: float, name: str | None = None) -> "DriftFieldFD":
        return DriftFieldFD(name or f"{s:g}*{self.name}", self.d, lambda X: s * self(X), lambda X: s * self.jacobian(X))

    def with_parts(self, alpha_part, delta_part) -> "DriftFieldFD":
        return DriftFieldFD(self.name, self.d, self.b, self.jac, alpha_part, delta_part, self.notes)

    def self_test(self, points, h: float = 1e-4) -> float:
        """Max |J - central FD of b| at the given points (shape (d, P))."""
        P = np.asarray(points, dtype=float)
        J = self.jacobian(P)
        err = 0.0
        for i in range(self.d):
            e = np.zeros((self.d, 1))
            e[i] = h
            fd = (self(P + e) - self(P - e)) / (2 * h)  # (d_j, P)
            err = max(err, float(np.max(np.abs(fd - J[i]))))
        return err


def _zeros_like_field(X, d):
    return np.zeros((d,) + X.shape[1:])


def zero_drift(d: int) -> DriftFieldFD:
    return DriftFieldFD("zero", d, lambda X: _zeros_like_field(X, d), lambda X: np.zeros((d, d) + X.shape[1:]))


def constant_drift(vec) -> DriftFieldFD:
    v = np.asarray(vec, dtype=float)
    d = v.size
    return DriftFieldFD(
        "constant", d,
        lambda X: v.reshape((d,) + (1,) * (X.ndim - 1)) * np.ones(X.shape[1:]),
        lambda X: np.zeros((d, d) + X.shape[1:]),
    )


def linear_drift(B, name: str = "linear") -> DriftFieldFD:
    """b(x) = B x, so J = B^T."""
    B = np.asarray(B, dtype=float)
    d = B.shape[0]
    return DriftFieldFD(
        name, d,
        lambda X: np.tensordot(B, X, axes=([1], [0])),
        lambda X: B.T.reshape((d, d) + (1,) * (X.ndim - 1)) * np.ones(X.shape[1:]),
    )


def ou_drift(d: int, rates=1.0) -> DriftFieldFD:
    r = np.broadcast_to(np.asarray(rates, dtype=float), (d,))
    return linear_drift(-np.diag(r), "ou")


def rotation_drift() -> DriftFieldFD:
    """b(x) = (x2, -x1); antisymmetric Jacobian, divergence free."""
    return linear_drift(np.array([[0.0, 1.0], [-1.0, 0.0]]), "rotation")


def anharmonic_alpha(d: int, kappa: float) -> DriftFieldFD:
    """-kappa |x|^2 x."""

    def b(X):
        return -kappa * np.sum(X**2, axis=0) * X

    def jac(X):
        r2 = np.sum(X**2, axis=0)
        J = -kappa * 2.0 * X[:, None] * X[None, :]
        for i in range(d):
            J[i, i] -= kappa * r2
        return J

    return DriftFieldFD(f"anharm({kappa:g})", d, b, jac)


def from_expressions(exprs: Sequence[str], name: str = "expr") -> DriftFieldFD:
    """Drift from component expressions in x0, x1, ... (sympy-parsed, Jacobian symbolic)."""
    import sympy as sp

    d = len(exprs)
    xs = sp.symbols(f"x0:{d}")
    comps = [sp.sympify(e, locals={f"x{i}": xs[i] for i in range(d)}) for e in exprs]
    bad = set().union(*(c.free_symbols for c in comps)) - set(xs)
    if bad:
        raise ConfigurationError(f"unknown symbols in drift expressions: {sorted(map(str, bad))}")
    fb = [sp.lambdify(xs, c, "numpy") for c in comps]
    fj = [[sp.lambdify(xs, sp.diff(comps[j], xs[i]), "numpy") for j in range(d)] for i in range(d)]

    def b(X):
        return np.stack([np.broadcast_to(f(*X), X.shape[1:]).astype(float) for f in fb])

    def jac(X):
        return np.stack(
            [np.stack([np.broadcast_to(fj[i][j](*X), X.shape[1:]).astype(float) for j in range(d)]) for i in range(d)]
        )

    return DriftFieldFD(name, d, b, jac, notes="; ".join(exprs))


# ---------------------------------------------------------------------------
# operator assembly
# ---------------------------------------------------------------------------


def stencil_coefficients(bvals: np.ndarray, h: float):
    """(Am, A0, Ap, upwind_fraction) for Δ + (b, ∇) with the Péclet switch."""
    d = bvals.shape[0]
    inv_h2 = 1.0 / h**2
    am = np.empty_like(bvals)
    ap = np.empty_like(bvals)
    a0 = np.full(bvals.shape[1:], -2.0 * d * inv_h2)
    upwind = np.abs(bvals) * h > 2.0
    for k in range(d):
        bk = bvals[k]
        up = upwind[k]
        am[k] = inv_h2 - bk / (2 * h)
        ap[k] = inv_h2 + bk / (2 * h)
        pos = up & (bk > 0)
        neg = up & (bk < 0)
        am[k][pos] = inv_h2
        ap[k][pos] = inv_h2 + bk[pos] / h
        a0[pos] -= bk[pos] / h
        am[k][neg] = inv_h2 - bk[neg] / h
        ap[k][neg] = inv_h2
        a0[neg] += bk[neg] / h
    return am, a0, ap, float(np.mean(upwind))


@dataclass
class GridOperator:
    grid: Grid
    drift: DriftFieldFD
    am: np.ndarray
    a0: np.ndarray
    ap: np.ndarray
    upwind_fraction: float

    @classmethod
    def build(cls, drift: DriftFieldFD, grid: Grid) -> "GridOperator":
        if drift.d != grid.d:
            raise ConfigurationError(f"drift dimension {drift.d} != grid dimension {grid.d}")
        bvals = drift(grid.mesh)
        return cls(grid, drift, *stencil_coefficients(bvals, grid.h))

    def apply(self, u):
        return kernels.apply_stencil(np.ascontiguousarray(u, dtype=float), self.am, self.a0, self.ap)

    @property
    def max_stable_dt(self) -> float:
        return 1.0 / float(np.max(np.abs(self.a0)))


# ---------------------------------------------------------------------------
# solutions
# ---------------------------------------------------------------------------


def central_gradient(u, h):
    """Gradient (d, ...) by central differences, second-order one-sided at the edges."""
    g = np.gradient(u, h, edge_order=2)
    return np.stack(g) if u.ndim > 1 else np.asarray(g)[None]


@dataclass
class GridSolution:
    grid: Grid
    drift: DriftFieldFD
    times: np.ndarray
    u: np.ndarray  # (n_t, *shape)
    dudt: np.ndarray  # L_h u at the snapshot times
    dt: float
    upwind_fraction: float = 0.0
    boundary_ratio: float = 0.0
    boundary_flag: bool = False
    diagnostics: dict = field(default_factory=dict)

    def index(self, t: float) -> int:
        k = int(np.argmin(np.abs(self.times - t)))
        if abs(self.times[k] - t) > 1e-9 * max(1.0, abs(t)):
            raise KeyError(f"no snapshot at t={t}; available {self.times}")
        return k

    def grad(self, k: int) -> np.ndarray:
        return central_gradient(self.u[k], self.grid.h)

    def hessian(self, k: int) -> np.ndarray:
        """H[i, j] = ∂_i ∂_j u by nested central differences, shape (d, d, ...)."""
        w = self.grad(k)
        return np.stack([central_gradient(w[j], self.grid.h) for j in range(self.grid.d)], axis=1)

    def grad_dudt(self, k: int) -> np.ndarray:
        return central_gradient(self.dudt[k], self.grid.h)

    @property
    def f(self) -> np.ndarray:
        return self.u[0]


def _initial(f, grid: Grid) -> np.ndarray:
    if callable(f):
        vals = np.asarray(f(grid.mesh), dtype=float)
    else:
        vals = np.asarray(f, dtype=float)
    vals = np.broadcast_to(vals, grid.shape).astype(float)
    return np.ascontiguousarray(vals)


def solve_cauchy(
    b: DriftFieldFD,
    f,
    T: float,
    grid: Grid,
    times=None,
    n_snapshots: int = 32,
    check_support: bool = True,
    support_tol: float = 1e-6,
) -> GridSolution:
    """Integrate to time T, storing u, L_h u at ``times`` (default: n_snapshots + 1 equispaced)."""
    op = GridOperator.build(b, grid)
    u = _initial(f, grid)
    fmax = float(np.max(np.abs(u)))
    edge = ~grid.interior_mask(BOUNDARY_LAYER)
    if check_support and fmax > 0 and float(np.max(np.abs(u[edge]))) > support_tol * fmax:
        raise ConfigurationError(
            f"initial datum is not negligible within {BOUNDARY_LAYER} cells of the boundary; enlarge R"
        )
    if times is None:
        times = np.linspace(0.0, T, n_snapshots + 1)
    times = np.unique(np.concatenate([[0.0], np.asarray(times, dtype=float)]))
    if times[-1] > T + 1e-12 or times[0] < 0:
        raise ConfigurationError("snapshot times must lie in [0, T]")
    dt0 = grid.safety * min(grid.h**2 / (2 * grid.d), op.max_stable_dt)
    if grid.dt is not None:
        dt0 = min(dt0, grid.dt)

    snaps = [u.copy()]
    rates = [op.apply(u)]
    dt_used = dt0
    boundary = float(np.max(np.abs(u[edge])))
    for t0, t1 in zip(times[:-1], times[1:]):
        nsteps = max(1, int(np.ceil((t1 - t0) / dt0 - 1e-9)))
        dt = (t1 - t0) / nsteps
        dt_used = min(dt_used, dt)
        u = kernels.advance(u, op.am, op.a0, op.ap, dt, nsteps)
        umax = float(np.max(np.abs(u)))
        if not np.isfinite(umax) or umax > 10.0 * max(fmax, 1e-300):
            raise NumericalAbort(f"solution norm {umax:.3e} exceeds 10 ||f||_inf = {10 * fmax:.3e} at t={t1}")
        snaps.append(u.copy())
        rates.append(op.apply(u))
        boundary = max(boundary, float(np.max(np.abs(u[edge]))))
    ratio = boundary / fmax if fmax > 0 else 0.0
    flagged = check_support and ratio > support_tol
    if flagged:
        log.info("boundary layer reached %.2e of ||f||_inf (drift %s)", ratio, b.name)
    return GridSolution(
        grid, b, times, np.stack(snaps), np.stack(rates), dt_used, op.upwind_fraction, ratio, bool(flagged),
        {"steps_dt": dt_used},
    )


# ---------------------------------------------------------------------------
# derived quantities
# ---------------------------------------------------------------------------


def compute_c_plus(b: DriftFieldFD, grid: Grid, basis: RiggedBasis) -> float:
    """max over grid nodes of the top eigenvalue of sym(W Λ_b W^-1), W = diag(μ)."""
    if basis.N != grid.d:
        raise ConfigurationError(f"basis rank {basis.N} != grid dimension {grid.d}")
    J = b.jacobian(grid.mesh).reshape(grid.d, grid.d, -1)
    J = np.moveaxis(J, -1, 0)
    return float(np.max(one_sided_bound(J, basis.array)))


def plus_norm_field(w: np.ndarray, basis) -> np.ndarray:
    """|w(x)|_+ for a vector field of shape (d, ...); ``basis`` may be a raw weight array."""
    mu = basis.array if isinstance(basis, RiggedBasis) else np.asarray(basis, dtype=float)
    mu = mu.reshape((-1,) + (1,) * (w.ndim - 1))
    return np.sqrt(np.sum(mu**2 * w**2, axis=0))


def gradient_sup_norm_plus(sol: GridSolution, t: float, basis: RiggedBasis) -> float:
    """max over interior nodes of |∇u(t, x)|_+ (boundary layer excluded)."""
    k = sol.index(t)
    g = plus_norm_field(sol.grad(k), basis)
    return float(np.max(g[sol.grid.interior_mask()]))
