"""Neumann cosine basis of (-Δ+1) on a rectangle and the truncated free field.

Modes are ``e_{m,n}(x, y) = k_{m,n} cos(π m x / L1) cos(π n y / L2)`` on
``[0, L1] x [0, L2]`` with eigenvalue ``1 + π²m²/L1² + π²n²/L2²``.  A field
sample is the coefficient vector ``z_j = <z, e_j>`` of the first K modes;
under the free field these are independent N(0, 1/λ_j).
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Iterator, Sequence

import numpy as np

from .rigged_space import DimensionError

SAMPLE_CHUNK = 8192


class DomainError(ValueError):
    """Point outside the closed rectangle."""


@dataclass(frozen=True)
class RectangleDomain:
    L1: float = 1.0
    L2: float = 1.0

    def __post_init__(self):
        if not (self.L1 > 0 and self.L2 > 0):
            raise ValueError("rectangle side lengths must be positive")

    @property
    def area(self) -> float:
        return self.L1 * self.L2

    def contains(self, x, y, tol: float = 1e-12) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        return (x >= -tol) & (x <= self.L1 + tol) & (y >= -tol) & (y <= self.L2 + tol)


@dataclass(frozen=True)
class NeumannMode:
    m: int
    n: int
    eigenvalue: float
    norm_const: float
    L1: float
    L2: float

    def __call__(self, x, y):
        return (
            self.norm_const
            * np.cos(np.pi * self.m * np.asarray(x, dtype=float) / self.L1)
            * np.cos(np.pi * self.n * np.asarray(y, dtype=float) / self.L2)
        )


def make_mode(domain: RectangleDomain, m: int, n: int) -> NeumannMode:
    lam = 1.0 + (np.pi * m / domain.L1) ** 2 + (np.pi * n / domain.L2) ** 2
    # ∫cos² over a side is L/2 for a nonzero index and L for index 0
    k = np.sqrt((1.0 if m == 0 else 2.0) * (1.0 if n == 0 else 2.0) / domain.area)
    return NeumannMode(m, n, float(lam), float(k), domain.L1, domain.L2)


def build_modes(domain: RectangleDomain, K: int) -> tuple[NeumannMode, ...]:
    """The K modes of smallest eigenvalue; ties broken lexicographically in (m, n)."""
    if K < 1:
        raise ValueError("need at least one mode")
    # the K lowest modes all have m, n < K
    cands = [make_mode(domain, m, n) for m in range(K) for n in range(K)]
    cands.sort(key=lambda md: (round(md.eigenvalue, 9), md.m, md.n))
    return tuple(cands[:K])


def eigenvalues(modes: Sequence[NeumannMode]) -> np.ndarray:
    return np.array([md.eigenvalue for md in modes])


def domain_of(modes: Sequence[NeumannMode]) -> RectangleDomain:
    return RectangleDomain(modes[0].L1, modes[0].L2)


def mode_values(modes: Sequence[NeumannMode], x, y) -> np.ndarray:
    """Array of shape ``(K,) + broadcast(x, y).shape`` with e_j(x, y)."""
    x, y = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(y, dtype=float))
    return np.stack([md(x, y) for md in modes])


def _checked_values(modes, x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != 2:
        raise DomainError("points must have shape (..., 2)")
    dom = domain_of(modes)
    if not np.all(dom.contains(x[..., 0], x[..., 1])):
        raise DomainError(f"point outside the closed rectangle [0,{dom.L1}]x[0,{dom.L2}]")
    return mode_values(modes, x[..., 0], x[..., 1])


def h_alpha_norm(l, modes: Sequence[NeumannMode], alpha: float):
    """sqrt(sum λ_n^alpha l_n²) for coefficient vectors l (trailing axis)."""
    l = np.asarray(l, dtype=float)
    if l.shape[-1] != len(modes):
        raise DimensionError(f"{l.shape[-1]} coefficients for {len(modes)} modes")
    return np.sqrt(np.sum(eigenvalues(modes) ** alpha * l**2, axis=-1))


def rigging_admissible(alpha: float, delta_index: float) -> bool:
    """Index constraint alpha > max(0, 1 - delta/2) (with delta > 0)."""
    return delta_index > 0 and alpha > max(0.0, 1.0 - delta_index / 2.0)


def hilbert_schmidt_partial_sums(modes: Sequence[NeumannMode], exponent: float) -> np.ndarray:
    """Partial sums of λ_j^-exponent over the mode list."""
    return np.cumsum(eigenvalues(modes) ** -exponent)


# ---------------------------------------------------------------------------
# sampling
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class FieldSample:
    coeffs: np.ndarray

    @property
    def K(self) -> int:
        return int(np.asarray(self.coeffs).shape[-1])


def sample_free_field(modes: Sequence[NeumannMode], rng: np.random.Generator) -> FieldSample:
    lam = eigenvalues(modes)
    return FieldSample(rng.standard_normal(len(modes)) / np.sqrt(lam))


def coefficient_chunks(
    modes: Sequence[NeumannMode], count: int, seed: int, chunk: int = SAMPLE_CHUNK
) -> Iterator[np.ndarray]:
    """Yield free-field coefficient blocks; chunk i draws from child stream i of ``seed``.

    The layout is fixed by (count, seed, chunk), so results do not depend on
    how the blocks are consumed.
    """
    lam_sqrt = np.sqrt(eigenvalues(modes))
    nchunks = -(-count // chunk)
    children = np.random.SeedSequence(seed).spawn(nchunks)
    for i, child in enumerate(children):
        size = min(chunk, count - i * chunk)
        yield np.random.default_rng(child).standard_normal((size, len(modes))) / lam_sqrt


def sample_coefficients(modes: Sequence[NeumannMode], count: int, seed: int) -> np.ndarray:
    return np.concatenate(list(coefficient_chunks(modes, count, seed)), axis=0)


def _coeffs(sample) -> np.ndarray:
    return np.asarray(sample.coeffs if isinstance(sample, FieldSample) else sample, dtype=float)


def field_point_value(sample, modes: Sequence[NeumannMode], x):
    """sum_j z_j e_j(x) for x of shape (..., 2); sample may be a batch (S, K)."""
    z = _coeffs(sample)
    if z.shape[-1] != len(modes):
        raise DimensionError(f"sample has {z.shape[-1]} coefficients, mode list has {len(modes)}")
    vals = _checked_values(modes, x)
    return np.tensordot(z, vals, axes=([-1], [0]))


def local_variance(modes: Sequence[NeumannMode], x):
    """c_K(x) = sum_j λ_j^-1 e_j(x)²."""
    vals = _checked_values(modes, x)
    return np.tensordot(1.0 / eigenvalues(modes), vals**2, axes=([0], [0]))


# ---------------------------------------------------------------------------
# quadrature
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class QuadratureRule:
    x: np.ndarray
    y: np.ndarray
    weights: np.ndarray

    @property
    def points(self) -> np.ndarray:
        return np.stack([self.x, self.y], axis=-1)


def gauss_legendre_rule(domain: RectangleDomain, order: int) -> QuadratureRule:
    t, w = np.polynomial.legendre.leggauss(order)
    xs = 0.5 * domain.L1 * (t + 1.0)
    ys = 0.5 * domain.L2 * (t + 1.0)
    wx = 0.5 * domain.L1 * w
    wy = 0.5 * domain.L2 * w
    X, Y = np.meshgrid(xs, ys, indexing="ij")
    return QuadratureRule(X.ravel(), Y.ravel(), np.outer(wx, wy).ravel())


def midpoint_rule(domain: RectangleDomain, q: int) -> QuadratureRule:
    """Cell-centred rule; exact for cos(π k x / L) whenever k is not a nonzero multiple of 2q."""
    xs = (np.arange(q) + 0.5) * domain.L1 / q
    ys = (np.arange(q) + 0.5) * domain.L2 / q
    X, Y = np.meshgrid(xs, ys, indexing="ij")
    w = np.full(q * q, domain.area / (q * q))
    return QuadratureRule(X.ravel(), Y.ravel(), w)


def gram_order(modes: Sequence[NeumannMode]) -> int:
    top = max(max(md.m, md.n) for md in modes)
    return 2 * top + 12


def gram_matrix(modes: Sequence[NeumannMode], order: int | None = None) -> np.ndarray:
    """Quadrature Gram matrix ∫ e_i e_j dx (tensor Gauss-Legendre)."""
    rule = gauss_legendre_rule(domain_of(modes), order or gram_order(modes))
    E = mode_values(modes, rule.x, rule.y)
    return (E * rule.weights) @ E.T


# ---------------------------------------------------------------------------
# export
# ---------------------------------------------------------------------------


def write_samples_csv(path, coeffs, modes: Sequence[NeumannMode]) -> None:
    coeffs = np.atleast_2d(np.asarray(coeffs, dtype=float))
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow([f"z_{md.m}_{md.n}" for md in modes])
        for row in coeffs:
            writer.writerow([repr(float(v)) for v in row])
