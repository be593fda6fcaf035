"""Truncated rigging H+ ⊂ H0 ⊂ H- generated by an operator T >= 1.

A basis is stored only through the eigenvalues ``lambda_i`` of T, truncated
at level N.  Vectors are plain coordinate arrays ``x_i`` in the orthonormal
eigenbasis of H0; the three norms are

    |x|_-^2 = sum lambda_i^-2 x_i^2,  |x|_0^2 = sum x_i^2,  |x|_+^2 = sum lambda_i^2 x_i^2.

Every function accepts a trailing-axis batch: ``x`` of shape ``(..., N)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class DimensionError(ValueError):
    """Coordinate vector and basis truncation disagree."""


@dataclass(frozen=True)
class RiggedBasis:
    lambdas: tuple
    tail_bound: str | None = None

    def __post_init__(self):
        lam = np.asarray(self.lambdas, dtype=float)
        if lam.ndim != 1 or lam.size == 0:
            raise ValueError("lambdas must be a non-empty 1-D sequence")
        if np.any(~np.isfinite(lam)) or np.any(lam < 1.0):
            raise ValueError("eigenvalues of T must satisfy lambda_i >= 1")
        if np.any(np.diff(lam) < 0):
            raise ValueError("lambdas must be non-decreasing")
        object.__setattr__(self, "lambdas", tuple(float(v) for v in lam))

    @property
    def N(self) -> int:
        return len(self.lambdas)

    @property
    def array(self) -> np.ndarray:
        return np.asarray(self.lambdas)

    def truncate(self, M: int) -> "RiggedBasis":
        if not 1 <= M <= self.N:
            raise DimensionError(f"cannot truncate a rank-{self.N} basis to {M}")
        return RiggedBasis(self.lambdas[:M], self.tail_bound)

    def hs_partial_sums(self) -> np.ndarray:
        """Partial sums of lambda_i^-2 (finite and monotone in N)."""
        return np.cumsum(self.array**-2.0)

    @classmethod
    def power(cls, p: float, N: int) -> "RiggedBasis":
        """lambda_i = i**p; Hilbert-Schmidt (sum lambda^-2 finite) iff p > 1/2."""
        if p <= 0:
            raise ValueError("power generator needs p > 0 to keep lambda non-decreasing")
        lam = np.arange(1, N + 1, dtype=float) ** p
        tail = f"sum i^(-{2 * p:g}) < inf" if p > 0.5 else None
        return cls(tuple(lam), tail)

    @classmethod
    def parse(cls, text: str, N: int | None = None) -> "RiggedBasis":
        """Read ``"power:p"`` (needs N) or an explicit comma list ``"1, 2, 3.5"``."""
        text = text.strip()
        if text.startswith("power:"):
            if N is None:
                raise ValueError("power:<p> basis needs a truncation level N")
            return cls.power(float(text.split(":", 1)[1]), int(N))
        values = [float(tok) for tok in text.replace(";", ",").split(",") if tok.strip()]
        basis = cls(tuple(values))
        if N is not None:
            basis = basis.truncate(int(N))
        return basis


def default_basis(N: int) -> RiggedBasis:
    """lambda_i = i, the simplest admissible family."""
    return RiggedBasis.power(1.0, N)


def _check(x, basis: RiggedBasis | None = None) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.ndim == 0:
        raise DimensionError("coordinate vector must have at least one axis")
    if basis is not None and x.shape[-1] != basis.N:
        raise DimensionError(f"vector of length {x.shape[-1]} paired with rank-{basis.N} basis")
    return x


def norm_minus(x, basis: RiggedBasis):
    x = _check(x, basis)
    return np.sqrt(np.sum(basis.array**-2.0 * x**2, axis=-1))


def norm_plus(x, basis: RiggedBasis):
    x = _check(x, basis)
    return np.sqrt(np.sum(basis.array**2 * x**2, axis=-1))


def norm_zero(x):
    x = _check(x)
    return np.sqrt(np.sum(x**2, axis=-1))


def inner_plus(y, z, basis: RiggedBasis):
    y = _check(y, basis)
    z = _check(z, basis)
    return np.sum(basis.array**2 * y * z, axis=-1)


def inner_minus(y, z, basis: RiggedBasis):
    y = _check(y, basis)
    z = _check(z, basis)
    return np.sum(basis.array**-2.0 * y * z, axis=-1)


def project(x, M: int) -> np.ndarray:
    """P_M: keep the first M coordinates."""
    x = _check(x)
    if M < 1 or M > x.shape[-1]:
        raise DimensionError(f"cannot project a length-{x.shape[-1]} vector to {M} coordinates")
    return x[..., :M].copy()


def one_sided_bound(jacobian, weights) -> np.ndarray:
    """Smallest c with (J y, y)_+ <= c (y, y)_+ for each matrix J (trailing two axes).

    With W = diag(weights) the form is y^T W^2 J y, i.e. z^T (W J W^-1) z for
    z = W y, so c is the top eigenvalue of the symmetric part of W J W^-1.
    Here ``J[i, j] = d b_j / d x_i`` as in (J w)_i = sum_j (d_i b_j) w_j.
    """
    J = np.asarray(jacobian, dtype=float)
    w = np.asarray(weights, dtype=float)
    M = w[:, None] * J / w[None, :]
    S = 0.5 * (M + np.swapaxes(M, -1, -2))
    return np.linalg.eigvalsh(S)[..., -1]
