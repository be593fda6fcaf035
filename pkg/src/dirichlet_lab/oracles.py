"""Independent reference solutions for the grid solver."""

from __future__ import annotations

import itertools

import numpy as np
from numpy.polynomial.hermite_e import hermegauss


def mehler(f, t: float, X, order: int = 48) -> np.ndarray:
    """E f(e^{-t} x + sqrt(1 - e^{-2t}) Z), Z ~ N(0, I), by tensor Gauss-Hermite quadrature.

    This is the Ornstein-Uhlenbeck semigroup for u_t = Δu - (x, ∇u); ``f``
    takes arrays of shape (d, ...).
    """
    X = np.asarray(X, dtype=float)
    d = X.shape[0]
    nodes, weights = hermegauss(order)
    weights = weights / np.sqrt(2 * np.pi)
    a = np.exp(-t)
    s = np.sqrt(-np.expm1(-2 * t))
    out = np.zeros(X.shape[1:])
    for idx in itertools.product(range(order), repeat=d):
        z = nodes[list(idx)].reshape((d,) + (1,) * (X.ndim - 1))
        out += np.prod(weights[list(idx)]) * f(a * X + s * z)
    return out


def heat_gaussian(t: float, X, center, width: float) -> np.ndarray:
    """Solution of u_t = Δu from exp(-|x - c|^2 / (2 w^2)): variance grows by 2t."""
    X = np.asarray(X, dtype=float)
    d = X.shape[0]
    c = np.asarray(center, dtype=float).reshape((d,) + (1,) * (X.ndim - 1))
    v = width**2 + 2.0 * t
    return (width**2 / v) ** (d / 2) * np.exp(-np.sum((X - c) ** 2, axis=0) / (2 * v))


def ou_gaussian(t: float, X, center, width: float) -> np.ndarray:
    """Closed form of the OU semigroup on a Gaussian bump (product over axes)."""
    X = np.asarray(X, dtype=float)
    d = X.shape[0]
    c = np.asarray(center, dtype=float).reshape((d,) + (1,) * (X.ndim - 1))
    a = np.exp(-t)
    v = width**2 - np.expm1(-2 * t)
    return (width**2 / v) ** (d / 2) * np.exp(-np.sum((a * X - c) ** 2, axis=0) / (2 * v))
