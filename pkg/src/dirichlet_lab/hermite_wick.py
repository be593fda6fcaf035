"""Probabilists' Hermite polynomials and Wick powers.

``H_n(t) = sum_m (-1)^m a_{nm} t^(n-2m)`` with ``a_{nm} = n! / ((n-2m)! 2^m m!)``,
and the Wick power of a centred Gaussian value ``z`` with variance ``c`` is
``:z^n: = c^(n/2) H_n(z / sqrt(c))``.
"""

from __future__ import annotations

from math import factorial

import numpy as np

from .kernels import wick_stack


def hermite_coefficients(n: int) -> list[int]:
    """Exact integer coefficients of H_n, indexed by power of t."""
    if n < 0:
        raise ValueError("degree must be nonnegative")
    coeffs = [0] * (n + 1)
    for m in range(n // 2 + 1):
        a_nm = factorial(n) // (factorial(n - 2 * m) * 2**m * factorial(m))
        coeffs[n - 2 * m] = (-1) ** m * a_nm
    return coeffs


def hermite_coefficients_recurrence(n: int) -> list[int]:
    """Same coefficients from H_{k+1} = t H_k - k H_{k-1}; integer arithmetic only."""
    if n < 0:
        raise ValueError("degree must be nonnegative")
    prev, cur = [1], [0, 1]
    if n == 0:
        return prev
    for k in range(1, n):
        nxt = [0] + cur
        for i, c in enumerate(prev):
            nxt[i] -= k * c
        prev, cur = cur, nxt
    return cur


def hermite_eval(n: int, t):
    """H_n(t), evaluated through the three-term recurrence (stable for large |t|)."""
    if n < 0:
        raise ValueError("degree must be nonnegative")
    t = np.asarray(t, dtype=float)
    return wick_stack(t, 1.0, n)[n]


def hermite_eval_power_sum(n: int, t):
    """H_n(t) by the explicit power sum; kept as an independent route for tests."""
    t = np.asarray(t, dtype=float)
    return np.polynomial.polynomial.polyval(t, [float(c) for c in hermite_coefficients(n)])


def wick_power(z, c, n: int):
    """``c^(n/2) H_n(z / sqrt(c))`` for c > 0."""
    c_arr = np.asarray(c, dtype=float)
    if np.any(c_arr <= 0):
        raise ValueError("Wick variance c must be positive")
    if n < 0:
        raise ValueError("degree must be nonnegative")
    return wick_stack(z, c_arr, n)[n]


def wick_powers(z, c, nmax: int):
    """All Wick powers ``:z^0: .. :z^nmax:`` stacked on a leading axis."""
    c_arr = np.asarray(c, dtype=float)
    if np.any(c_arr <= 0):
        raise ValueError("Wick variance c must be positive")
    return wick_stack(z, c_arr, nmax)
