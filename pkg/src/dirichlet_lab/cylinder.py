"""Cylinder functions f = G∘P_N with analytic derivatives.

Evaluators are vectorised over a leading sample axis: ``value(x)`` maps
``(S, N') -> (S,)`` for any ``N' >= N`` (only the first N coordinates are
read), ``grad`` returns ``(S, N)`` and ``hess`` returns ``(S, N, N)``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np


@dataclass(frozen=True)
class CylinderFunction:
    name: str
    N: int
    G: Callable
    grad_G: Callable
    hess_G: Callable
    sup: float = np.inf
    grad_sup: float = np.inf

    def _head(self, x):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        if x.shape[-1] < self.N:
            raise ValueError(f"{self.name} needs {self.N} coordinates, got {x.shape[-1]}")
        return x[..., : self.N]

    def value(self, x):
        return self.G(self._head(x))

    def grad(self, x, dim: int | None = None):
        """Gradient padded with zeros up to ``dim`` coordinates."""
        g = self.grad_G(self._head(x))
        if dim is not None and dim > self.N:
            g = np.concatenate([g, np.zeros(g.shape[:-1] + (dim - self.N,))], axis=-1)
        return g

    def hess(self, x):
        return self.hess_G(self._head(x))

    def laplacian(self, x):
        return np.trace(self.hess(x), axis1=-2, axis2=-1)

    def __add__(self, other: "CylinderFunction") -> "CylinderFunction":
        N = max(self.N, other.N)

        def pad_g(f, x):
            g = f.grad_G(x[..., : f.N])
            return np.concatenate([g, np.zeros(g.shape[:-1] + (N - f.N,))], axis=-1)

        def pad_h(f, x):
            h = f.hess_G(x[..., : f.N])
            out = np.zeros(h.shape[:-2] + (N, N))
            out[..., : f.N, : f.N] = h
            return out

        return CylinderFunction(
            f"({self.name}+{other.name})",
            N,
            lambda x: self.G(x[..., : self.N]) + other.G(x[..., : other.N]),
            lambda x: pad_g(self, x) + pad_g(other, x),
            lambda x: pad_h(self, x) + pad_h(other, x),
            self.sup + other.sup,
            self.grad_sup + other.grad_sup,
        )


def constant(c: float = 1.0) -> CylinderFunction:
    return CylinderFunction(
        f"const({c:g})",
        1,
        lambda x: np.full(x.shape[0], float(c)),
        lambda x: np.zeros((x.shape[0], 1)),
        lambda x: np.zeros((x.shape[0], 1, 1)),
        abs(c),
        0.0,
    )


def monomial(powers) -> CylinderFunction:
    """prod_i x_i^{k_i}; unbounded, so only used against Gaussian-tailed measures."""
    k = np.asarray(powers, dtype=int)
    N = len(k)

    def G(x):
        return np.prod(x**k, axis=-1)

    def grad(x):
        out = np.empty(x.shape)
        for i in range(N):
            kk = k.copy()
            kk[i] -= 1
            out[:, i] = 0.0 if k[i] == 0 else k[i] * np.prod(x ** np.maximum(kk, 0), axis=-1)
        return out

    def hess(x):
        out = np.zeros(x.shape + (N,))
        for i in range(N):
            for j in range(N):
                kk = k.copy()
                coef = float(k[i])
                kk[i] -= 1
                coef *= kk[j]
                kk[j] -= 1
                if coef != 0.0:
                    out[:, i, j] = coef * np.prod(x ** np.maximum(kk, 0), axis=-1)
        return out

    label = "*".join(f"x{i + 1}^{p}" for i, p in enumerate(k) if p) or "1"
    return CylinderFunction(f"mono({label})", N, G, grad, hess)


def coordinate(j: int) -> CylinderFunction:
    """f(x) = x_j (1-based index)."""
    powers = [0] * j
    powers[j - 1] = 1
    f = monomial(powers)
    return CylinderFunction(f"x{j}", f.N, f.G, f.grad_G, f.hess_G)


def gaussian_bump(center, width: float = 1.0) -> CylinderFunction:
    """exp(-|x - center|^2 / (2 width^2)); bounded, smooth."""
    c = np.asarray(center, dtype=float)
    N = len(c)
    s2 = float(width) ** 2

    def G(x):
        return np.exp(-np.sum((x - c) ** 2, axis=-1) / (2 * s2))

    def grad(x):
        return -(x - c) / s2 * G(x)[:, None]

    def hess(x):
        d = x - c
        g = G(x)[:, None, None]
        return (d[:, :, None] * d[:, None, :] / s2**2 - np.eye(N) / s2) * g

    return CylinderFunction(f"bump{N}", N, G, grad, hess, 1.0, 1.0 / (width * np.sqrt(np.e)))


def cosine(j: int, freq: float = 1.0) -> CylinderFunction:
    """cos(freq * x_j)."""

    def G(x):
        return np.cos(freq * x[:, j - 1])

    def grad(x):
        out = np.zeros(x.shape)
        out[:, j - 1] = -freq * np.sin(freq * x[:, j - 1])
        return out

    def hess(x):
        out = np.zeros(x.shape + (x.shape[-1],))
        out[:, j - 1, j - 1] = -(freq**2) * np.cos(freq * x[:, j - 1])
        return out

    return CylinderFunction(f"cos({freq:g}x{j})", j, G, grad, hess, 1.0, abs(freq))


def product(f: CylinderFunction, g: CylinderFunction) -> CylinderFunction:
    N = max(f.N, g.N)

    def G(x):
        return f.G(x[..., : f.N]) * g.G(x[..., : g.N])

    def grad(x):
        return f.grad(x, N) * g.value(x)[:, None] + g.grad(x, N) * f.value(x)[:, None]

    def hess(x):
        hf = np.zeros(x.shape[:1] + (N, N))
        hg = np.zeros_like(hf)
        hf[:, : f.N, : f.N] = f.hess(x)
        hg[:, : g.N, : g.N] = g.hess(x)
        gf = f.grad(x, N)
        gg = g.grad(x, N)
        return (
            hf * g.value(x)[:, None, None]
            + hg * f.value(x)[:, None, None]
            + gf[:, :, None] * gg[:, None, :]
            + gg[:, :, None] * gf[:, None, :]
        )

    return CylinderFunction(
        f"{f.name}*{g.name}", N, G, grad, hess, f.sup * g.sup,
        f.grad_sup * g.sup + g.grad_sup * f.sup,
    )


def registry() -> dict:
    """Named presets addressable from configs."""
    return {
        "one": constant(1.0),
        "x1": coordinate(1),
        "x2": coordinate(2),
        "x1^2": monomial([2]),
        "x1^3": monomial([3]),
        "x1*x2": monomial([1, 1]),
        "bump1": gaussian_bump([0.0], 1.0),
        "bump2": gaussian_bump([0.0, 0.0], 1.0),
        "cos1": cosine(1, 1.0),
        "cos2": cosine(2, 1.0),
    }


def from_name(name: str) -> CylinderFunction:
    reg = registry()
    if name not in reg:
        raise KeyError(f"unknown cylinder function preset {name!r}; known: {sorted(reg)}")
    return reg[name]
