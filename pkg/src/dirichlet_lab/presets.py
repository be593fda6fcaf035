"""Named drifts, initial data and reference measures addressable from configs."""

from __future__ import annotations

import numpy as np

from .apriori_checks import ReferenceMeasureFD, anharmonic_measure, gaussian_measure
from .parabolic_solver import (
    ConfigurationError,
    DriftFieldFD,
    anharmonic_alpha,
    constant_drift,
    from_expressions,
    ou_drift,
    rotation_drift,
    zero_drift,
)

DRIFTS = ("zero", "ou", "anti-ou", "rotation", "ou+rotation", "constant", "anharmonic")
DATA = ("bump", "bump-offset", "one", "zero")
MEASURES = ("gaussian", "anharmonic")


def drift(name: str, d: int, kappa: float = 0.5) -> DriftFieldFD:
    """Drift preset; ``expr:<b_1>;<b_2>`` builds one from expressions in x0, x1, ..."""
    if name.startswith("expr:"):
        exprs = [e.strip() for e in name[5:].split(";") if e.strip()]
        if len(exprs) != d:
            raise ConfigurationError(f"drift expression has {len(exprs)} components for d={d}")
        return from_expressions(exprs)
    if name == "zero":
        return zero_drift(d)
    if name == "ou":
        return ou_drift(d)
    if name == "anti-ou":
        return ou_drift(d).scaled(-1.0, "anti-ou")
    if name == "constant":
        return constant_drift(np.full(d, 0.5))
    if name in ("rotation", "ou+rotation"):
        if d != 2:
            raise ConfigurationError(f"drift {name!r} needs d=2")
        if name == "rotation":
            return rotation_drift()
        return ou_drift(2) + rotation_drift().scaled(0.5)
    if name == "anharmonic":
        a = anharmonic_alpha(d, kappa)
        dl = ou_drift(d)
        s = a + dl
        return DriftFieldFD(f"anharmonic({kappa:g})", d, s.b, s.jac, a, dl)
    raise ConfigurationError(f"unknown drift preset {name!r}; known: {DRIFTS}")


def initial_datum(name: str, d: int):
    if name == "bump":
        return lambda X: np.exp(-0.5 * np.sum(X**2, axis=0))
    if name == "bump-offset":
        c = np.array([0.5, -0.3, 0.2][:d]).reshape((d,) + (1,) * d)
        return lambda X: np.exp(-0.5 * np.sum((X - c) ** 2, axis=0) / 0.64)
    if name == "one":
        return 1.0
    if name == "zero":
        return 0.0
    raise ConfigurationError(f"unknown initial datum {name!r}; known: {DATA}")


def measure(name: str, d: int, kappa: float = 0.5) -> ReferenceMeasureFD:
    if name == "gaussian":
        return gaussian_measure(np.ones(d))
    if name == "anharmonic":
        if d != 1:
            raise ConfigurationError("the anharmonic reference measure is one-dimensional")
        return anharmonic_measure(kappa)
    raise ConfigurationError(f"unknown measure {name!r}; known: {MEASURES}")


def matching_drift(nu: ReferenceMeasureFD) -> DriftFieldFD:
    """b = β with the measure's own α/δ split."""
    return nu.beta
