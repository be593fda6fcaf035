"""Self-normalised weighted estimators."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp


def normalized_weights(log_weights) -> np.ndarray:
    lw = np.asarray(log_weights, dtype=float)
    return np.exp(lw - logsumexp(lw))


def effective_sample_size(log_weights) -> float:
    """(sum w)^2 / sum w^2, computed in log space."""
    lw = np.asarray(log_weights, dtype=float)
    return float(np.exp(2.0 * logsumexp(lw) - logsumexp(2.0 * lw)))


@dataclass(frozen=True)
class Estimate:
    value: float
    stderr: float

    def as_dict(self) -> dict:
        return {"value": self.value, "stderr": self.stderr}


def weighted_mean(values, weights) -> Estimate:
    """Ratio estimator sum w v with delta-method standard error sqrt(sum w^2 (v - mean)^2).

    ``weights`` must already be normalised to sum to one.
    """
    v = np.asarray(values, dtype=float)
    w = np.asarray(weights, dtype=float)
    mean = float(np.dot(w, v))
    se = float(np.sqrt(np.dot(w**2, (v - mean) ** 2)))
    return Estimate(mean, se)


def within_sigma(diff: float, stderr: float, sigma: float) -> bool:
    return abs(diff) <= sigma * stderr


def lp_norm_estimate(abs_values, weights, p: float) -> Estimate:
    """(E|X|^p)^{1/p} with the delta-method error of the p-th moment propagated."""
    moment = weighted_mean(np.asarray(abs_values, dtype=float) ** p, weights)
    if moment.value <= 0:
        return Estimate(0.0, 0.0)
    value = moment.value ** (1.0 / p)
    return Estimate(value, moment.stderr * value / (p * moment.value))
