"""Negative log-likelihood of a transition matrix, its conjugate, and the plain MLE.

Everything works on the normalised weights w_ij = n_ij / n. The support
Omega is where n_ij > 0; entries off the support never enter a logarithm.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .markov_model import TransitionCounts, TransitionMatrix


@dataclass(frozen=True)
class LikelihoodData:
    weights: np.ndarray
    support: np.ndarray  # bool mask, True on Omega

    @classmethod
    def from_counts(cls, counts) -> "LikelihoodData":
        N = counts.counts if isinstance(counts, TransitionCounts) else np.asarray(counts)
        total = N.sum()
        if total <= 0:
            raise ValueError("counts are empty")
        w = N / total
        w.setflags(write=False)
        mask = N != 0
        mask.setflags(write=False)
        return cls(w, mask)

    @property
    def p(self) -> int:
        return self.weights.shape[0]

    @cached_property
    def support_weights(self) -> np.ndarray:
        return self.weights[self.support]

    @cached_property
    def conjugate_constant(self) -> float:
        """sum_{Omega} w (log w - 1)."""
        w = self.support_weights
        return float((w * (np.log(w) - 1.0)).sum())


def neg_loglik(data: LikelihoodData, Q) -> float:
    """-sum_{Omega} w_ij log Q_ij; +inf when Q vanishes somewhere on Omega."""
    Q = np.asarray(Q, dtype=float)
    if Q.min() < 0:
        raise ValueError(f"Q has a negative entry ({Q.min():.3g})")
    q = Q[data.support]
    if np.any(q <= 0):
        return np.inf
    return float(-(data.weights[data.support] * np.log(q)).sum())


def conjugate_value(data: LikelihoodData, Xi) -> float:
    """Convex conjugate of the negative log-likelihood (with the X >= 0 indicator).

    Finite iff Xi < 0 on Omega and Xi <= 0 off it; then
    sum_{Omega} w (log w - 1 - log(-Xi)).
    """
    Xi = np.asarray(Xi, dtype=float)
    on = Xi[data.support]
    if np.any(on >= 0) or np.any(Xi[~data.support] > 0):
        return np.inf
    return data.conjugate_constant - float(data.support_weights @ np.log(-on))


def prox_conjugate_entry(g, w, sigma):
    """argmin_{xi >= 0} -w log(xi) + (sigma/2)(xi - g)^2, elementwise.

    Positive root of sigma xi^2 - sigma g xi - w = 0 when w > 0, max(g, 0)
    when w == 0. For g < 0 the root is evaluated as 2t / (sqrt(g^2 + 4t) - g)
    with t = w / sigma, which avoids cancellation and gives 0 at w == 0.
    """
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    scalar = np.ndim(g) == 0 and np.ndim(w) == 0
    g, w = np.broadcast_arrays(np.atleast_1d(np.asarray(g, dtype=float)),
                               np.atleast_1d(np.asarray(w, dtype=float)))
    t = w / sigma
    disc = np.sqrt(g * g + 4.0 * t)
    out = 0.5 * (g + disc)
    neg = g < 0
    out[neg] = 2.0 * t[neg] / (disc[neg] - g[neg])
    return float(out[0]) if scalar else out


def empirical_mle(counts: TransitionCounts) -> TransitionMatrix:
    """Row-normalised counts; rows with no visits fall back to uniform."""
    N = counts.counts.astype(float)
    p = counts.p
    tot = counts.row_totals.astype(float)[:, None]
    P = np.where(tot > 0, N / np.where(tot > 0, tot, 1.0), 1.0 / p)
    return TransitionMatrix(P)
