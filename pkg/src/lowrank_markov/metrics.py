"""Accuracy measures for an estimated transition matrix against the truth."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .spectral import sin_theta, svd_truncate

KL_FLOOR = 1e-12


def _arr(M):
    return np.asarray(getattr(M, "entries", M), dtype=float)


@dataclass(frozen=True)
class EvalResult:
    kl: float
    l2_risk: float
    eta_f: float
    eta_u: float
    eta_v: float
    kl_clipped: int = 0  # entries of Q raised to KL_FLOOR where P > 0


def kl_divergence(P, mu, Q) -> float:
    """sum_ij mu_i P_ij log(P_ij / max(Q_ij, floor)); zero-probability terms drop out."""
    P, Q = _arr(P), _arr(Q)
    mu = np.asarray(getattr(mu, "weights", mu), dtype=float)
    mask = P > 0
    Qc = np.maximum(Q, KL_FLOOR)
    terms = (mu[:, None] * P)[mask] * (np.log(P[mask]) - np.log(Qc[mask]))
    return float(max(terms.sum(), 0.0))


def kl_clipped_count(P, Q) -> int:
    P, Q = _arr(P), _arr(Q)
    return int(((P > 0) & (Q < KL_FLOOR)).sum())


def l2_row_risk(P, Q) -> float:
    P, Q = _arr(P), _arr(Q)
    if P.shape != Q.shape:
        raise ValueError(f"shape mismatch {P.shape} vs {Q.shape}")
    return float(((P - Q) ** 2).sum())


def eta_metrics(P, Phat, r: int):
    """(eta_F, eta_U, eta_V): scaled Frobenius error and sin-theta distances
    between the leading r singular subspaces."""
    P, Phat = _arr(P), _arr(Phat)
    p = P.shape[0]
    if not 1 <= r <= p:
        raise ValueError(f"r must lie in [1, {p}]")
    eta_f = float(np.linalg.norm(P - Phat) / math.sqrt(p))
    f, fh = svd_truncate(P, r), svd_truncate(Phat, r)
    return eta_f, sin_theta(f.left, fh.left), sin_theta(f.right, fh.right)


def evaluate(P, Phat, r: int, mu) -> EvalResult:
    eta_f, eta_u, eta_v = eta_metrics(P, Phat, r)
    return EvalResult(kl=kl_divergence(P, mu, Phat), l2_risk=l2_row_risk(P, Phat),
                      eta_f=eta_f, eta_u=eta_u, eta_v=eta_v, kl_clipped=kl_clipped_count(P, Phat))
