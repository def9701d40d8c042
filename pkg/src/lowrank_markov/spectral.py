"""SVD-based primitives: truncation, Ky Fan norms, spectral-ball projection,
subspace distances and row-wise simplex projection."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .markov_model import TransitionMatrix

RANK_RTOL = 1e-8


@dataclass(frozen=True)
class SvdFactors:
    left: np.ndarray  # p x k, orthonormal columns
    singular_values: np.ndarray  # k, nonincreasing
    right: np.ndarray  # p x k, orthonormal columns

    def reconstruct(self) -> np.ndarray:
        return (self.left * self.singular_values) @ self.right.T


def _check_rank_arg(k, p, name="k"):
    if not 1 <= k <= p:
        raise ValueError(f"{name} must lie in [1, {p}], got {k}")


def svd_truncate(M, k: int) -> SvdFactors:
    """Top-k singular triplets of M.

    Uses a dense SVD; the rank-k interface is what callers depend on, so a
    partial SVD backend can replace it without touching them.
    """
    M = np.asarray(M, dtype=float)
    _check_rank_arg(k, min(M.shape))
    U, s, Vt = np.linalg.svd(M)
    return SvdFactors(U[:, :k], s[:k], Vt[:k].T)


def singular_values(M) -> np.ndarray:
    return np.linalg.svd(np.asarray(M, dtype=float), compute_uv=False)


def nuclear_norm(M) -> float:
    return float(singular_values(M).sum())


def kyfan_norm(M, r: int) -> float:
    s = singular_values(M)
    _check_rank_arg(r, len(s), "r")
    return float(s[:r].sum())


def numerical_rank(M, rtol: float = RANK_RTOL) -> int:
    """Number of singular values above rtol * sigma_1."""
    s = singular_values(M)
    if s.size == 0 or s[0] == 0:
        return 0
    return int((s > rtol * s[0]).sum())


def kyfan_subgradient(M, r: int) -> np.ndarray:
    """U_r V_r^T from the r leading singular pairs.

    This is the vertex q = (1, ..., 1, 0, ..., 0) of the Ky Fan
    subdifferential; ties sigma_r == sigma_{r+1} are broken by the SVD's
    ordering.
    """
    M = np.asarray(M, dtype=float)
    _check_rank_arg(r, min(M.shape), "r")
    U, _, Vt = np.linalg.svd(M)
    return U[:, :r] @ Vt[:r]


def project_spectral_ball(M, c: float) -> np.ndarray:
    """Frobenius-nearest matrix with spectral norm <= c (singular values clipped)."""
    if c < 0:
        raise ValueError("radius must be nonnegative")
    M = np.asarray(M, dtype=float)
    U, s, Vt = np.linalg.svd(M, full_matrices=False)
    if s[0] <= c:
        return M.copy()
    return (U * np.minimum(s, c)) @ Vt


def sin_theta(U, Uhat, tol: float = 1e-8) -> float:
    """Frobenius sin-theta distance sqrt(r - ||Uhat^T U||_F^2) between column spaces."""
    U = np.asarray(U, dtype=float)
    Uhat = np.asarray(Uhat, dtype=float)
    if U.shape != Uhat.shape:
        raise ValueError(f"shape mismatch {U.shape} vs {Uhat.shape}")
    r = U.shape[1]
    eye = np.eye(r)
    for name, B in (("U", U), ("Uhat", Uhat)):
        if np.abs(B.T @ B - eye).max() > tol:
            raise ValueError(f"{name} does not have orthonormal columns")
    overlap = np.linalg.norm(Uhat.T @ U, "fro") ** 2
    return float(np.sqrt(max(0.0, r - overlap)))


def simplex_project_rows(M) -> TransitionMatrix:
    """Euclidean projection of every row onto the probability simplex.

    Sort-and-threshold: the threshold is the largest theta_k =
    (sum of top k entries - 1) / k that stays below the k-th largest entry.
    """
    M = np.atleast_2d(np.asarray(M, dtype=float))
    u = -np.sort(-M, axis=1)
    css = np.cumsum(u, axis=1) - 1.0
    k = np.arange(1, M.shape[1] + 1)
    active = u - css / k > 0
    rho = M.shape[1] - 1 - np.argmax(active[:, ::-1], axis=1)
    theta = css[np.arange(M.shape[0]), rho] / (rho + 1)
    X = np.maximum(M - theta[:, None], 0.0)
    # remove the last-ulp row-sum drift so rows sum to 1 to machine precision
    X /= X.sum(axis=1, keepdims=True)
    return TransitionMatrix(X)
