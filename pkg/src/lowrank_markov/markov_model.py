"""Transition matrices, low-rank generators, simulation and counting."""

from __future__ import annotations

import bisect
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.sparse.csgraph import connected_components

from .errors import ConvergenceError

ROW_SUM_TOL = 1e-9
NEG_TOL = 1e-12

CHAIN = "chain"
IID_PAIRS = "iid-pairs"
MODES = (CHAIN, IID_PAIRS)


def make_rng(seed):
    """Seedable PCG64 generator; ``seed`` may be an int, a sequence or a Generator."""
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


@dataclass(frozen=True)
class TransitionMatrix:
    """Row-stochastic p x p matrix.

    Entries within ``NEG_TOL`` below zero are clamped to zero; anything more
    negative, or a row sum off by more than ``ROW_SUM_TOL``, is rejected.
    """

    entries: np.ndarray

    def __post_init__(self):
        P = np.array(self.entries, dtype=float)
        if P.ndim != 2 or P.shape[0] != P.shape[1] or P.shape[0] == 0:
            raise ValueError(f"transition matrix must be square and nonempty, got shape {P.shape}")
        if not np.all(np.isfinite(P)):
            raise ValueError("transition matrix has non-finite entries")
        if P.min() < -NEG_TOL:
            raise ValueError(f"transition matrix has negative entry {P.min():.3g}")
        P = np.maximum(P, 0.0)
        dev = np.abs(P.sum(axis=1) - 1.0).max()
        if dev > ROW_SUM_TOL:
            raise ValueError(f"rows must sum to 1 (max deviation {dev:.3g})")
        P.setflags(write=False)
        object.__setattr__(self, "entries", P)

    @property
    def p(self) -> int:
        return self.entries.shape[0]

    @classmethod
    def from_nonnegative(cls, M) -> "TransitionMatrix":
        """Clamp negatives to zero and renormalise rows; all-zero rows become uniform."""
        M = np.maximum(np.asarray(M, dtype=float), 0.0)
        sums = M.sum(axis=1, keepdims=True)
        p = M.shape[1]
        out = np.where(sums > 0, M / np.where(sums > 0, sums, 1.0), 1.0 / p)
        return cls(out)


@dataclass(frozen=True)
class StationaryDistribution:
    weights: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        if w.min() < -NEG_TOL or abs(w.sum() - 1.0) > ROW_SUM_TOL:
            raise ValueError("stationary weights must be a probability vector")
        w = np.maximum(w, 0.0)
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)


@dataclass(frozen=True)
class Trajectory:
    """Either a chain X_0..X_n (1-D ``states``) or n independent pairs (n x 2)."""

    states: np.ndarray
    p: int
    mode: str = CHAIN

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")
        s = np.asarray(self.states, dtype=np.int64)
        if self.mode == CHAIN and s.ndim != 1:
            raise ValueError("chain trajectory must be one-dimensional")
        if self.mode == IID_PAIRS and (s.ndim != 2 or s.shape[1] != 2):
            raise ValueError("iid-pairs trajectory must have shape (n, 2)")
        if s.size and (s.min() < 0 or s.max() >= self.p):
            raise ValueError(f"state indices must lie in [0, {self.p})")
        s.setflags(write=False)
        object.__setattr__(self, "states", s)

    @property
    def n_transitions(self) -> int:
        if self.mode == CHAIN:
            return max(len(self.states) - 1, 0)
        return len(self.states)

    def pairs(self) -> np.ndarray:
        """All transitions as an (n, 2) array."""
        if self.mode == IID_PAIRS:
            return self.states
        return np.column_stack([self.states[:-1], self.states[1:]])


@dataclass(frozen=True)
class TransitionCounts:
    counts: np.ndarray
    row_totals: np.ndarray = field(init=False)
    total: int = field(init=False)

    def __post_init__(self):
        N = np.asarray(self.counts)
        if N.ndim != 2 or N.shape[0] != N.shape[1]:
            raise ValueError("counts must be a square matrix")
        if not np.all(N == np.round(N)) or N.min() < 0:
            raise ValueError("counts must be nonnegative integers")
        N = N.astype(np.int64)
        N.setflags(write=False)
        object.__setattr__(self, "counts", N)
        object.__setattr__(self, "row_totals", N.sum(axis=1))
        object.__setattr__(self, "total", int(N.sum()))

    @property
    def p(self) -> int:
        return self.counts.shape[0]


def _dirichlet_rows(rng, rows, dim):
    return rng.dirichlet(np.ones(dim), size=rows)


def _apply_floor(P, floor):
    if not 0.0 <= floor <= 1.0:
        raise ValueError("floor must lie in [0, 1]")
    if floor == 0.0:
        return P
    return (1.0 - floor) * P + floor / P.shape[0]


def generate_latent_lowrank(p: int, r: int, seed=None, floor: float = 0.0) -> TransitionMatrix:
    """Latent-variable chain U @ Ptilde @ Vt with flat Dirichlet rows in every factor.

    U is p x r, Ptilde r x r and Vt r x p, all row-stochastic, so the product
    is a transition matrix of rank at most r. ``floor`` mixes in the uniform
    row, P <- (1 - floor) P + floor / p.
    """
    if not 1 <= r <= p:
        raise ValueError(f"need 1 <= r <= p, got r={r}, p={p}")
    rng = make_rng(seed)
    U = _dirichlet_rows(rng, p, r)
    Pt = _dirichlet_rows(rng, r, r)
    Vt = _dirichlet_rows(rng, r, p)
    P = U @ Pt @ Vt
    P /= P.sum(axis=1, keepdims=True)
    return TransitionMatrix(_apply_floor(P, floor))


def generate_aggregated(p: int, r: int, seed=None, floor: float = 0.0) -> TransitionMatrix:
    """State-aggregated chain: r nonempty clusters sharing one Dirichlet row each."""
    if not 1 <= r <= p:
        raise ValueError(f"need 1 <= r <= p, got r={r}, p={p}")
    rng = make_rng(seed)
    perm = rng.permutation(p)
    labels = np.empty(p, dtype=np.int64)
    labels[perm[:r]] = np.arange(r)
    labels[perm[r:]] = rng.integers(0, r, size=p - r)
    rows = _dirichlet_rows(rng, r, p)
    return TransitionMatrix(_apply_floor(rows[labels], floor))


def _as_array(P):
    return P.entries if isinstance(P, TransitionMatrix) else np.asarray(P, dtype=float)


def stationary_distribution(P, tol: float = 1e-12, max_iter: int | None = None) -> StationaryDistribution:
    """Power iteration on P^T from the uniform vector.

    Irreducible chains that do not settle within the cap (periodic or slowly
    mixing) fall back to a direct solve of mu^T (P - I) = 0, sum(mu) = 1.
    Raises ConvergenceError when the chain is reducible, since the stationary
    distribution is then not unique.
    """
    P = _as_array(P)
    p = P.shape[0]
    if p > 1:
        ncomp, _ = connected_components(P > 0, directed=True, connection="strong")
        if ncomp > 1:
            raise ConvergenceError(f"chain is reducible ({ncomp} communicating classes)")
    if max_iter is None:
        max_iter = max(100, int(math.ceil(100 * p * math.log(max(p, 2)))))
    mu = np.full(p, 1.0 / p)
    for _ in range(max_iter):
        nxt = mu @ P
        nxt /= nxt.sum()
        step = np.abs(nxt - mu).sum()
        mu = nxt
        if step <= tol:
            return StationaryDistribution(mu)
    # slow-mixing or periodic but irreducible: mu is unique, solve for it directly
    A = np.vstack([P.T - np.eye(p), np.ones((1, p))])
    b = np.zeros(p + 1)
    b[-1] = 1.0
    mu = np.linalg.lstsq(A, b, rcond=None)[0]
    if mu.min() < -1e-10 or np.abs(mu @ P - mu).sum() > 1e-10:
        raise ConvergenceError(f"power iteration did not converge in {max_iter} iterations")
    mu = np.maximum(mu, 0.0)
    return StationaryDistribution(mu / mu.sum())


def simulate(P, n: int, mode: str = CHAIN, seed=None, mu=None) -> Trajectory:
    """Draw n transitions from P.

    chain: X_0 ~ mu, X_{k+1} ~ P(X_k, .). iid-pairs: n independent (i, j)
    with probability mu_i P_ij.
    """
    if n < 1:
        raise ValueError("n must be at least 1")
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}, got {mode!r}")
    P = _as_array(P)
    p = P.shape[0]
    if mu is None:
        mu = stationary_distribution(P).weights
    mu = np.asarray(getattr(mu, "weights", mu), dtype=float)
    rng = make_rng(seed)

    if mode == IID_PAIRS:
        joint = (mu[:, None] * P).ravel()
        flat = rng.choice(p * p, size=n, p=joint / joint.sum())
        return Trajectory(np.column_stack([flat // p, flat % p]), p, IID_PAIRS)

    cum = np.cumsum(P, axis=1)
    cum[:, -1] = 1.0
    rows = [row.tolist() for row in cum]
    u = rng.random(n + 1).tolist()
    x0_cum = np.cumsum(mu)
    x0_cum[-1] = 1.0
    states = [0] * (n + 1)
    x = bisect.bisect_right(x0_cum.tolist(), u[0])
    states[0] = x
    for k in range(1, n + 1):
        x = bisect.bisect_right(rows[x], u[k])
        states[k] = x
    return Trajectory(np.array(states, dtype=np.int64), p, CHAIN)


def downsample(traj: Trajectory, skip: int) -> Trajectory:
    """Keep the transitions (X_{m*skip}, X_{m*skip+1}) as iid pairs."""
    if traj.mode != CHAIN:
        raise ValueError("downsample needs a chain-mode trajectory")
    if skip < 1:
        raise ValueError("skip must be a positive integer")
    starts = np.arange(0, traj.n_transitions, skip)
    if starts.size == 0:
        raise ValueError("downsampling leaves no transitions")
    s = traj.states
    return Trajectory(np.column_stack([s[starts], s[starts + 1]]), traj.p, IID_PAIRS)


def count_transitions(traj: Trajectory) -> TransitionCounts:
    pairs = traj.pairs()
    if len(pairs) == 0:
        raise ValueError("trajectory has no transitions")
    p = traj.p
    flat = np.bincount(pairs[:, 0] * p + pairs[:, 1], minlength=p * p)
    return TransitionCounts(flat.reshape(p, p))


def pairs_from_counts(counts: TransitionCounts) -> np.ndarray:
    """Expand counts into the (n, 2) multiset of transitions, in row-major order."""
    p = counts.p
    flat = np.repeat(np.arange(p * p), counts.counts.ravel())
    return np.column_stack([flat // p, flat % p])
