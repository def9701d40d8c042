"""The four transition-matrix estimators behind one interface: mle, svd, nu, rank."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .admm import AdmmOptions, SubproblemSpec, solve_subproblem
from .dc import ContinuationSchedule, DcOptions, penalty_continuation
from .errors import ConvergenceError
from .likelihood import LikelihoodData, empirical_mle
from .markov_model import TransitionCounts, TransitionMatrix, Trajectory, make_rng, pairs_from_counts
from .spectral import simplex_project_rows, svd_truncate

KINDS = ("mle", "svd", "nu", "rank")

DEFAULT_LAMBDA_GRID = tuple(10.0 ** k for k in range(-4, 1))
CV_FLOOR = 1e-12


def _rank_dc_options():
    # the numerical-rank test (1e-8 relative) needs the multiplier's noise
    # floor, which tracks the inner tolerance, to sit well below it
    return DcOptions(admm=AdmmOptions(tol=1e-9))


@dataclass
class EstimatorSpec:
    kind: str
    r: int | None = None
    lam: float | None = None  # nu only; None -> cross-validated
    alpha: float = 1e-3  # rank only
    lambda_grid: tuple = DEFAULT_LAMBDA_GRID
    cv_folds: int = 5
    cv_seed: int = 0
    admm: AdmmOptions = field(default_factory=AdmmOptions)
    dc: DcOptions = field(default_factory=_rank_dc_options)
    schedule: ContinuationSchedule = field(default_factory=ContinuationSchedule)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown estimator {self.kind!r}; expected one of {KINDS}")
        needs_r = self.kind in ("svd", "rank")
        if needs_r and self.r is None:
            raise ValueError(f"estimator {self.kind!r} needs a rank r")
        if not needs_r and self.r is not None:
            raise ValueError(f"estimator {self.kind!r} takes no rank")
        if self.lam is not None and self.lam <= 0:
            raise ValueError("lambda must be positive")


def fit_nuclear(counts: TransitionCounts, lam: float, opts: AdmmOptions | None = None, warm=None):
    """Nuclear-norm penalised MLE: a single (P) solve with W = 0, alpha = 0, c = lam."""
    data = LikelihoodData.from_counts(counts)
    spec = SubproblemSpec(data, np.zeros((counts.p, counts.p)), lam, 0.0)
    X, state, rep = solve_subproblem(spec, warm, opts)
    if not rep.converged:
        raise ConvergenceError(f"nuclear-norm solve did not converge ({rep.reason})", partial=rep)
    return TransitionMatrix.from_nonnegative(X), state, rep


def estimate(spec: EstimatorSpec, counts: TransitionCounts):
    """Fit ``spec.kind`` to ``counts``; returns ``(TransitionMatrix, report dict)``."""
    if counts.total == 0:
        raise ValueError("counts are empty")
    if spec.r is not None and not 1 <= spec.r <= counts.p:
        raise ValueError(f"r must lie in [1, {counts.p}]")
    kind = spec.kind
    if kind == "mle":
        return empirical_mle(counts), {"kind": kind}
    if kind == "svd":
        f = svd_truncate(empirical_mle(counts).entries, spec.r)
        return simplex_project_rows(f.reconstruct()), {"kind": kind}
    if kind == "nu":
        lam = spec.lam
        report = {"kind": kind}
        if lam is None:
            lam, scores = cross_validate_lambda(counts, spec.lambda_grid, spec.cv_folds,
                                                seed=spec.cv_seed, opts=spec.admm)
            report["cv_scores"] = scores
        P, _, rep = fit_nuclear(counts, lam, spec.admm)
        report.update(lam=lam, admm=rep)
        return P, report
    data = LikelihoodData.from_counts(counts)
    X, dc_report = penalty_continuation(data, spec.r, spec.alpha, spec.schedule, spec.dc)
    return TransitionMatrix.from_nonnegative(X), {"kind": kind, "dc": dc_report}


def _fold_pairs(source, folds, seed):
    if isinstance(source, Trajectory):
        pairs, p = source.pairs(), source.p
    else:
        pairs, p = pairs_from_counts(source), source.p
    if len(pairs) < folds:
        raise ValueError(f"need at least {folds} transitions for {folds}-fold CV, got {len(pairs)}")
    order = make_rng(seed).permutation(len(pairs))
    return [pairs[idx] for idx in np.array_split(order, folds)], p


def _counts_of(pairs, p):
    flat = np.bincount(pairs[:, 0] * p + pairs[:, 1], minlength=p * p)
    return TransitionCounts(flat.reshape(p, p))


def heldout_score(P, pairs) -> float:
    """Average negative log-probability of held-out pairs, probabilities floored."""
    probs = np.maximum(np.asarray(P)[pairs[:, 0], pairs[:, 1]], CV_FLOOR)
    return float(-np.log(probs).mean())


def cross_validate_lambda(source, grid, folds: int = 5, seed=0, opts: AdmmOptions | None = None):
    """K-fold CV over transition pairs for the nuclear-norm weight.

    ``source`` is a Trajectory or TransitionCounts (pairs are exchangeable, so
    counts determine the pair multiset). Returns ``(best_lambda, scores)``
    where scores maps each lambda to its mean held-out score; ties go to the
    smaller lambda.
    """
    grid = sorted(float(g) for g in grid)
    if not grid:
        raise ValueError("lambda grid is empty")
    if len(grid) == 1:
        return grid[0], {grid[0]: float("nan")}
    parts, p = _fold_pairs(source, folds, seed)
    totals = {lam: 0.0 for lam in grid}
    for k in range(folds):
        train = np.concatenate([parts[j] for j in range(folds) if j != k])
        train_counts = _counts_of(train, p)
        warm = None
        for lam in reversed(grid):  # large lambda first: cheap, low-rank warm starts
            P, warm, _ = fit_nuclear(train_counts, lam, opts, warm)
            totals[lam] += heldout_score(P.entries, parts[k])
    scores = {lam: totals[lam] / folds for lam in grid}
    best = min(grid, key=lambda lam: (scores[lam], lam))
    return best, scores
