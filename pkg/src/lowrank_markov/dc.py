"""Proximal DC iterations on the rank-penalised likelihood, with penalty continuation.

The penalised objective is

    F(X) = f(X) + c (||X||_* - ||X||_(r)),   X 1 = 1,

a difference of the convex f + c||.||_* and c||.||_(r). Each iteration
linearises the Ky Fan term at X^k, adds (alpha/2)||X - X^k||_F^2 and hands
the convex remainder to the ADMM solver.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from .admm import AdmmOptions, DualState, SubproblemSpec, solve_subproblem
from .errors import ConvergenceError, RankInfeasibleError
from .likelihood import LikelihoodData, neg_loglik
from .spectral import kyfan_subgradient, numerical_rank, singular_values

# iterates are ADMM multipliers, row-stochastic only up to the inner tolerance
ROW_TOL = 1e-4


@dataclass(frozen=True)
class PenalizedProblem:
    data: LikelihoodData
    c: float
    r: int
    alpha: float = 1e-3

    def __post_init__(self):
        if not self.c > 0:
            raise ValueError("penalty weight c must be positive")
        if self.alpha < 0:
            raise ValueError("alpha must be nonnegative")
        if not 1 <= self.r <= self.data.p:
            raise ValueError(f"r must lie in [1, {self.data.p}]")


@dataclass
class DcOptions:
    eta: float | None = None  # None -> 1e-6 * (1 + ||X0||_F)
    max_iter: int = 100
    admm: AdmmOptions = field(default_factory=AdmmOptions)


@dataclass
class DcReport:
    objective: list = field(default_factory=list)  # F(X^k), k = 0, 1, ...
    step: list = field(default_factory=list)  # ||X^{k+1} - X^k||_F
    rank: list = field(default_factory=list)  # numerical rank of X^k
    stage: list = field(default_factory=list)  # continuation stage of X^k
    inner_iterations: list = field(default_factory=list)
    c_values: list = field(default_factory=list)  # c per stage
    reason: str = ""
    rank_feasible: bool = False

    def record(self, stage, F, rank, step=None, inner=None):
        self.stage.append(stage)
        self.objective.append(F)
        self.rank.append(rank)
        self.step.append(math.nan if step is None else step)
        self.inner_iterations.append(0 if inner is None else inner)

    def stage_slices(self):
        """Index ranges belonging to each continuation stage."""
        out, start = [], 0
        for i in range(1, len(self.stage) + 1):
            if i == len(self.stage) or self.stage[i] != self.stage[start]:
                out.append(slice(start, i))
                start = i
        return out

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["iteration", "stage", "c", "objective", "step", "rank"])
            for k, (s, F, st, rk) in enumerate(zip(self.stage, self.objective, self.step, self.rank)):
                w.writerow([k, s, repr(self.c_values[s]), repr(F), repr(st), rk])


def penalized_objective(prob: PenalizedProblem, X) -> float:
    X = np.asarray(X, dtype=float)
    if X.min() < 0:
        return math.inf
    f = neg_loglik(prob.data, X)
    if not math.isfinite(f):
        return f
    s = singular_values(X)
    return float(f + prob.c * s[prob.r:].sum())


def initial_point(data: LikelihoodData, floor: float = 1e-8) -> np.ndarray:
    """Empirical MLE with entries floored and rows renormalised (finite log-barrier)."""
    N = data.weights
    tot = N.sum(axis=1, keepdims=True)
    P = np.where(tot > 0, N / np.where(tot > 0, tot, 1.0), 1.0 / data.p)
    P = np.maximum(P, floor)
    return P / P.sum(axis=1, keepdims=True)


def subproblem_for(prob: PenalizedProblem, Xk) -> SubproblemSpec:
    """Convex subproblem at X^k with the proximal term folded into the linear part.

    c||X||_* + f(X) - c<W_k, X> + (alpha/2)||X - X^k||^2 equals the (P)
    objective with linear term -c W_k - alpha X^k, up to a constant.
    """
    Wk = kyfan_subgradient(Xk, prob.r)
    return SubproblemSpec(prob.data, -prob.c * Wk - prob.alpha * Xk, prob.c, prob.alpha)


def _dc_step(prob, X, state, admm_opts):
    spec = subproblem_for(prob, X)
    Xn, state, rep = solve_subproblem(spec, state, admm_opts)
    if not rep.converged:
        raise ConvergenceError(f"inner ADMM did not converge ({rep.reason})", partial=rep)
    return Xn, state, rep


def pdc_solve(prob: PenalizedProblem, X0, opts: DcOptions | None = None, *,
              state: DualState | None = None, report: DcReport | None = None, stage: int = 0):
    """Proximal DC iterations from a feasible X0.

    Returns ``(X, report, state)`` where ``state`` is the last ADMM state
    (reused as a warm start by the caller). Raises ConvergenceError, with the
    partial DcReport attached, if an inner solve fails.
    """
    opts = opts or DcOptions()
    X = np.array(X0, dtype=float)
    if X.min() < 0 or np.abs(X.sum(axis=1) - 1).max() > ROW_TOL:
        raise ValueError("X0 must be row-stochastic")
    F = penalized_objective(prob, X)
    if not math.isfinite(F):
        raise ValueError("X0 must be positive on the observed transitions")
    eta = opts.eta if opts.eta is not None else 1e-6 * (1.0 + np.linalg.norm(X))
    report = report if report is not None else DcReport()
    if len(report.c_values) <= stage:
        report.c_values.append(prob.c)
    report.record(stage, F, numerical_rank(X))

    for _ in range(opts.max_iter):
        try:
            Xn, state, rep = _dc_step(prob, X, state, opts.admm)
        except ConvergenceError as exc:
            report.reason = "inner solver failed"
            raise ConvergenceError(str(exc), partial=report) from exc
        step = float(np.linalg.norm(Xn - X))
        X = Xn
        report.record(stage, penalized_objective(prob, X), numerical_rank(X), step, rep.iterations)
        if step <= eta:
            report.reason = "step tolerance reached"
            return X, report, state
    report.reason = "iteration cap reached"
    return X, report, state


def default_c0(data: LikelihoodData) -> float:
    return 0.1 * float(data.weights.max()) * data.p


@dataclass
class ContinuationSchedule:
    c0: float | None = None  # None -> default_c0(data)
    growth: float = math.sqrt(10.0)
    max_stages: int = 8


def penalty_continuation(data: LikelihoodData, r: int, alpha: float = 1e-3,
                         schedule: ContinuationSchedule | None = None,
                         opts: DcOptions | None = None, X0=None):
    """Run PDC at c0, c0*growth, ... until the iterate has numerical rank <= r.

    Each stage starts from the previous stage's X and ADMM state. Returns
    ``(X, report)`` with ``report.rank_feasible`` set. If the schedule runs out
    first, RankInfeasibleError is raised carrying ``(X, report)``.
    """
    schedule = schedule or ContinuationSchedule()
    opts = opts or DcOptions()
    X = initial_point(data) if X0 is None else np.array(X0, dtype=float)
    c = schedule.c0 if schedule.c0 is not None else default_c0(data)
    report = DcReport()
    state = None

    if numerical_rank(X) <= r:
        prob = PenalizedProblem(data, c, r, alpha)
        report.c_values.append(c)
        report.record(0, penalized_objective(prob, X), numerical_rank(X))
        report.reason = "initial point already rank-feasible"
        report.rank_feasible = True
        return X, report

    for stage in range(schedule.max_stages):
        prob = PenalizedProblem(data, c, r, alpha)
        X, report, state = pdc_solve(prob, X, opts, state=state, report=report, stage=stage)
        k = numerical_rank(X)
        if k <= r:
            X = snap_to_rank(X, k)
            report.rank_feasible = True
            report.reason = f"rank-feasible at stage {stage} ({report.reason})"
            return X, report
        c *= schedule.growth
    report.reason = "stage cap reached above target rank"
    raise RankInfeasibleError(report.reason, partial=(X, report))


def snap_to_rank(X, k: int) -> np.ndarray:
    """Drop the singular values below the numerical-rank threshold.

    They are solver noise at the level of the inner tolerance; keeping them
    would leave c * (sum of the tail) in the penalised objective.
    """
    U, s, Vt = np.linalg.svd(X)
    Xk = (U[:, :k] * s[:k]) @ Vt[:k]
    return np.maximum(Xk, 0.0)


def stationarity_gap(prob: PenalizedProblem, X, admm_opts: AdmmOptions | None = None,
                     state: DualState | None = None) -> float:
    """Step length of one more DC iteration from X; zero exactly at a fixed point."""
    Xn, _, _ = _dc_step(prob, np.asarray(X, dtype=float), state, admm_opts or AdmmOptions())
    return float(np.linalg.norm(Xn - X))
