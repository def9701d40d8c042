"""Symmetric Gauss-Seidel ADMM for the nuclear-norm penalised likelihood subproblem.

Primal problem (P), over p x p matrices X:

    min  f(X) + <W, X> + c ||X||_* + (alpha/2) ||X||_F^2   s.t.  X 1 = 1

with f the negative log-likelihood plus the indicator of X >= 0. The solver
works on its dual

    min  f*(-Xi) - <1, y> + (alpha/2) ||Z||_F^2
    s.t. Xi + y 1^T + S + alpha Z = W,   ||S||_2 <= c

and recovers X as the multiplier of the equality constraint. One sweep
updates y, Xi, y, Z, S, Z and then the multiplier; the Z steps are skipped
when alpha == 0.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from .likelihood import LikelihoodData, conjugate_value, neg_loglik, prox_conjugate_entry
from .spectral import nuclear_norm, project_spectral_ball

GOLDEN = (1.0 + math.sqrt(5.0)) / 2.0


@dataclass(frozen=True)
class SubproblemSpec:
    data: LikelihoodData
    W: np.ndarray
    c: float
    alpha: float = 0.0

    def __post_init__(self):
        if not self.c > 0:
            raise ValueError("nuclear-norm weight c must be positive")
        if self.alpha < 0:
            raise ValueError("alpha must be nonnegative")
        W = np.asarray(self.W, dtype=float)
        if W.shape != self.data.weights.shape:
            raise ValueError("W must match the data shape")
        object.__setattr__(self, "W", W)

    @property
    def p(self) -> int:
        return self.data.p


@dataclass
class DualState:
    Xi: np.ndarray
    y: np.ndarray
    S: np.ndarray
    Z: np.ndarray
    X: np.ndarray
    sigma: float = 1.0

    @classmethod
    def initial(cls, p: int, sigma: float = 1.0, X=None) -> "DualState":
        zeros = np.zeros((p, p))
        X0 = np.full((p, p), 1.0 / p) if X is None else np.array(X, dtype=float)
        return cls(zeros.copy(), np.zeros(p), zeros.copy(), zeros.copy(), X0, sigma)

    def copy(self) -> "DualState":
        return DualState(self.Xi.copy(), self.y.copy(), self.S.copy(), self.Z.copy(),
                         self.X.copy(), self.sigma)


@dataclass(frozen=True)
class KktResiduals:
    """Relative residuals.

    primal_feas: ||X 1 - 1|| / (1 + sqrt(p))
    dual_feas:   ||Xi + y 1^T + S + alpha Z - W||_F / (1 + ||W||_F)
    gap:         relative change of X over the last sweep
    comp:        optimality of X against the dual blocks (-Xi in df(X),
                 -S in c d||X||_*, Z = -X), relative to 1 + ||X||_F
    """

    primal_feas: float
    dual_feas: float
    gap: float = 0.0
    comp: float = 0.0

    def max(self) -> float:
        return max(self.primal_feas, self.dual_feas, self.gap, self.comp)


@dataclass
class AdmmOptions:
    tol: float = 1e-6
    max_iter: int = 5000
    gamma: float = 1.618
    sigma0: float = 1.0
    sigma_factor: float = 1.3
    sigma_ratio: float = 10.0
    sigma_every: int = 10
    sigma_freeze: float = 0.8  # fraction of max_iter after which sigma is fixed


@dataclass
class SolverReport:
    lagrangian: list = field(default_factory=list)
    primal_feas: list = field(default_factory=list)
    dual_feas: list = field(default_factory=list)
    sigma: list = field(default_factory=list)
    iterations: int = 0
    converged: bool = False
    reason: str = ""
    residuals: KktResiduals | None = None

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["iteration", "lagrangian", "primal_feas", "dual_feas", "sigma"])
            for k, row in enumerate(zip(self.lagrangian, self.primal_feas, self.dual_feas, self.sigma), 1):
                w.writerow([k, *(repr(float(v)) for v in row)])


def _Astar(y):
    return y[:, None]


def constraint_residual(state: DualState, spec: SubproblemSpec) -> np.ndarray:
    return state.Xi + _Astar(state.y) + state.S + spec.alpha * state.Z - spec.W


def augmented_lagrangian(state: DualState, spec: SubproblemSpec) -> float:
    """L_sigma(Xi, y, S, Z; X); +inf outside the domain of f*(-Xi) or the spectral ball."""
    s = state.sigma
    fstar = conjugate_value(spec.data, -state.Xi)
    shifted = constraint_residual(state, spec) + state.X / s
    return float(fstar - state.y.sum() + 0.5 * spec.alpha * np.vdot(state.Z, state.Z)
                 + 0.5 * s * np.vdot(shifted, shifted) - np.vdot(state.X, state.X) / (2 * s))


def update_y(state: DualState, spec: SubproblemSpec) -> np.ndarray:
    s = state.sigma
    R = spec.W - state.Xi - state.S - spec.alpha * state.Z - state.X / s
    return (R.sum(axis=1) + 1.0 / s) / spec.p


def update_xi(state: DualState, spec: SubproblemSpec) -> np.ndarray:
    s = state.sigma
    G = spec.W - _Astar(state.y) - state.S - spec.alpha * state.Z - state.X / s
    return prox_conjugate_entry(G, spec.data.weights, s)


def update_z(state: DualState, spec: SubproblemSpec) -> np.ndarray:
    if spec.alpha <= 0:
        raise ValueError("the Z block only exists for alpha > 0")
    s = state.sigma
    R = state.Xi + _Astar(state.y) + state.S - spec.W + state.X / s
    return -s * R / (1.0 + s * spec.alpha)


def update_s(state: DualState, spec: SubproblemSpec) -> np.ndarray:
    s = state.sigma
    R = state.Xi + _Astar(state.y) + spec.alpha * state.Z - spec.W + state.X / s
    return project_spectral_ball(-R, spec.c)


def _svt(M, tau):
    U, s, Vt = np.linalg.svd(M, full_matrices=False)
    return (U * np.maximum(s - tau, 0.0)) @ Vt


def kkt_residuals(state: DualState, spec: SubproblemSpec, X_prev=None, with_comp: bool = True) -> KktResiduals:
    X = state.X
    p = spec.p
    pf = np.linalg.norm(X.sum(axis=1) - 1.0) / (1.0 + math.sqrt(p))
    df = np.linalg.norm(constraint_residual(state, spec)) / (1.0 + np.linalg.norm(spec.W))
    xn = 1.0 + np.linalg.norm(X)
    gap = 0.0 if X_prev is None else np.linalg.norm(X - X_prev) / (1.0 + np.linalg.norm(X_prev))
    comp = 0.0
    if with_comp:
        # X = prox_f(X - Xi) and X = prox_{c||.||_*}(X - S) characterise the
        # subgradient inclusions; Z = -X is the stationarity of the Z block.
        r_xi = X - prox_conjugate_entry(X - state.Xi, spec.data.weights, 1.0)
        r_s = X - _svt(X - state.S, spec.c)
        comp = math.sqrt(np.vdot(r_xi, r_xi) + np.vdot(r_s, r_s))
        if spec.alpha > 0:
            comp = math.hypot(comp, spec.alpha * np.linalg.norm(state.Z + X))
        comp /= xn
    return KktResiduals(float(pf), float(df), float(gap), float(comp))


def primal_objective(spec: SubproblemSpec, X) -> float:
    """Objective of (P) at X (constraint X 1 = 1 not enforced here)."""
    X = np.asarray(X, dtype=float)
    f = neg_loglik(spec.data, np.maximum(X, 0.0)) if X.min() >= 0 else np.inf
    return float(f + np.vdot(spec.W, X) + spec.c * nuclear_norm(X) + 0.5 * spec.alpha * np.vdot(X, X))


def dual_objective(state: DualState, spec: SubproblemSpec) -> float:
    """Objective of the dual minimisation; at optimality it equals -primal_objective."""
    return float(conjugate_value(spec.data, -state.Xi) - state.y.sum()
                 + 0.5 * spec.alpha * np.vdot(state.Z, state.Z))


def sweep(state: DualState, spec: SubproblemSpec, gamma: float = 1.618) -> DualState:
    """One sGS-ADMM iteration, in place: y, Xi, y, (Z), S, (Z), multiplier."""
    state.y = update_y(state, spec)
    state.Xi = update_xi(state, spec)
    state.y = update_y(state, spec)
    if spec.alpha > 0:
        state.Z = update_z(state, spec)
    state.S = update_s(state, spec)
    if spec.alpha > 0:
        state.Z = update_z(state, spec)
    state.X = state.X + gamma * state.sigma * constraint_residual(state, spec)
    return state


def solve_subproblem(spec: SubproblemSpec, warm: DualState | None = None, opts: AdmmOptions | None = None):
    """Run the sGS-ADMM from ``warm`` (or a default start) until the KKT
    residuals fall below ``opts.tol`` or the iteration cap is hit.

    Returns ``(X, state, report)``. X is the multiplier clipped at zero: off
    the support it may sit a fraction of ``tol`` below zero, outside the
    domain of f. ``state.X`` keeps the raw multiplier. On hitting the cap the
    best iterate seen (smallest maximal residual) is returned with
    ``report.converged`` False. The warm state is not modified.
    """
    opts = opts or AdmmOptions()
    if not 0 < opts.gamma < GOLDEN:
        raise ValueError(f"steplength gamma must lie in (0, {GOLDEN:.6f})")
    state = warm.copy() if warm is not None else DualState.initial(spec.p, opts.sigma0)
    report = SolverReport()
    if opts.max_iter <= 0:
        report.reason = "no iterations requested"
        report.residuals = kkt_residuals(state, spec)
        return state.X.copy(), state, report

    freeze_at = int(opts.sigma_freeze * opts.max_iter)
    best, best_res = None, math.inf
    next_comp = 0  # the comp residual costs an SVD; evaluate it sparingly
    for k in range(1, opts.max_iter + 1):
        X_prev = state.X
        sweep(state, spec, opts.gamma)
        res = kkt_residuals(state, spec, X_prev, with_comp=False)
        report.lagrangian.append(augmented_lagrangian(state, spec))
        report.primal_feas.append(res.primal_feas)
        report.dual_feas.append(res.dual_feas)
        report.sigma.append(state.sigma)
        report.iterations = k

        balance = k % opts.sigma_every == 0 and k < freeze_at
        if balance or (res.max() <= opts.tol and k >= next_comp):
            res = kkt_residuals(state, spec, X_prev)
            next_comp = k + opts.sigma_every
            if res.max() <= opts.tol:
                report.converged = True
                report.reason = "kkt tolerance reached"
                report.residuals = res
                return np.maximum(state.X, 0.0), state, report
        if res.max() < best_res:
            best, best_res = state.copy(), res.max()

        if balance:
            # primal side: X 1 = 1 and optimality of X; dual side: the (D) constraint
            pside, dside = max(res.primal_feas, res.comp), res.dual_feas
            if dside > opts.sigma_ratio * pside:
                state.sigma *= opts.sigma_factor
            elif pside > opts.sigma_ratio * dside:
                state.sigma /= opts.sigma_factor

    state = best if best is not None else state
    report.reason = "iteration cap reached"
    report.residuals = kkt_residuals(state, spec)
    return np.maximum(state.X, 0.0), state, report
