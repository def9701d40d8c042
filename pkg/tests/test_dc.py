import math

import numpy as np
import pytest

from lowrank_markov.admm import AdmmOptions, primal_objective
from lowrank_markov.dc import (
    ContinuationSchedule,
    DcOptions,
    PenalizedProblem,
    default_c0,
    initial_point,
    pdc_solve,
    penalized_objective,
    penalty_continuation,
    stationarity_gap,
    subproblem_for,
)
from lowrank_markov.errors import RankInfeasibleError
from lowrank_markov.likelihood import LikelihoodData, neg_loglik
from lowrank_markov.markov_model import IID_PAIRS, count_transitions, generate_aggregated, generate_latent_lowrank, simulate
from lowrank_markov.spectral import kyfan_subgradient, nuclear_norm, numerical_rank

from instances import desk_instance

TIGHT = DcOptions(admm=AdmmOptions(tol=1e-9))
ALPHA = 1e-3


def _data(P, n, seed):
    return LikelihoodData.from_counts(count_transitions(simulate(P, n, IID_PAIRS, seed=seed)))


def assert_sufficient_decrease(report, alpha):
    for sl in report.stage_slices():
        F, step = report.objective[sl], report.step[sl]
        for k in range(len(F) - 1):
            bound = F[k] - 0.5 * alpha * step[k + 1] ** 2 + 1e-7 * (1 + abs(F[k]))
            assert F[k + 1] <= bound, (k, F[k], F[k + 1])


@pytest.fixture(scope="module")
def small():
    P = generate_aggregated(4, 2, seed=3)
    return P, _data(P, 10**6, 4)


@pytest.fixture(scope="module")
def medium():
    P = generate_latent_lowrank(20, 3, seed=5)
    return P, _data(P, 200_000, 6)


class TestObjective:
    def test_low_rank_equals_loglik(self, small):
        P, d = small
        prob = PenalizedProblem(d, 1.0, 2)
        assert penalized_objective(prob, P.entries) == pytest.approx(neg_loglik(d, P.entries), abs=1e-12)

    def test_tiny_c(self, rng):
        d = LikelihoodData.from_counts(rng.integers(1, 9, size=(5, 5)))
        X = initial_point(d)
        assert abs(penalized_objective(PenalizedProblem(d, 1e-12, 1), X) - neg_loglik(d, X)) <= 1e-10

    def test_tail_penalty(self):
        d = LikelihoodData.from_counts(np.ones((3, 3), dtype=int))
        X = np.array([[0.8, 0.1, 0.1], [0.1, 0.8, 0.1], [0.1, 0.1, 0.8]])
        s = np.linalg.svd(X, compute_uv=False)
        val = penalized_objective(PenalizedProblem(d, 0.7, 1), X)
        assert val - neg_loglik(d, X) == pytest.approx(0.7 * s[1:].sum(), rel=1e-12)

    def test_negative_entry_is_inf(self):
        d = LikelihoodData.from_counts(np.ones((2, 2), dtype=int))
        assert penalized_objective(PenalizedProblem(d, 1.0, 1), [[1.1, -0.1], [0.5, 0.5]]) == math.inf

    @pytest.mark.parametrize("kw", [dict(c=0.0, r=1), dict(c=1.0, r=0), dict(c=1.0, r=4), dict(c=1.0, r=1, alpha=-1)])
    def test_problem_validation(self, kw):
        d = LikelihoodData.from_counts(np.ones((3, 3), dtype=int))
        with pytest.raises(ValueError):
            PenalizedProblem(d, **kw)

    def test_folded_linear_term(self, rng):
        # (P) objective with W = -c W_k - alpha X^k equals the unfolded DC model up to a constant
        d = LikelihoodData.from_counts(rng.integers(1, 9, size=(4, 4)))
        prob = PenalizedProblem(d, 0.3, 2, 0.05)
        Xk = initial_point(d)
        spec = subproblem_for(prob, Xk)
        Wk = kyfan_subgradient(Xk, 2)
        diffs = []
        for _ in range(10):
            X = rng.dirichlet(np.ones(4), size=4)
            unfolded = (neg_loglik(d, X) + prob.c * nuclear_norm(X) - prob.c * np.vdot(Wk, X)
                        + 0.5 * prob.alpha * np.linalg.norm(X - Xk) ** 2)
            diffs.append(primal_objective(spec, X) - unfolded)
        assert np.ptp(diffs) <= 1e-12
        assert diffs[0] == pytest.approx(-0.5 * prob.alpha * np.linalg.norm(Xk) ** 2, abs=1e-12)


class TestPdc:
    def test_infinite_eta_single_step(self, medium):
        _, d = medium
        prob = PenalizedProblem(d, default_c0(d), 3)
        X, rep, _ = pdc_solve(prob, initial_point(d), DcOptions(eta=math.inf))
        assert len(rep.objective) == 2 and rep.reason == "step tolerance reached"

    def test_critical_start_stops_at_once(self, small):
        _, d = small
        prob = PenalizedProblem(d, default_c0(d), 2)
        X, rep, state = pdc_solve(prob, initial_point(d), DcOptions(max_iter=1000, admm=TIGHT.admm))
        assert rep.reason == "step tolerance reached"
        eta = 1e-6 * (1 + np.linalg.norm(X))
        X2, rep2, _ = pdc_solve(prob, X, DcOptions(eta=eta, admm=TIGHT.admm), state=state)
        assert len(rep2.step) == 2 and rep2.step[1] <= eta

    def test_decrease_and_rank(self, medium):
        _, d = medium
        X, rep = penalty_continuation(d, 3, ALPHA, opts=TIGHT)
        assert_sufficient_decrease(rep, ALPHA)
        assert rep.rank_feasible and numerical_rank(X) <= 3

    def test_iterates_stochastic(self, medium):
        _, d = medium
        prob = PenalizedProblem(d, default_c0(d), 3)
        X = initial_point(d)
        state = None
        for _ in range(4):
            X, _, state = pdc_solve(prob, X, DcOptions(max_iter=1, admm=TIGHT.admm), state=state)
            assert X.min() >= -1e-8
            assert np.abs(X.sum(axis=1) - 1).max() <= 1e-7

    def test_bad_start(self, medium):
        _, d = medium
        prob = PenalizedProblem(d, 1.0, 3)
        with pytest.raises(ValueError, match="row-stochastic"):
            pdc_solve(prob, np.full((20, 20), 0.1))
        with pytest.raises(ValueError, match="positive"):
            pdc_solve(prob, np.eye(20))


class TestContinuation:
    def test_true_rank_chain_feasible(self, medium):
        P, d = medium
        X, rep = penalty_continuation(d, 3, ALPHA, opts=TIGHT)
        assert rep.rank_feasible
        F = penalized_objective(PenalizedProblem(d, rep.c_values[-1], 3, ALPHA), X)
        L = neg_loglik(d, X)
        assert abs(F - L) <= 1e-9 * (1 + abs(L))

    def test_full_rank_target_immediate(self, rng):
        d = LikelihoodData.from_counts(rng.integers(1, 9, size=(5, 5)))
        X, rep = penalty_continuation(d, 5)
        assert rep.rank_feasible and rep.stage == [0] and len(rep.objective) == 1

    def test_stage_cap(self, medium):
        _, d = medium
        sched = ContinuationSchedule(c0=1e-6, max_stages=1)
        with pytest.raises(RankInfeasibleError) as exc:
            penalty_continuation(d, 1, ALPHA, sched, DcOptions(max_iter=3))
        X, rep = exc.value.partial
        assert not rep.rank_feasible and X.shape == (20, 20)

    def test_report_csv(self, small, tmp_path):
        _, d = small
        _, rep = penalty_continuation(d, 2, ALPHA, opts=TIGHT)
        rep.to_csv(tmp_path / "dc.csv")
        lines = (tmp_path / "dc.csv").read_text().splitlines()
        assert lines[0] == "iteration,stage,c,objective,step,rank" and len(lines) == 1 + len(rep.objective)


class TestStationarityGap:
    def test_small_at_converged_point(self, small):
        _, d = small
        prob = PenalizedProblem(d, default_c0(d), 2)
        X, rep, state = pdc_solve(prob, initial_point(d), DcOptions(max_iter=1000, admm=TIGHT.admm))
        eta = 1e-6 * (1 + np.linalg.norm(initial_point(d)))
        gap = stationarity_gap(prob, X, TIGHT.admm, state)
        assert 0 <= gap <= 10 * eta

    def test_large_far_from_critical(self, medium):
        _, d = medium
        prob = PenalizedProblem(d, default_c0(d), 3)
        X0 = initial_point(d)
        assert stationarity_gap(prob, X0) > 1e-6 * (1 + np.linalg.norm(X0))


def test_step_criterion_before_cap():
    """With alpha > 0 the DC steps shrink to zero; here: the step test fires before the cap."""
    capped = []
    for i in range(20):
        _, d, r = desk_instance(i)
        _, rep, _ = pdc_solve(PenalizedProblem(d, default_c0(d), r, ALPHA), initial_point(d),
                              DcOptions(admm=AdmmOptions(tol=1e-8)))
        if rep.reason != "step tolerance reached":
            capped.append((i, min(rep.step[1:])))
    assert not capped, f"DC cap reached before the step tolerance on instances {capped}"
