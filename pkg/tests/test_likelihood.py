import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from lowrank_markov.likelihood import (
    LikelihoodData,
    conjugate_value,
    empirical_mle,
    neg_loglik,
    prox_conjugate_entry,
)
from lowrank_markov.markov_model import TransitionCounts

from conftest import random_stochastic
from oracles import golden_prox

G_GRID = np.linspace(-10, 10, 41)
W_GRID = (0.0, 1e-4, 0.1, 1.0)
S_GRID = (0.1, 1.0, 10.0)


def _data(N):
    return LikelihoodData.from_counts(TransitionCounts(np.asarray(N)))


class TestNegLoglik:
    def test_uniform(self):
        assert neg_loglik(_data([[1, 1], [1, 1]]), np.full((2, 2), 0.5)) == pytest.approx(math.log(2), abs=1e-15)

    def test_diagonal_counts(self):
        val = neg_loglik(_data([[2, 0], [0, 2]]), [[0.9, 0.1], [0.1, 0.9]])
        assert val == pytest.approx(-math.log(0.9), abs=1e-15)
        assert val == pytest.approx(0.105361, abs=1e-6)

    def test_zero_on_support_is_inf(self):
        assert neg_loglik(_data([[1, 1], [1, 1]]), [[1.0, 0.0], [0.5, 0.5]]) == math.inf

    def test_zero_off_support_is_finite(self):
        assert math.isfinite(neg_loglik(_data([[1, 0], [1, 1]]), [[1.0, 0.0], [0.5, 0.5]]))

    def test_negative_rejected(self):
        with pytest.raises(ValueError):
            neg_loglik(_data([[1, 1], [1, 1]]), [[1.1, -0.1], [0.5, 0.5]])

    def test_empty_counts(self):
        with pytest.raises(ValueError):
            _data([[0, 0], [0, 0]])


class TestConjugate:
    def test_at_minus_weights(self):
        d = _data([[3, 1, 0], [0, 2, 2], [1, 0, 1]])
        Xi = np.where(d.support, -d.weights, 0.0)
        assert conjugate_value(d, Xi) == pytest.approx(-1.0, abs=1e-14)

    def test_positive_off_support_is_inf(self):
        d = _data([[1, 0], [1, 1]])
        assert conjugate_value(d, [[-1.0, 0.1], [-1.0, -1.0]]) == math.inf

    def test_nonnegative_on_support_is_inf(self):
        d = _data([[1, 0], [1, 1]])
        assert conjugate_value(d, [[0.0, 0.0], [-1.0, -1.0]]) == math.inf

    @given(seed=st.integers(0, 10**6))
    def test_fenchel_young(self, seed):
        rng = np.random.default_rng(seed)
        d = _data(rng.integers(0, 4, size=(4, 4)) + np.eye(4, dtype=int))
        X = rng.uniform(0.01, 2.0, size=(4, 4))
        Xi = -rng.uniform(0.01, 2.0, size=(4, 4))
        lhs = neg_loglik(d, X) + conjugate_value(d, Xi)
        assert lhs >= np.vdot(X, Xi) - 1e-12

    @given(seed=st.integers(0, 10**6))
    def test_fenchel_young_equality(self, seed):
        rng = np.random.default_rng(seed)
        d = _data(rng.integers(0, 4, size=(4, 4)) + np.eye(4, dtype=int))
        X = rng.uniform(0.01, 2.0, size=(4, 4))
        Xi = np.where(d.support, -d.weights / X, 0.0)
        assert neg_loglik(d, X) + conjugate_value(d, Xi) == pytest.approx(np.vdot(X, Xi), abs=1e-8)


class TestProx:
    def test_negative_point_no_weight(self):
        assert prox_conjugate_entry(-1.0, 0.0, 1.0) == 0.0

    def test_feasible_point_no_weight(self):
        assert prox_conjugate_entry(2.0, 0.0, 3.0) == 2.0

    def test_unit_root(self):
        assert prox_conjugate_entry(0.0, 1.0, 1.0) == pytest.approx(1.0, abs=1e-15)
        assert golden_prox(0.0, 1.0, 1.0) == pytest.approx(1.0, abs=1e-12)

    def test_vectorised_matches_scalar(self):
        g = np.array([[-3.0, 0.5], [2.0, -0.1]])
        w = np.array([[0.2, 0.0], [1.0, 0.05]])
        out = prox_conjugate_entry(g, w, 2.0)
        for idx in np.ndindex(2, 2):
            assert out[idx] == prox_conjugate_entry(g[idx], w[idx], 2.0)

    def test_bad_sigma(self):
        with pytest.raises(ValueError):
            prox_conjugate_entry(1.0, 1.0, 0.0)

    @pytest.mark.parametrize("w", W_GRID)
    @pytest.mark.parametrize("sigma", S_GRID)
    def test_matches_golden_section(self, w, sigma):
        for g in G_GRID:
            ref = golden_prox(g, w, sigma)
            assert abs(prox_conjugate_entry(g, w, sigma) - ref) <= 1e-8 * max(1.0, ref)

    @given(g=st.floats(-50, 50), w=st.floats(1e-8, 10), sigma=st.floats(1e-2, 100))
    def test_stationarity(self, g, w, sigma):
        xi = prox_conjugate_entry(g, w, sigma)
        assert xi > 0
        assert abs(sigma * xi * xi - sigma * g * xi - w) <= 1e-10 * (1 + sigma) * (1 + abs(g)) ** 2


class TestEmpiricalMle:
    def test_row_normalisation(self):
        P = empirical_mle(TransitionCounts([[2, 2], [0, 4]]))
        np.testing.assert_array_equal(P.entries, [[0.5, 0.5], [0.0, 1.0]])

    def test_zero_row_uniform(self):
        P = empirical_mle(TransitionCounts([[0, 0, 0], [1, 2, 1], [0, 0, 5]]))
        np.testing.assert_allclose(P.entries[0], 1 / 3)

    def test_beats_random_stochastic(self, rng):
        counts = TransitionCounts(rng.integers(0, 20, size=(5, 5)))
        d = LikelihoodData.from_counts(counts)
        best = neg_loglik(d, empirical_mle(counts).entries)
        for _ in range(1000):
            assert best <= neg_loglik(d, random_stochastic(rng, 5)) + 1e-12

    def test_beats_feasible_perturbations(self, rng):
        counts = TransitionCounts(rng.integers(1, 20, size=(4, 4)))
        d = LikelihoodData.from_counts(counts)
        P = empirical_mle(counts).entries
        best = neg_loglik(d, P)
        for _ in range(100):
            D = rng.normal(size=(4, 4))
            D -= D.mean(axis=1, keepdims=True)  # keeps row sums
            t = 0.5 * P.min() / np.abs(D).max()
            assert best <= neg_loglik(d, P + t * D)
