import numpy as np
import pytest
from hypothesis import given, settings, HealthCheck, strategies as st

from lowrank_markov import io
from lowrank_markov.markov_model import CHAIN, IID_PAIRS, TransitionCounts, Trajectory, generate_latent_lowrank

tmp_ok = settings(suppress_health_check=[HealthCheck.function_scoped_fixture])


def test_matrix_round_trip_exact(tmp_path):
    P = generate_latent_lowrank(9, 3, seed=2)
    io.write_matrix(tmp_path / "P.csv", P)
    Q = io.read_matrix(tmp_path / "P.csv")
    np.testing.assert_array_equal(P.entries, Q.entries)


def test_counts_round_trip(tmp_path, rng):
    C = TransitionCounts(rng.integers(0, 100, size=(4, 4)))
    io.write_counts(tmp_path / "c.csv", C)
    np.testing.assert_array_equal(io.read_counts(tmp_path / "c.csv").counts, C.counts)


@tmp_ok
@given(states=st.lists(st.integers(0, 4), min_size=1, max_size=50))
def test_chain_trajectory_round_trip(tmp_path, states):
    t = Trajectory(states, 5, CHAIN)
    io.write_trajectory(tmp_path / "t.txt", t)
    back = io.read_trajectory(tmp_path / "t.txt")
    assert back.mode == CHAIN and back.p == 5
    np.testing.assert_array_equal(back.states, t.states)


def test_pairs_trajectory_round_trip(tmp_path):
    t = Trajectory([[0, 1], [2, 2], [1, 0]], 3, IID_PAIRS)
    io.write_trajectory(tmp_path / "t.txt", t)
    back = io.read_trajectory(tmp_path / "t.txt")
    assert back.mode == IID_PAIRS
    np.testing.assert_array_equal(back.states, t.states)


@pytest.mark.parametrize("text,match", [
    ("", "empty"),
    ("0.5,0.5\n0.5\n", "square"),
    ("0.5,x\n0.5,0.5\n", "non-numeric"),
    ("0.5,0.5,0.0\n0.5,0.5,0.0\n", "square"),
])
def test_bad_matrix_files(tmp_path, text, match):
    f = tmp_path / "bad.csv"
    f.write_text(text)
    with pytest.raises(ValueError, match=match):
        io.read_matrix(f)


def test_non_stochastic_matrix_file(tmp_path):
    f = tmp_path / "bad.csv"
    f.write_text("0.5,0.4\n0.5,0.5\n")
    with pytest.raises(ValueError, match="sum to 1"):
        io.read_matrix(f)


def test_bad_trajectory_header(tmp_path):
    f = tmp_path / "t.txt"
    f.write_text("0\n1\n")
    with pytest.raises(ValueError, match="first line"):
        io.read_trajectory(f)


def test_trajectory_state_out_of_range(tmp_path):
    f = tmp_path / "t.txt"
    f.write_text("# mode=chain p=2\n0\n5\n")
    with pytest.raises(ValueError):
        io.read_trajectory(f)
