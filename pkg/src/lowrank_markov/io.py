"""Plain-text file formats.

* matrices: CSV, row-major, every value written with ``repr`` (round-trips
  exactly);
* counts: CSV of integers;
* trajectories: a header line ``# mode=<chain|iid-pairs> p=<p>`` followed by
  one state index per line (chain) or ``i,j`` per line (iid-pairs).
"""

from __future__ import annotations

import csv
import re

import numpy as np

from .markov_model import CHAIN, IID_PAIRS, TransitionCounts, TransitionMatrix, Trajectory

_HEADER = re.compile(r"#\s*mode=(\S+)\s+p=(\d+)\s*$")


def write_matrix(path, M):
    M = np.asarray(getattr(M, "entries", M), dtype=float)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        for row in M:
            w.writerow([repr(float(v)) for v in row])


def read_array(path) -> np.ndarray:
    with open(path, newline="") as fh:
        rows = [row for row in csv.reader(fh) if row and not row[0].startswith("#")]
    if not rows:
        raise ValueError(f"{path}: empty matrix file")
    widths = {len(row) for row in rows}
    if widths != {len(rows)}:
        raise ValueError(f"{path}: expected a square matrix, got {len(rows)} rows of widths {sorted(widths)}")
    try:
        return np.array([[float(v) for v in row] for row in rows])
    except ValueError as exc:
        raise ValueError(f"{path}: non-numeric entry ({exc})") from None


def read_matrix(path) -> TransitionMatrix:
    return TransitionMatrix(read_array(path))


def write_counts(path, counts: TransitionCounts):
    with open(path, "w", newline="") as fh:
        csv.writer(fh).writerows(counts.counts.tolist())


def read_counts(path) -> TransitionCounts:
    return TransitionCounts(read_array(path))


def write_trajectory(path, traj: Trajectory):
    with open(path, "w") as fh:
        fh.write(f"# mode={traj.mode} p={traj.p}\n")
        if traj.mode == CHAIN:
            fh.writelines(f"{s}\n" for s in traj.states.tolist())
        else:
            fh.writelines(f"{i},{j}\n" for i, j in traj.states.tolist())


def read_trajectory(path) -> Trajectory:
    with open(path) as fh:
        header = fh.readline()
        m = _HEADER.match(header.strip())
        if not m:
            raise ValueError(f"{path}: first line must be '# mode=<chain|iid-pairs> p=<int>'")
        mode, p = m.group(1), int(m.group(2))
        lines = [ln.strip() for ln in fh if ln.strip()]
    if mode == CHAIN:
        states = np.array([int(s) for s in lines], dtype=np.int64)
    elif mode == IID_PAIRS:
        states = np.array([[int(v) for v in ln.split(",")] for ln in lines], dtype=np.int64).reshape(-1, 2)
    else:
        raise ValueError(f"{path}: unknown mode {mode!r}")
    return Trajectory(states, p, mode)
