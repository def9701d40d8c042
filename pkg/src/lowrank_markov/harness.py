"""Simulation study runner: generate, simulate, estimate, score, write CSV.

Config files are flat ``key = value`` text (``#`` starts a comment); lists
are comma-separated::

    p = 50
    r = 3
    C_values = 4, 8, 16
    seeds = 0, 1, 2
    estimators = mle, svd, nu, rank
    mode = chain
    output = results.csv
"""

from __future__ import annotations

import csv
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import ConvergenceError
from .estimators import KINDS, EstimatorSpec, estimate
from .markov_model import CHAIN, MODES, count_transitions, generate_latent_lowrank, simulate, stationary_distribution
from .metrics import evaluate

RESULT_FIELDS = ["estimator", "C", "n", "seed", "eta_f", "eta_u", "eta_v", "kl", "flag"]
MEASURES = ("eta_f", "eta_u", "eta_v", "kl")


def sample_size(C: float, r: int, p: int) -> int:
    return int(math.ceil(C * C * r * p * math.log(p)))


@dataclass
class ExperimentConfig:
    p: int = 50
    r: int = 3
    C_values: list = field(default_factory=lambda: [4.0, 8.0, 16.0])
    seeds: list = field(default_factory=lambda: list(range(10)))
    estimators: list = field(default_factory=lambda: list(KINDS))
    mode: str = CHAIN
    output: str = "results.csv"

    def __post_init__(self):
        if not 1 <= self.r <= self.p:
            raise ValueError("need 1 <= r <= p")
        if self.p < 2:
            raise ValueError("p must be at least 2")
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}")
        if not self.C_values or any(c <= 0 for c in self.C_values):
            raise ValueError("C_values must be a nonempty list of positive numbers")
        if not self.seeds:
            raise ValueError("seeds must be nonempty")
        for e in self.estimators:
            if e not in KINDS:
                raise ValueError(f"unknown estimator {e!r}")

    def n_for(self, C) -> int:
        return sample_size(C, self.r, self.p)

    def estimator_spec(self, kind: str, seed: int) -> EstimatorSpec:
        return EstimatorSpec(kind, r=self.r if kind in ("svd", "rank") else None, cv_seed=seed)


_PARSERS = {
    "p": int,
    "r": int,
    "C_values": lambda v: [float(x) for x in v.split(",") if x.strip()],
    "seeds": lambda v: [int(x) for x in v.split(",") if x.strip()],
    "estimators": lambda v: [x.strip() for x in v.split(",") if x.strip()],
    "mode": str.strip,
    "output": str.strip,
}


def parse_config(text: str) -> ExperimentConfig:
    values = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"config line {lineno}: expected 'key = value'")
        key, val = (s.strip() for s in line.split("=", 1))
        if key not in _PARSERS:
            raise ValueError(f"config line {lineno}: unknown key {key!r} (known: {', '.join(_PARSERS)})")
        try:
            values[key] = _PARSERS[key](val)
        except ValueError:
            raise ValueError(f"config line {lineno}: bad value for {key}: {val!r}") from None
    return ExperimentConfig(**values)


def load_config(path) -> ExperimentConfig:
    with open(path) as fh:
        return parse_config(fh.read())


@dataclass
class ResultRow:
    estimator: str
    C: float
    n: int
    seed: int
    eta_f: float = math.nan
    eta_u: float = math.nan
    eta_v: float = math.nan
    kl: float = math.nan
    flag: str = ""
    wall_time: float = 0.0

    @property
    def failed(self) -> bool:
        return bool(self.flag)


def _run_cell(config: ExperimentConfig, seed: int, ci: int):
    """All estimators on one (seed, C) sample."""
    C = config.C_values[ci]
    n = config.n_for(C)
    P = generate_latent_lowrank(config.p, config.r, np.random.SeedSequence([seed, 0]))
    mu = stationary_distribution(P)
    traj = simulate(P, n, config.mode, np.random.SeedSequence([seed, 1, ci]), mu=mu)
    counts = count_transitions(traj)
    rows = []
    for kind in config.estimators:
        row = ResultRow(kind, C, n, seed)
        t0 = time.perf_counter()
        try:
            Phat, _ = estimate(config.estimator_spec(kind, seed), counts)
            res = evaluate(P, Phat, config.r, mu)
            row.eta_f, row.eta_u, row.eta_v, row.kl = res.eta_f, res.eta_u, res.eta_v, res.kl
        except ConvergenceError as exc:
            row.flag = f"{type(exc).__name__}: {exc}"
        except (ValueError, FloatingPointError, np.linalg.LinAlgError) as exc:
            row.flag = f"{type(exc).__name__}: {exc}"
        row.wall_time = time.perf_counter() - t0
        rows.append(row)
    return rows


def run_experiment(config: ExperimentConfig, workers: int = 1, progress=None) -> list:
    """Every (estimator, C, seed) result, sorted by estimator, C, seed.

    Failures are recorded as flagged rows; the sweep never aborts.
    """
    cells = [(seed, ci) for seed in config.seeds for ci in range(len(config.C_values))]
    rows = []
    if workers > 1:
        with ProcessPoolExecutor(workers) as ex:
            for out in ex.map(_run_cell, [config] * len(cells), *zip(*cells)):
                rows.extend(out)
    else:
        for seed, ci in cells:
            out = _run_cell(config, seed, ci)
            if progress:
                progress(out)
            rows.extend(out)
    return sorted(rows, key=lambda r: (r.estimator, r.C, r.seed))


def _fmt(v):
    return repr(float(v)) if isinstance(v, (float, np.floating)) else str(v)


def write_results(rows, path):
    """Deterministic results CSV (no timings, so reruns are byte-identical)."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(RESULT_FIELDS)
        for r in rows:
            w.writerow([_fmt(getattr(r, f)) for f in RESULT_FIELDS])


def write_timings(rows, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["estimator", "C", "seed", "wall_time"])
        for r in rows:
            w.writerow([r.estimator, _fmt(r.C), r.seed, f"{r.wall_time:.3f}"])


def read_results(path) -> list:
    out = []
    with open(path, newline="") as fh:
        for d in csv.DictReader(fh):
            out.append(ResultRow(d["estimator"], float(d["C"]), int(d["n"]), int(d["seed"]),
                                 *(float(d[m]) for m in MEASURES), flag=d["flag"]))
    return out


def emit_plot_data(rows, measure: str = "eta_f", path=None) -> list:
    """Mean and (population) std of ``measure`` per (estimator, C).

    Flagged rows are left out of the statistics and counted in ``failed``.
    """
    if measure not in MEASURES:
        raise ValueError(f"measure must be one of {MEASURES}")
    if not rows:
        raise ValueError("result table is empty")
    groups = {}
    for r in rows:
        groups.setdefault((r.estimator, r.C), []).append(r)
    out = []
    for (est, C), grp in sorted(groups.items()):
        ok = np.array([getattr(r, measure) for r in grp if not r.failed])
        out.append({
            "estimator": est, "C": C, "n": grp[0].n,
            "mean": float(ok.mean()) if ok.size else math.nan,
            "std": float(ok.std()) if ok.size else math.nan,
            "count": int(ok.size), "failed": len(grp) - int(ok.size),
        })
    if path is not None:
        with open(path, "w", newline="") as fh:
            w = csv.DictWriter(fh, ["estimator", "C", "n", "mean", "std", "count", "failed"], lineterminator="\n")
            w.writeheader()
            for d in out:
                w.writerow({k: _fmt(v) for k, v in d.items()})
    return out
