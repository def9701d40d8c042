"""Command-line front end.

Exit codes: 0 success, 1 invalid input (flags, files, schemas), 2 solver
non-convergence or flagged benchmark rows.
"""

from __future__ import annotations

import argparse
import sys

from . import io
from .errors import ConvergenceError
from .estimators import KINDS, EstimatorSpec, estimate
from .harness import emit_plot_data, load_config, run_experiment, write_results, write_timings
from .markov_model import MODES, count_transitions, downsample, generate_aggregated, generate_latent_lowrank, simulate, stationary_distribution
from .metrics import evaluate

DEFAULT_SEED = 20180710


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _seed(value):
    if value == "random":
        return None
    try:
        return int(value)
    except ValueError:
        raise argparse.ArgumentTypeError("--seed takes an integer or 'random'") from None


def _positive_int(value):
    try:
        v = int(value)
    except ValueError:
        v = 0
    if v < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {value!r}")
    return v


def _positive_float(value):
    try:
        v = float(value)
    except ValueError:
        v = 0.0
    if not v > 0:
        raise argparse.ArgumentTypeError(f"expected a positive number, got {value!r}")
    return v


def build_parser():
    parser = _Parser(prog="lowrank-markov", description="Low-rank Markov transition matrix estimation")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    g = sub.add_parser("generate", help="write a random low-rank transition matrix")
    g.add_argument("--p", type=_positive_int, required=True)
    g.add_argument("--r", type=_positive_int, required=True)
    g.add_argument("--model", choices=["latent", "aggregated"], default="latent")
    g.add_argument("--seed", type=_seed, default=DEFAULT_SEED)
    g.add_argument("--out", required=True)

    s = sub.add_parser("simulate", help="simulate transitions from a matrix")
    s.add_argument("--matrix", required=True)
    s.add_argument("--n", type=_positive_int, required=True)
    s.add_argument("--mode", choices=MODES, default="chain")
    s.add_argument("--skip", type=_positive_int, default=None,
                   help="keep one transition every SKIP steps (chain mode; output is iid-pairs)")
    s.add_argument("--seed", type=_seed, default=DEFAULT_SEED)
    s.add_argument("--out", required=True)

    e = sub.add_parser("estimate", help="estimate a transition matrix")
    src = e.add_mutually_exclusive_group(required=True)
    src.add_argument("--counts")
    src.add_argument("--trajectory")
    e.add_argument("--method", choices=KINDS, required=True)
    e.add_argument("--r", type=_positive_int)
    e.add_argument("--lambda", dest="lam", type=_positive_float)
    e.add_argument("--seed", type=_seed, default=DEFAULT_SEED, help="cross-validation fold seed")
    e.add_argument("--out", required=True)
    e.add_argument("--report", help="write the solver trace CSV here (nu, rank)")

    v = sub.add_parser("evaluate", help="compare an estimate against the true matrix")
    v.add_argument("--truth", required=True)
    v.add_argument("--estimate", required=True)
    v.add_argument("--r", type=_positive_int, required=True)

    b = sub.add_parser("bench", help="run a benchmark sweep from a config file")
    b.add_argument("--config", required=True)
    b.add_argument("--workers", type=_positive_int, default=1)
    b.add_argument("--plot-data", help="write per-(estimator, C) eta_F mean/std here")
    return parser


def _validate(args):
    if args.command == "estimate":
        if args.method in ("svd", "rank") and args.r is None:
            raise UsageError(f"estimate: --method {args.method} requires --r")
        if args.method not in ("svd", "rank") and args.r is not None:
            raise UsageError(f"estimate: --r only applies to --method svd or rank")
        if args.lam is not None and args.method != "nu":
            raise UsageError("estimate: --lambda only applies to --method nu")
    if args.command == "generate" and args.r > args.p:
        raise UsageError("generate: --r must not exceed --p")


def _generate(args):
    gen = generate_latent_lowrank if args.model == "latent" else generate_aggregated
    io.write_matrix(args.out, gen(args.p, args.r, args.seed))


def _simulate(args):
    P = io.read_matrix(args.matrix)
    if args.skip is not None and args.mode != "chain":
        raise UsageError("simulate: --skip needs --mode chain")
    traj = simulate(P, args.n, args.mode, args.seed)
    if args.skip is not None:
        traj = downsample(traj, args.skip)
    io.write_trajectory(args.out, traj)


def _estimate(args):
    if args.counts:
        counts = io.read_counts(args.counts)
    else:
        counts = count_transitions(io.read_trajectory(args.trajectory))
    if args.r is not None and args.r > counts.p:
        raise UsageError(f"estimate: --r {args.r} exceeds the number of states {counts.p}")
    spec = EstimatorSpec(args.method, r=args.r, lam=args.lam, cv_seed=args.seed)
    P, report = estimate(spec, counts)
    io.write_matrix(args.out, P)
    if args.report:
        trace = report.get("dc") or report.get("admm")
        if trace is None:
            raise UsageError(f"estimate: --method {args.method} has no solver trace")
        trace.to_csv(args.report)


def _evaluate(args):
    P = io.read_matrix(args.truth)
    Q = io.read_matrix(args.estimate)
    if P.p != Q.p:
        raise UsageError(f"evaluate: truth has {P.p} states, estimate has {Q.p}")
    if args.r > P.p:
        raise UsageError("evaluate: --r exceeds the number of states")
    res = evaluate(P, Q, args.r, stationary_distribution(P))
    for name in ("eta_f", "eta_u", "eta_v", "kl", "l2_risk", "kl_clipped"):
        print(f"{name}\t{getattr(res, name)!r}")


def _bench(args):
    config = load_config(args.config)
    rows = run_experiment(config, workers=args.workers)
    write_results(rows, config.output)
    write_timings(rows, config.output + ".timing.csv")
    if args.plot_data:
        emit_plot_data(rows, "eta_f", args.plot_data)
    flagged = [r for r in rows if r.failed]
    for r in flagged:
        print(f"flagged: {r.estimator} C={r.C} seed={r.seed}: {r.flag}", file=sys.stderr)
    return 2 if flagged else 0


COMMANDS = {"generate": _generate, "simulate": _simulate, "estimate": _estimate,
            "evaluate": _evaluate, "bench": _bench}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        _validate(args)
        return COMMANDS[args.command](args) or 0
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except ConvergenceError as exc:
        print(f"error: solver did not converge: {exc}", file=sys.stderr)
        return 2
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
