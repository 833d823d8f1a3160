"""Command-line interface: ``sketchavg <subcommand> [flags]``.

Exit status is 0 on success, 1 on a usage error and 2 on a runtime error.
"""

from __future__ import annotations

import argparse
import csv
import logging
import sys
from pathlib import Path

from .. import matio, privacy, theory
from ..errors import ConditionUnsatisfied, SketchAvgError, SketchTooSmall
from ..sketch import SketchKind, SketchSpec
from ..solver import (
    Deadline,
    FirstK,
    Mode,
    WaitAll,
    optimal_value,
    reference_solution,
    relative_error,
    run_distributed,
)
from . import config as config_mod
from .experiment import run_experiment
from .generate import DISTRIBUTIONS, GeneratorSpec, generate

USAGE_ERROR = 1
RUNTIME_ERROR = 2
KINDS = [k.value for k in SketchKind]


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(USAGE_ERROR, f"{self.prog}: error: {message}\n")


def _emit(header, row) -> None:
    w = csv.writer(sys.stdout, lineterminator="\n")
    w.writerow(header)
    w.writerow(["" if v is None else v for v in row])


def _sketch_from_args(args) -> SketchSpec:
    if args.kind == "hybrid":
        if args.m_prime is None:
            raise SketchAvgError("--kind hybrid needs --m-prime")
        return SketchSpec.hybrid(args.m, args.m_prime, args.inner, s=args.s)
    return SketchSpec(args.kind, args.m, s=args.s)


def _policy_from_args(args):
    if args.policy == "first_k":
        return FirstK(args.k if args.k is not None else args.q)
    if args.policy == "deadline":
        if args.deadline is None:
            raise SketchAvgError("--policy deadline needs --deadline SECONDS")
        return Deadline(args.deadline, args.min_k)
    return WaitAll()


def cmd_gendata(args) -> int:
    gspec = GeneratorSpec(
        n=args.n, d=args.d, distribution=args.distribution, df=args.df,
        noise_std=args.noise_std, planted=not args.no_planted,
    )
    A, b, x_truth = generate(gspec, args.seed)
    matio.write_matrix(args.out_a, A)
    matio.write_matrix(args.out_b, b)
    if args.out_x and x_truth is not None:
        matio.write_matrix(args.out_x, x_truth)
    print(f"wrote {args.out_a} ({A.shape[0]}x{A.shape[1]}) and {args.out_b}")
    return 0


def cmd_solve(args) -> int:
    A = matio.read_matrix(args.a)
    b = matio.read_vector(args.b)
    mode = Mode(args.mode)
    spec = _sketch_from_args(args)
    x_star = reference_solution(A, b, mode)
    f_star = optimal_value(A, b, x_star, mode)
    est = run_distributed(
        A, b, spec, args.q, args.seed, mode, _policy_from_args(args),
        max_retries=args.max_retries,
    )
    err = relative_error(A, b, est.x_bar, x_star, f_star, mode)
    print(f"relative_error: {err!r}")
    print(f"q_used: {est.q_used}")
    print(f"retries: {est.retries}")
    print("x_bar: " + ",".join(repr(float(v)) for v in est.x_bar))
    if args.out_x:
        matio.write_matrix(args.out_x, est.x_bar)
    return 0


def cmd_experiment(args) -> int:
    cfg = config_mod.load(args.config)
    if args.outputs:
        cfg = config_mod.ExperimentConfig.from_dict({**cfg.to_dict(), "outputs": str(Path(args.outputs).resolve())})
    result = run_experiment(cfg, base_dir=Path(args.config).resolve().parent, max_workers=args.threads)
    print(f"data: {result.data_path}")
    print(f"summary: {result.summary_path}")
    if result.prefix_path:
        print(f"prefix: {result.prefix_path}")
    return 0


def cmd_predict(args) -> int:
    n, d, f_star, max_lev, min_lev = args.n, args.d, args.f_star, args.max_lev, args.min_lev
    if args.from_matrix:
        A = matio.read_matrix(args.from_matrix)
        n, d = A.shape
        stats = theory.coherence_stats(A, matio.read_vector(args.b) if args.b else None)
        max_lev = stats.max_lev if max_lev is None else max_lev
        min_lev = stats.min_lev if min_lev is None else min_lev
        f_star = stats.f_star if f_star is None else f_star
    if d is None:
        raise SketchAvgError("predict needs --d (or --from-matrix)")
    report = theory.predict(
        args.kind, d, args.m, args.q, n=n, mode=args.mode, epsilon=args.epsilon,
        f_star=f_star, max_lev=max_lev, min_lev=min_lev,
    )
    row = report.as_row()
    _emit(list(row), list(row.values()))
    return 0


def cmd_privacy_size(args) -> int:
    if args.from_matrix:
        p = privacy.params_from_matrix(
            matio.read_matrix(args.from_matrix), args.eps, args.beta, args.q, args.mode
        )
    else:
        n, d = (args.d, args.n) if args.mode == "right" else (args.n, args.d)
        p = privacy.PrivacyParams(n, d, args.b0, args.sigma0, args.eps, args.beta, args.q)
    m, status = None, "ok"
    try:
        m = privacy.max_private_sketch_size(p, args.kind)
    except ConditionUnsatisfied:
        status = "condition_unsatisfied"
    except SketchTooSmall:
        status = "sketch_too_small"
    _emit(
        ["m", "delta", "condition", "status", "n", "d", "B0", "sigma0", "eps", "beta", "q", "mode"],
        [m, repr(p.delta), str(privacy.check_condition(p)).lower(), status,
         p.n, p.d, p.B0, p.sigma0, p.eps, p.beta, p.q, args.mode],
    )
    return 0


def _add_sketch_flags(p) -> None:
    p.add_argument("--kind", choices=KINDS, default="gaussian", help="sketch family")
    p.add_argument("--m", type=int, required=True, help="sketch dimension")
    p.add_argument("--s", type=int, help="nonzeros per column (sjlt, or hybrid with --inner sjlt)")
    p.add_argument("--m-prime", type=int, help="intermediate sample size (hybrid)")
    p.add_argument("--inner", choices=[k for k in KINDS if k not in ("hybrid", "leverage")],
                   default="gaussian", help="second-stage sketch (hybrid)")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="sketchavg", description="Distributed sketch-and-average least squares.")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("gendata", help="generate a synthetic problem and write A, b files")
    p.add_argument("--n", type=int, required=True, help="rows of A")
    p.add_argument("--d", type=int, required=True, help="columns of A")
    p.add_argument("--distribution", choices=DISTRIBUTIONS, default="gaussian")
    p.add_argument("--df", type=float, help="degrees of freedom (student_t, > 1)")
    p.add_argument("--noise-std", type=float, default=0.1, help="noise standard deviation of b")
    p.add_argument("--no-planted", action="store_true", help="draw b ~ N(0, I) instead of A x_truth + noise")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-a", required=True, help="output file for A (.dskm for binary, else CSV)")
    p.add_argument("--out-b", required=True, help="output file for b")
    p.add_argument("--out-x", help="output file for x_truth (planted only)")
    p.set_defaults(func=cmd_gendata)

    p = sub.add_parser("solve", help="run one distributed sketch-and-average solve")
    p.add_argument("--a", required=True, help="matrix file (CSV or DSKM)")
    p.add_argument("--b", required=True, help="target vector file (CSV or DSKM)")
    _add_sketch_flags(p)
    p.add_argument("--q", type=int, default=1, help="number of workers")
    p.add_argument("--seed", type=int, default=0, help="master seed")
    p.add_argument("--mode", choices=["left", "right"], default="left")
    p.add_argument("--policy", choices=["wait_all", "first_k", "deadline"], default="wait_all")
    p.add_argument("--k", type=int, help="workers to wait for (first_k)")
    p.add_argument("--deadline", type=float, help="deadline in seconds (deadline policy)")
    p.add_argument("--min-k", type=int, default=1, help="minimum arrivals (deadline policy)")
    p.add_argument("--max-retries", type=int, default=4, help="redraws allowed per worker")
    p.add_argument("--out-x", help="write x_bar to this file")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("experiment", help="run an experiment config and write CSV results")
    p.add_argument("--config", required=True, help="JSON experiment config")
    p.add_argument("--outputs", help="override the data CSV path")
    p.add_argument("--threads", type=int, help="parallel trials (default: SKETCHAVG_THREADS or CPU count)")
    p.set_defaults(func=cmd_experiment)

    p = sub.add_parser("predict", help="closed-form error prediction / bias bound as one CSV row")
    p.add_argument("--kind", choices=KINDS, default="gaussian")
    p.add_argument("--n", type=int, help="rows of A")
    p.add_argument("--d", type=int, help="columns of A")
    p.add_argument("--m", type=int, required=True)
    p.add_argument("--q", type=int, default=1)
    p.add_argument("--mode", choices=["left", "right"], default="left")
    p.add_argument("--epsilon", type=float, help="spectral deviation for bias bounds, in (0, 1)")
    p.add_argument("--f-star", type=float, help="optimal cost f(x*)")
    p.add_argument("--max-lev", type=float, help="largest leverage score")
    p.add_argument("--min-lev", type=float, help="smallest leverage score")
    p.add_argument("--from-matrix", help="compute n, d and leverage extremes from this matrix file")
    p.add_argument("--b", help="target vector file, used with --from-matrix to compute f(x*)")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("privacy-size", help="largest differentially private sketch size")
    p.add_argument("--n", type=int, help="rows of the data")
    p.add_argument("--d", type=int, help="columns of A")
    p.add_argument("--b0", type=float, help="bound on every |entry|")
    p.add_argument("--sigma0", type=float, help="sigma_min(A_c)/sqrt(n)")
    p.add_argument("--eps", type=float, required=True)
    p.add_argument("--beta", type=float, required=True, help="delta = 4 exp(-beta); beta > 1 + ln 4")
    p.add_argument("--q", type=int, default=1)
    p.add_argument("--mode", choices=["left", "right"], default="left",
                   help="right publishes A S^T and swaps the roles of n and d")
    p.add_argument("--kind", choices=KINDS, default="gaussian")
    p.add_argument("--from-matrix", help="measure B0, sigma0 from [A, b] (left) or A (right)")
    p.set_defaults(func=cmd_privacy_size)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "privacy-size" and not args.from_matrix:
        missing = [f for f in ("n", "d", "b0", "sigma0") if getattr(args, f) is None]
        if missing:
            parser.error("privacy-size needs --" + ", --".join(missing) + " or --from-matrix")
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.func(args)
    except (SketchAvgError, ValueError, OSError, ArithmeticError) as exc:
        print(f"sketchavg {args.command}: error: {exc}", file=sys.stderr)
        return RUNTIME_ERROR


if __name__ == "__main__":
    sys.exit(main())
