"""Command-line front end.

One executable, ``sensecert``, with one subcommand per operation: generate a
matrix, verify it, evaluate the goodness measure, convert it into error
bounds, run a recovery solver, fill a (rho, k) table, run the built-in
selftest, or time a benchmark instance.

Exit codes: 0 success, 1 usage or input problem, 2 numerical failure,
3 verification came out negative (requested scale s >= s*).

Single results print as JSON with --json (and human-readable text without);
tables print as CSV; iteration traces are written as newline-delimited JSON.
"""

from __future__ import annotations

import argparse
import json
import math
import sys

import numpy as np

from . import bounds as bnd
from . import matrixio
from .conic import SolverOptions
from .ensembles import generate
from .omega import GoodnessQuery, NotVerifiableError, OmegaError, compute_omega
from .recovery import RecoveryProblem, solve as solve_recovery
from .selftest import FAULTS, run_selftest
from .tables import ESTIMATOR_TOKENS, ExperimentConfig, bench_omega, run_table
from .verify import compute_s_star, verify_positive

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_NUMERICAL = 2
EXIT_NOT_VERIFIED = 3


class _Parser(argparse.ArgumentParser):
    """argparse exits with 2 on usage errors; the contract here says 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        raise _UsageError(message)


class _UsageError(Exception):
    pass


def _common_flags(suppress: bool):
    """The global flags, attachable before or after the subcommand name."""
    d = (lambda v: argparse.SUPPRESS) if suppress else (lambda v: v)
    p = _Parser(add_help=False)
    p.add_argument("--seed", type=int, default=d(0),
                   help="base seed for everything randomized (default 0)")
    p.add_argument("--threads", type=int, default=d(None),
                   help="parallelism degree; results do not depend on it")
    p.add_argument("--feas-tol", type=float, default=d(1e-8))
    p.add_argument("--gap-tol", type=float, default=d(1e-8))
    p.add_argument("--tol", type=float, default=d(1e-4),
                   help="relative fixed-point tolerance")
    p.add_argument("--json", action="store_true",
                   default=d(False), help="print results as JSON")
    p.add_argument("--out", default=d(None), metavar="PATH",
                   help="write output to PATH instead of stdout")
    return p


def _opts(args) -> SolverOptions:
    return SolverOptions(feas_tol=args.feas_tol, gap_tol=args.gap_tol)


def _write_text(args, text: str) -> None:
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _emit(args, jsonable: dict, human: str) -> None:
    if args.json:
        _write_text(args, json.dumps(jsonable, indent=2, sort_keys=True) + "\n")
    else:
        _write_text(args, human if human.endswith("\n") else human + "\n")


def _load_matrix(path: str) -> np.ndarray:
    return matrixio.load_matrix(path)


def _load_vector(path: str) -> np.ndarray:
    return matrixio.load_matrix(path).ravel()


def _floats(text: str) -> tuple[float, ...]:
    return tuple(float(tok) for tok in text.split(",") if tok.strip())


def _ints(text: str) -> tuple[int, ...]:
    return tuple(int(tok) for tok in text.split(",") if tok.strip())


# -- subcommand handlers -------------------------------------------------------


def _cmd_gen(args) -> int:
    if not args.out:
        raise ValueError("gen writes a matrix file; --out PATH is required")
    matrix = generate(args.ensemble, args.m, args.n, seed=args.seed)
    matrixio.save_matrix(args.out, matrix)
    meta = {"ensemble": args.ensemble, "m": args.m, "n": args.n,
            "seed": args.seed, "path": args.out}
    line = (f"wrote {args.ensemble} {args.m}x{args.n} "
            f"(seed {args.seed}) to {args.out}")
    print(json.dumps(meta, sort_keys=True) if args.json else line)
    return EXIT_OK


def _cmd_verify(args) -> int:
    arr = _load_matrix(args.matrix)
    res = compute_s_star(arr, _opts(args), threads=args.threads)
    payload = res.to_jsonable()
    lines = [
        f"s_star       {res.s_star:.8g}",
        f"k_star       {res.k_star}",
        f"rank         {res.rank}",
        f"certifiable  {res.certifiable}",
        f"boundary     {res.boundary}",
        f"elapsed_s    {res.elapsed_s:.3f}",
    ]
    if res.failed_indices:
        lines.append(f"failed_indices {res.failed_indices}")
    code = EXIT_OK
    if args.s is not None:
        verified, margin = verify_positive(arr, args.s, result=res)
        payload.update(s=args.s, verified=verified, margin=margin)
        lines.append(f"s = {args.s:g}: " +
                     ("verified" if verified else "NOT verified") +
                     f" (margin {margin:.6g})")
        if not verified:
            code = EXIT_NOT_VERIFIED
    _emit(args, payload, "\n".join(lines))
    return code


def _cmd_omega(args) -> int:
    arr = _load_matrix(args.matrix)
    opts = _opts(args)
    verification = compute_s_star(arr, opts, threads=args.threads)
    query = GoodnessQuery(matrix=arr, s=args.s, diamond=args.diamond,
                          q_kind=args.q)
    res = compute_omega(query, algorithm=args.algorithm, tol=args.tol,
                        opts=opts, verification=verification)
    if args.trace:
        with open(args.trace, "w") as fh:
            for eta, idx, solves in res.trace.iterates:
                fh.write(json.dumps({"eta": float(eta), "index": int(idx),
                                     "subproblems": int(solves)}) + "\n")
            fh.write(json.dumps({"algorithm": res.trace.algorithm,
                                 "converged": res.trace.converged,
                                 "omega": res.omega,
                                 "eta_star": res.eta_star}) + "\n")
    human = (f"omega        {res.omega:.8g}\n"
             f"eta_star     {res.eta_star:.8g}\n"
             f"iterations   {len(res.trace.iterates)}\n"
             f"subproblems  {res.subproblems_solved}\n"
             f"elapsed_s    {res.elapsed_s:.3f}")
    _emit(args, res.to_jsonable(), human)
    return EXIT_OK


def _cmd_bounds(args) -> int:
    arr = _load_matrix(args.matrix)
    opts = _opts(args)
    m, n = arr.shape
    estimator = "dantzig" if args.estimator == "ds" else args.estimator
    noise = args.eps if args.estimator == "bp" else args.mu
    verification = compute_s_star(arr, opts, threads=args.threads)

    if args.estimator == "bp":
        query = GoodnessQuery(matrix=arr, s=2.0 * args.k, diamond="l2")
    else:
        scale = (2.0 * args.k if args.estimator == "ds"
                 else bnd.lasso_s(args.k, args.kappa))
        query = GoodnessQuery(matrix=arr, s=scale, diamond="linf", q_kind="AtA")

    code = EXIT_OK
    omega_value = 0.0
    try:
        omega_value = compute_omega(query, tol=args.tol, opts=opts,
                                    verification=verification).omega
    except NotVerifiableError:
        code = EXIT_NOT_VERIFIED

    delta2k = delta3k = None
    ric = {}
    if args.estimator in ("bp", "ds"):
        est = bnd.ric_monte_carlo(arr, 2 * args.k, trials=args.ric_trials,
                                  seed=args.seed)
        delta2k, ric["delta_2k"] = est.delta_hat, est.to_jsonable()
    if args.estimator == "ds" and 3 * args.k <= n:
        est = bnd.ric_monte_carlo(arr, 3 * args.k, trials=args.ric_trials,
                                  seed=args.seed)
        delta3k, ric["delta_3k"] = est.delta_hat, est.to_jsonable()

    report = bnd.make_report(k=args.k, m=m, n=n, estimator=estimator,
                             noise_level=noise, omega_value=omega_value,
                             kappa=args.kappa if estimator == "lasso" else None,
                             delta2k=delta2k, delta3k=delta3k)
    payload = report.to_jsonable()
    payload["s_star"] = None if math.isinf(verification.s_star) else verification.s_star
    payload["ric"] = ric

    def show(v):
        return "-" if v is None else f"{v:.6g}"

    human_lines = [
        f"estimator    {estimator} (k = {args.k}, noise level {noise:g})",
        f"omega        {show(omega_value if omega_value > 0 else None)}",
        f"bound_linf   {show(report.bound_linf)}",
        f"bound_l1     {show(report.bound_l1)}",
        f"bound_l2     {show(report.bound_l2)}",
        f"ric_bound_l2 {show(report.ric_bound_l2)}",
    ]
    for name, reason in sorted((report.validity or {}).items()):
        if reason:
            human_lines.append(f"  {name}: {reason}")
    _emit(args, payload, "\n".join(human_lines))
    return code


def _cmd_recover(args) -> int:
    arr = _load_matrix(args.matrix)
    y = _load_vector(args.y)
    problem = RecoveryProblem(matrix=arr, y=y, level=args.level,
                              kappa=args.kappa)
    res = solve_recovery(args.estimator, problem, _opts(args))
    if args.json:
        _emit(args, res.to_jsonable(), "")
    else:
        lines = [("%.17g" % v) for v in np.ravel(res.xhat)]
        _write_text(args, "\n".join(lines) + "\n")
        print(f"# status {res.status}, residual {res.residual:.6g}, "
              f"objective {res.objective:.6g}", file=sys.stderr)
    return EXIT_OK if res.ok else EXIT_NUMERICAL


def _cmd_table(args) -> int:
    k_range = args.k_range if args.k_range else tuple(range(1, args.kmax + 1))
    config = ExperimentConfig(
        ensemble=args.ensemble, n=args.n, rho_list=args.rhos,
        k_range=k_range, estimators=args.estimators, seed=args.seed,
        kappa=args.kappa, noise_level=args.noise_level, tol=args.tol,
        feas_tol=args.feas_tol, gap_tol=args.gap_tol,
        ric_trials=args.ric_trials, threads=args.threads,
    )
    progress = (lambda msg: print(msg, file=sys.stderr)) if args.verbose else None
    result = run_table(config, progress=progress)
    for failure in result.failures:
        print(f"warning: {failure}", file=sys.stderr)
    if args.out:
        result.write(args.out, args.timing_out)
    else:
        sys.stdout.write(result.value_csv())
    return EXIT_OK


def _cmd_selftest(args) -> int:
    lines: list[str] = []
    report = run_selftest(inject_fault=args.inject, progress=lines.append,
                          opts=_opts(args))
    summary = "all checks passed" if report.all_passed else "FAILURES present"
    _emit(args, report.to_jsonable(), "\n".join(lines + [summary]))
    return EXIT_OK if report.all_passed else EXIT_NUMERICAL


def _cmd_bench(args) -> int:
    record = bench_omega(ensemble=args.ensemble, m=args.m, n=args.n,
                         seed=args.seed, s=args.s, diamond=args.diamond,
                         q_kind=args.q, algorithm=args.algorithm,
                         tol=args.tol, opts=_opts(args))
    human = (f"verify  {record['verify_seconds']:.3f}s  "
             f"(s* = {record['s_star']:.6g})\n"
             f"omega   {record['omega_seconds']:.3f}s  "
             f"(omega = {record['omega']:.6g}, "
             f"{record['subproblems_solved']} subproblems)")
    _emit(args, record, human)
    return EXIT_OK


# -- parser assembly -----------------------------------------------------------


def build_parser() -> _Parser:
    root_common = _common_flags(suppress=False)
    sub_common = _common_flags(suppress=True)
    parser = _Parser(prog="sensecert", parents=[root_common],
                     description=__doc__.split("\n\n")[1])
    subs = parser.add_subparsers(dest="command", metavar="COMMAND")

    p = subs.add_parser("gen", parents=[sub_common],
                        help="generate an ensemble matrix and write it to a file")
    p.add_argument("--ensemble", required=True,
                   choices=("gaussian", "bernoulli", "hadamard"))
    p.add_argument("--m", type=int, required=True)
    p.add_argument("--n", type=int, required=True)
    p.set_defaults(func=_cmd_gen)

    p = subs.add_parser("verify", parents=[sub_common],
                        help="verification constant s* and dual certificates")
    p.add_argument("--matrix", required=True)
    p.add_argument("--s", type=float, default=None,
                   help="also decide recovery at this scale (exit 3 if s >= s*)")
    p.set_defaults(func=_cmd_verify)

    p = subs.add_parser("omega", parents=[sub_common],
                        help="goodness measure omega_diamond(Q, s)")
    p.add_argument("--matrix", required=True)
    p.add_argument("--s", type=float, required=True)
    p.add_argument("--diamond", default="l2", choices=("l2", "linf", "l1"))
    p.add_argument("--q", default="A", choices=("A", "AtA"),
                   help="use A itself or the Gram matrix A'A")
    p.add_argument("--algorithm", default="hybrid",
                   choices=("naive", "bisection", "hybrid"))
    p.add_argument("--trace", metavar="PATH",
                   help="write the iteration trace as newline-delimited JSON")
    p.set_defaults(func=_cmd_omega)

    p = subs.add_parser("bounds", parents=[sub_common],
                        help="recovery-error bounds for one (matrix, k)")
    p.add_argument("--matrix", required=True)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--estimator", required=True, choices=ESTIMATOR_TOKENS)
    p.add_argument("--kappa", type=float, default=None)
    p.add_argument("--eps", type=float, default=1.0,
                   help="basis pursuit noise level (default 1)")
    p.add_argument("--mu", type=float, default=1.0,
                   help="dantzig/lasso residual level (default 1)")
    p.add_argument("--ric-trials", type=int, default=1000)
    p.set_defaults(func=_cmd_bounds)

    p = subs.add_parser("recover", parents=[sub_common],
                        help="solve one recovery problem, print the estimate")
    p.add_argument("--matrix", required=True)
    p.add_argument("--y", required=True, help="measurement vector file")
    p.add_argument("--estimator", required=True, choices=ESTIMATOR_TOKENS)
    p.add_argument("--level", type=float, required=True,
                   help="eps for bp, mu for ds/lasso")
    p.add_argument("--kappa", type=float, default=None)
    p.set_defaults(func=_cmd_recover)

    p = subs.add_parser("table", parents=[sub_common],
                        help="fill a (rho, k) grid of bounds as CSV")
    p.add_argument("--ensemble", default="bernoulli",
                   choices=("gaussian", "bernoulli", "hadamard"))
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--rhos", type=_floats, required=True,
                   metavar="R[,R...]", help="undersampling ratios m/n")
    p.add_argument("--kmax", type=int, default=1,
                   help="fill k = 1..kmax (ignored when --k-range is given)")
    p.add_argument("--k-range", type=_ints, default=None, metavar="K[,K...]")
    p.add_argument("--estimators", type=lambda t: tuple(t.split(",")),
                   default=("bp",), metavar="EST[,EST...]")
    p.add_argument("--kappa", type=float, default=None)
    p.add_argument("--noise-level", type=float, default=1.0)
    p.add_argument("--ric-trials", type=int, default=1000)
    p.add_argument("--timing-out", default=None, metavar="PATH",
                   help="timing sidecar (default: <out>.timing.csv)")
    p.add_argument("--verbose", action="store_true",
                   help="print per-cell progress to stderr")
    p.set_defaults(func=_cmd_table)

    p = subs.add_parser("selftest", parents=[sub_common],
                        help="run the built-in invariant suite")
    p.add_argument("--inject", default=None, choices=FAULTS,
                   help="corrupt one input to confirm the suite catches it")
    p.set_defaults(func=_cmd_selftest)

    p = subs.add_parser("bench", parents=[sub_common],
                        help="time verification plus one goodness computation")
    p.add_argument("--ensemble", default="bernoulli",
                   choices=("gaussian", "bernoulli", "hadamard"))
    p.add_argument("--m", type=int, required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--s", type=float, default=2.0)
    p.add_argument("--diamond", default="l2", choices=("l2", "linf", "l1"))
    p.add_argument("--q", default="A", choices=("A", "AtA"))
    p.add_argument("--algorithm", default="hybrid",
                   choices=("naive", "bisection", "hybrid"))
    p.set_defaults(func=_cmd_bench)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if not getattr(args, "command", None):
            parser.print_help()
            return EXIT_USAGE
        return args.func(args)
    except _UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except NotVerifiableError as exc:
        print(f"not verifiable: {exc}", file=sys.stderr)
        return EXIT_NOT_VERIFIED
    except OmegaError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (FileNotFoundError, IsADirectoryError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except RuntimeError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
