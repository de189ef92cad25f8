"""Grid experiments: verification constants and error bounds over (rho, k).

A table run draws one fresh matrix per undersampling ratio rho (m = floor(
rho*n) rows), verifies it, and then fills one row per (estimator, k) cell
with the goodness measure at the estimator's scale, the error bounds it
implies, and the Monte Carlo RIC baseline. Cells whose bound does not exist
(measure not positive, RIC condition violated) stay blank and carry the
reason in a separate column; a cell whose solve fails is recorded and the
run continues.

Timing is written to a sidecar table rather than the value table so the
value CSV is reproducible byte for byte from (config, seeds).
"""

from __future__ import annotations

import csv
import io
import math
import time
from dataclasses import dataclass, field

import numpy as np

from . import bounds as bnd
from .conic import SolverOptions
from .ensembles import generate
from .omega import DEFAULT_TOL, GoodnessQuery, NotVerifiableError, OmegaError, compute_omega
from .verify import compute_s_star

ESTIMATOR_TOKENS = ("bp", "ds", "lasso")
REASON_NOT_VERIFIABLE = "s >= s_star"
REASON_SOLVER = "numerical failure"

#: column order of the value table; fixed so output bytes are reproducible
VALUE_COLUMNS = [
    "ensemble", "n", "rho", "m", "matrix_seed",
    "s_star", "k_star",
    "estimator", "k", "scale_s", "noise_level",
    "omega", "omega_reason",
    "bound_linf", "bound_l1", "bound_l2",
    "delta_2k", "delta_3k", "ric_bound_l2", "ric_reason",
    "kappa", "tol", "feas_tol", "gap_tol",
    "omega_iterations", "omega_subproblems", "ric_trials", "ric_seed",
]

TIMING_COLUMNS = ["ensemble", "n", "rho", "m", "estimator", "k", "stage", "seconds"]


def derived_seed(base: int, *path: int) -> int:
    """Stable 32-bit seed for a cell, distinct per path, recordable in CSV."""
    return int(np.random.SeedSequence([int(base), *map(int, path)]).generate_state(1)[0])


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything a table run depends on, so runs are reproducible."""

    ensemble: str = "bernoulli"
    n: int = 256
    rho_list: tuple[float, ...] = (0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8)
    k_range: tuple[int, ...] = (1, 2, 3, 4, 5)
    estimators: tuple[str, ...] = ("bp",)
    seed: int = 0
    kappa: float | None = None
    noise_level: float = 1.0
    tol: float = DEFAULT_TOL
    feas_tol: float = 1e-8
    gap_tol: float = 1e-8
    ric_trials: int = 1000
    threads: int | None = None    # accepted for interface stability; the
    # per-cell reduction is performed in grid order regardless, so results
    # do not depend on it
    out: str | None = None
    timing_out: str | None = None

    def __post_init__(self):
        if self.n <= 0:
            raise ValueError("n must be positive")
        if not self.rho_list:
            raise ValueError("rho_list must not be empty")
        for rho in self.rho_list:
            if not 0.0 < rho <= 1.0:
                raise ValueError(f"rho must lie in (0, 1], got {rho}")
        for k in self.k_range:
            if k < 1 or 2 * k > self.n:
                raise ValueError(f"k must satisfy 1 <= k <= n/2, got {k}")
        for est in self.estimators:
            if est not in ESTIMATOR_TOKENS:
                raise ValueError(f"unknown estimator {est!r}")
        if "lasso" in self.estimators:
            bnd._check_kappa(self.kappa)

    def solver_options(self) -> SolverOptions:
        return SolverOptions(feas_tol=self.feas_tol, gap_tol=self.gap_tol)

    def to_jsonable(self) -> dict:
        return {
            "ensemble": self.ensemble, "n": self.n,
            "rho_list": list(self.rho_list), "k_range": list(self.k_range),
            "estimators": list(self.estimators), "seed": self.seed,
            "kappa": self.kappa, "noise_level": self.noise_level,
            "tol": self.tol, "feas_tol": self.feas_tol, "gap_tol": self.gap_tol,
            "ric_trials": self.ric_trials,
        }


@dataclass
class TableResult:
    config: ExperimentConfig
    rows: list = field(default_factory=list)      # dicts keyed by VALUE_COLUMNS
    timings: list = field(default_factory=list)   # dicts keyed by TIMING_COLUMNS
    failures: list = field(default_factory=list)  # human-readable strings

    def value_csv(self) -> str:
        return _csv_text(VALUE_COLUMNS, self.rows)

    def timing_csv(self) -> str:
        return _csv_text(TIMING_COLUMNS, self.timings)

    def write(self, path: str, timing_path: str | None = None) -> None:
        with open(path, "w", newline="") as fh:
            fh.write(self.value_csv())
        if timing_path is None:
            timing_path = str(path) + ".timing.csv"
        with open(timing_path, "w", newline="") as fh:
            fh.write(self.timing_csv())


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        return "%.10g" % value
    return str(value)


def _csv_text(columns, rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([_fmt(row.get(col)) for col in columns])
    return buf.getvalue()


def _estimator_query(est: str, matrix, k: int, kappa) -> GoodnessQuery:
    if est == "bp":
        return GoodnessQuery(matrix=matrix, s=2.0 * k, diamond="l2", q_kind="A")
    scale = 2.0 * k if est == "ds" else bnd.lasso_s(k, kappa)
    return GoodnessQuery(matrix=matrix, s=scale, diamond="linf", q_kind="AtA")


def run_table(config: ExperimentConfig, progress=None) -> TableResult:
    """Fill the whole grid, recording failures instead of aborting on them.

    progress, if given, is called with one status string per completed cell.
    """
    opts = config.solver_options()
    result = TableResult(config=config)

    def note(ensemble_row, stage, seconds):
        result.timings.append(dict(ensemble_row, stage=stage, seconds="%.3f" % seconds))

    for ri, rho in enumerate(config.rho_list):
        m = int(math.floor(rho * config.n))
        matrix_seed = derived_seed(config.seed, ri)
        matrix = generate(config.ensemble, m, config.n, seed=matrix_seed)
        base = {
            "ensemble": config.ensemble, "n": config.n, "rho": rho,
            "m": m, "matrix_seed": matrix_seed,
        }
        t0 = time.perf_counter()
        verification = compute_s_star(matrix, opts, threads=config.threads)
        note(base, "verify", time.perf_counter() - t0)

        ric_cache: dict[int, bnd.RicEstimate] = {}

        def ric(k_cols: int) -> bnd.RicEstimate:
            if k_cols not in ric_cache:
                t = time.perf_counter()
                ric_cache[k_cols] = bnd.ric_monte_carlo(
                    matrix, k_cols, trials=config.ric_trials,
                    seed=derived_seed(config.seed, ri, k_cols))
                note(dict(base, estimator="", k=k_cols), "ric",
                     time.perf_counter() - t)
            return ric_cache[k_cols]

        for est in config.estimators:
            for k in config.k_range:
                row = dict(base, estimator=est, k=k,
                           s_star=verification.s_star, k_star=verification.k_star,
                           noise_level=config.noise_level,
                           kappa=config.kappa if est == "lasso" else None,
                           tol=config.tol, feas_tol=config.feas_tol,
                           gap_tol=config.gap_tol)
                query = _estimator_query(est, matrix, k, config.kappa)
                row["scale_s"] = query.s
                omega_value = 0.0
                t1 = time.perf_counter()
                try:
                    res = compute_omega(query, algorithm="hybrid",
                                        tol=config.tol, opts=opts,
                                        verification=verification)
                    omega_value = res.omega
                    row.update(omega=res.omega,
                               omega_iterations=len(res.trace.iterates),
                               omega_subproblems=res.subproblems_solved)
                except NotVerifiableError:
                    row["omega_reason"] = REASON_NOT_VERIFIABLE
                except OmegaError as exc:
                    row["omega_reason"] = REASON_SOLVER
                    result.failures.append(
                        f"rho={rho} estimator={est} k={k}: omega solve failed ({exc})")
                note(dict(base, estimator=est, k=k), "omega",
                     time.perf_counter() - t1)

                delta2k = delta3k = None
                ric_seed = None
                if est in ("bp", "ds"):
                    est2k = ric(2 * k)
                    delta2k, ric_seed = est2k.delta_hat, est2k.seed
                    row["delta_2k"] = delta2k
                    row["ric_trials"] = est2k.trials
                if est == "ds" and 3 * k <= config.n:
                    est3k = ric(3 * k)
                    delta3k = est3k.delta_hat
                    row["delta_3k"] = delta3k
                row["ric_seed"] = ric_seed

                report = bnd.make_report(
                    k=k, m=m, n=config.n,
                    estimator="dantzig" if est == "ds" else est,
                    noise_level=config.noise_level, omega_value=omega_value,
                    kappa=config.kappa if est == "lasso" else None,
                    delta2k=delta2k, delta3k=delta3k)
                if row.get("omega") is not None:
                    row.update(bound_linf=report.bound_linf,
                               bound_l1=report.bound_l1,
                               bound_l2=report.bound_l2)
                    if report.bound_linf is None:
                        row["omega_reason"] = report.validity["bound_linf"]
                row["ric_bound_l2"] = report.ric_bound_l2
                row["ric_reason"] = report.validity["ric_bound_l2"]

                result.rows.append(row)
                if progress is not None:
                    progress(f"rho={rho} estimator={est} k={k} done")
    return result


def bench_omega(ensemble: str = "bernoulli", m: int = 51, n: int = 256,
                seed: int = 0, s: float = 2.0, diamond: str = "l2",
                q_kind: str = "A", algorithm: str = "hybrid",
                tol: float = DEFAULT_TOL,
                opts: SolverOptions | None = None) -> dict:
    """Time one verification + goodness computation; returns a flat record."""
    matrix = generate(ensemble, m, n, seed=seed)
    t0 = time.perf_counter()
    verification = compute_s_star(matrix, opts)
    t1 = time.perf_counter()
    query = GoodnessQuery(matrix=matrix, s=s, diamond=diamond, q_kind=q_kind)
    res = compute_omega(query, algorithm=algorithm, tol=tol, opts=opts,
                        verification=verification)
    t2 = time.perf_counter()
    return {
        "ensemble": ensemble, "m": m, "n": n, "seed": seed,
        "s": s, "diamond": diamond, "q_kind": q_kind, "algorithm": algorithm,
        "s_star": verification.s_star, "omega": res.omega,
        "eta_star": res.eta_star, "iterations": len(res.trace.iterates),
        "subproblems_solved": res.subproblems_solved,
        "verify_seconds": t1 - t0, "omega_seconds": t2 - t1,
    }
