"""Verifiable sparse-recovery certification: sensing-matrix goodness
measures, verification constants, and computable error bounds."""

__version__ = "0.1.0"

from .bounds import (
    BoundReport,
    RicEstimate,
    bound_bp_inf,
    bound_bp_ric,
    bound_ds_inf,
    bound_ds_ric,
    bound_lasso_inf,
    cmsv_bruteforce,
    make_report,
    ric_monte_carlo,
)
from .conic import (
    ConicSolution,
    LinearProgram,
    SocpProgram,
    SolverOptions,
    solve_lp,
    solve_socp,
)
from .ensembles import (
    KernelDecomposition,
    NoiseSpec,
    SensingMatrix,
    SparseSignal,
    generate,
    kernel_complement,
    rng_from_seed,
    sample_bounded_noise,
    sample_sparse_signal,
)
from .matrixio import load_matrix, save_matrix
from .omega import (
    GoodnessQuery,
    GoodnessResult,
    NotVerifiableError,
    OmegaError,
    compute_omega,
    eval_f_s,
    eval_f_si,
)
from .recovery import (
    RecoveryProblem,
    RecoveryResult,
    solve_bp,
    solve_ds,
    solve_lasso,
)
from .selftest import SelftestReport, run_selftest
from .tables import ExperimentConfig, TableResult, bench_omega, run_table
from .verify import (
    VerificationResult,
    compute_s_star,
    dimension_bound_check,
    verify_positive,
)

__all__ = [
    "BoundReport",
    "ConicSolution",
    "ExperimentConfig",
    "GoodnessQuery",
    "GoodnessResult",
    "KernelDecomposition",
    "LinearProgram",
    "NoiseSpec",
    "NotVerifiableError",
    "OmegaError",
    "RecoveryProblem",
    "RecoveryResult",
    "RicEstimate",
    "SelftestReport",
    "SensingMatrix",
    "SocpProgram",
    "SolverOptions",
    "SparseSignal",
    "TableResult",
    "VerificationResult",
    "bench_omega",
    "bound_bp_inf",
    "bound_bp_ric",
    "bound_ds_inf",
    "bound_ds_ric",
    "bound_lasso_inf",
    "cmsv_bruteforce",
    "compute_omega",
    "compute_s_star",
    "dimension_bound_check",
    "eval_f_s",
    "eval_f_si",
    "generate",
    "kernel_complement",
    "load_matrix",
    "make_report",
    "ric_monte_carlo",
    "rng_from_seed",
    "run_selftest",
    "run_table",
    "sample_bounded_noise",
    "sample_sparse_signal",
    "save_matrix",
    "solve_bp",
    "solve_ds",
    "solve_lasso",
    "solve_lp",
    "solve_socp",
    "verify_positive",
]
