"""The three l1 estimators, used to check that certified bounds hold.

solve_bp and solve_ds run on the interior-point machinery from conic.py
(l1 objectives split into auxiliary variables); solve_lasso is accelerated
proximal gradient, which avoids a third cone formulation entirely. These are
reference implementations: clarity and verifiable optimality over speed.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass

import numpy as np

from . import conic
from .conic import SolverOptions, log_barrier, primal_dual_ineq
from .ensembles import as_array, kernel_complement
from .structured import AbsBlock, PmRows, QuadTerm, StructuredProblem

CONSTRAINT_TOL = 1e-6
LASSO_REL_TOL = 1e-10
LASSO_KKT_TOL = 1e-8
LASSO_MAX_ITERS = 100_000


@dataclass(frozen=True)
class RecoveryProblem:
    """Measurements y = A x + w plus the noise parameter of the estimator.

    level is eps for basis pursuit (l2 noise ball) and mu for the Dantzig
    selector and the lasso; kappa only matters when the lasso result feeds
    the corresponding bound.
    """

    matrix: object
    y: np.ndarray
    level: float
    kappa: float | None = None

    def __post_init__(self):
        A = as_array(self.matrix)
        y = np.asarray(self.y, dtype=float).ravel()
        object.__setattr__(self, "y", y)
        if y.size != A.shape[0]:
            raise ValueError("y length must match the matrix row count")
        if self.level < 0:
            raise ValueError("noise level must be nonnegative")


@dataclass
class RecoveryResult:
    xhat: np.ndarray
    residual: float          # achieved constraint value (estimator-specific)
    status: str
    objective: float         # ||xhat||_1, or the lasso composite
    iterations: int
    elapsed_s: float

    @property
    def ok(self) -> bool:
        return self.status == conic.OPTIMAL

    def to_jsonable(self) -> dict:
        return {
            "xhat": [float(v) for v in self.xhat],
            "residual": self.residual,
            "status": self.status,
            "objective": self.objective,
            "iterations": self.iterations,
            "elapsed_s": self.elapsed_s,
        }


def _interior_u(vals: np.ndarray) -> np.ndarray:
    return np.abs(vals) + 1.0


def _equality_l1(A: np.ndarray, y: np.ndarray, opts: SolverOptions):
    """min ||z||_1 s.t. Az = y, by eliminating the equality onto the kernel.

    Writes z = x_p + N w with x_p the least-squares particular solution and
    N an orthonormal kernel basis, leaving an LP in w only.
    """
    dec = kernel_complement(A)
    x_p, *_ = np.linalg.lstsq(A, y, rcond=None)
    if dec.rank == A.shape[1]:
        return x_p, conic.OPTIMAL, 0
    N = dec.kernel_basis
    prob = StructuredProblem(
        np.zeros(N.shape[1]),
        [AbsBlock(A.shape[1], M=N, offset=x_p, c_u=1.0)],
        opts=opts,
    )
    x0 = np.concatenate([np.zeros(N.shape[1]), _interior_u(x_p)])
    x, _, _, status, iters = primal_dual_ineq(prob, x0, opts)
    return x_p + N @ x[: N.shape[1]], status, iters


def solve_bp(problem: RecoveryProblem, opts: SolverOptions | None = None) -> RecoveryResult:
    """Basis pursuit: min ||z||_1 subject to ||y - Az||_2 <= eps."""
    opts = opts or SolverOptions()
    A = as_array(problem.matrix)
    y, eps = problem.y, problem.level
    n = A.shape[1]
    start = time.perf_counter()
    if eps == 0.0:
        xhat, status, iters = _equality_l1(A, y, opts)
    else:
        z_ls, *_ = np.linalg.lstsq(A, y, rcond=None)
        if np.linalg.norm(A @ z_ls - y) >= eps:
            # no strictly feasible point: the noise ball misses the range
            return RecoveryResult(
                xhat=np.full(n, np.nan), residual=math.inf,
                status=conic.INFEASIBLE, objective=math.inf, iterations=0,
                elapsed_s=time.perf_counter() - start,
            )
        prob = StructuredProblem(
            np.zeros(n),
            [AbsBlock(n, c_u=1.0)],
            quad=QuadTerm(P=A, d=y, r=0.5 * eps * eps),
            opts=opts,
        )
        x0 = np.concatenate([z_ls, _interior_u(z_ls)])
        x, _, _, _, status, iters = log_barrier(prob, x0, opts)
        xhat = x[:n]
    return RecoveryResult(
        xhat=xhat,
        residual=float(np.linalg.norm(y - A @ xhat)),
        status=status,
        objective=float(np.sum(np.abs(xhat))),
        iterations=iters,
        elapsed_s=time.perf_counter() - start,
    )


def solve_ds(problem: RecoveryProblem, opts: SolverOptions | None = None) -> RecoveryResult:
    """Dantzig selector: min ||z||_1 subject to ||A'(y - Az)||_inf <= mu."""
    opts = opts or SolverOptions()
    A = as_array(problem.matrix)
    y, mu = problem.y, problem.level
    n = A.shape[1]
    start = time.perf_counter()
    aty = A.T @ y
    if mu == 0.0:
        # A'A z = A'y has the same solution set as Az = proj_range(A) y
        xhat, status, iters = _equality_l1(A, A @ np.linalg.lstsq(A, y, rcond=None)[0], opts)
    else:
        ata = A.T @ A
        prob = StructuredProblem(
            np.zeros(n),
            [AbsBlock(n, c_u=1.0)],
            pm=PmRows(W=ata, h_plus=aty + mu, h_minus=mu - aty),
            opts=opts,
        )
        z0, *_ = np.linalg.lstsq(A, y, rcond=None)    # A'A z0 = A'y exactly
        x0 = np.concatenate([z0, _interior_u(z0)])
        x, _, _, status, iters = primal_dual_ineq(prob, x0, opts)
        xhat = x[:n]
    return RecoveryResult(
        xhat=xhat,
        residual=float(np.max(np.abs(A.T @ (y - A @ xhat)))),
        status=status,
        objective=float(np.sum(np.abs(xhat))),
        iterations=iters,
        elapsed_s=time.perf_counter() - start,
    )


def soft_threshold(v: np.ndarray, tau: float) -> np.ndarray:
    return np.sign(v) * np.maximum(np.abs(v) - tau, 0.0)


def _lasso_kkt_residual(A: np.ndarray, y: np.ndarray, x: np.ndarray,
                        mu: float) -> float:
    """Worst violation of the lasso optimality conditions at x.

    With g = A^T(Ax - y): off the support |g_i| may not exceed mu, and on
    the support g_i must equal -mu*sign(x_i). Zero residual is optimality.
    """
    g = A.T @ (A @ x - y)
    worst = float(np.max(np.maximum(np.abs(g) - mu, 0.0)))
    on = x != 0.0
    if np.any(on):
        worst = max(worst, float(np.max(np.abs(g[on] + mu * np.sign(x[on])))))
    return worst


def solve_lasso(problem: RecoveryProblem, opts: SolverOptions | None = None) -> RecoveryResult:
    """Lasso: min 0.5*||y - Az||_2^2 + mu*||z||_1 by accelerated prox gradient.

    Fixed step 1/L with L the largest squared singular value. A small
    relative objective change (below 1e-10) triggers a stop, but the stop is
    only accepted once the first-order optimality residual falls under
    1e-8*max(1, mu); the objective criterion alone can fire while the
    gradient conditions are still a few decades short. Flagged max_iters
    past 1e5 iterations. opts is accepted for interface symmetry and ignored.
    """
    A = as_array(problem.matrix)
    y, mu = problem.y, problem.level
    if mu <= 0:
        raise ValueError("lasso requires mu > 0")
    start = time.perf_counter()
    L = float(np.linalg.norm(A, 2)) ** 2
    if L == 0.0:
        xhat = np.zeros(A.shape[1])
        return RecoveryResult(
            xhat=xhat, residual=float(np.linalg.norm(y)), status=conic.OPTIMAL,
            objective=0.5 * float(y @ y), iterations=0,
            elapsed_s=time.perf_counter() - start,
        )

    def objective(z):
        r = A @ z - y
        return 0.5 * float(r @ r) + mu * float(np.sum(np.abs(z)))

    x = np.zeros(A.shape[1])
    z = x
    t = 1.0
    obj = objective(x)
    status = conic.MAX_ITERS
    it = 0
    for it in range(1, LASSO_MAX_ITERS + 1):
        grad = A.T @ (A @ z - y)
        x_new = soft_threshold(z - grad / L, mu / L)
        t_new = 0.5 * (1.0 + math.sqrt(1.0 + 4.0 * t * t))
        z = x_new + ((t - 1.0) / t_new) * (x_new - x)
        x, t = x_new, t_new
        obj_new = objective(x)
        if (abs(obj_new - obj) <= LASSO_REL_TOL * max(1.0, abs(obj))
                and _lasso_kkt_residual(A, y, x, mu) <= LASSO_KKT_TOL * max(1.0, mu)):
            obj = obj_new
            status = conic.OPTIMAL
            break
        obj = obj_new
    return RecoveryResult(
        xhat=x,
        residual=float(np.linalg.norm(y - A @ x)),
        status=status,
        objective=obj,
        iterations=it,
        elapsed_s=time.perf_counter() - start,
    )


def solve(estimator: str, problem: RecoveryProblem,
          opts: SolverOptions | None = None) -> RecoveryResult:
    """Dispatch by estimator name ('bp', 'ds'/'dantzig', 'lasso')."""
    if estimator == "bp":
        return solve_bp(problem, opts)
    if estimator in ("ds", "dantzig"):
        return solve_ds(problem, opts)
    if estimator == "lasso":
        return solve_lasso(problem, opts)
    raise ValueError(f"unknown estimator {estimator!r}")
