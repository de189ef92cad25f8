"""Verification constant of a sensing matrix.

The largest sparsity the matrix provably supports is read off the kernel:

    s_star = min { ||z||_1 / ||z||_inf : z in ker(A), z != 0 }

and every k with 2k < s_star admits exact sparse recovery by l1
minimization. 1/s_star is computed as n small linear programs

    v_i = max z_i  s.t.  R z = 0, ||z||_1 <= 1        (i = 1..n)

where R is an orthonormal row basis with the same kernel as A (QR of A^T);
then s_star = 1 / max_i v_i. Each LP is solved on the kernel coordinates
(z = N w with N an orthonormal kernel basis), so the equality rows never
appear explicitly. By LP duality v_i also equals min_lam ||e_i - R^T lam||_inf,
which supplies per-index certificates and, downstream, bracket seeds for the
goodness-measure computation.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from . import conic
from .conic import SolverOptions, primal_dual_ineq
from .ensembles import as_array, kernel_complement
from .structured import AbsBlock, StructuredProblem

TRIVIAL_KERNEL_TOL = 1e-12


@dataclass
class VerificationResult:
    s_star: float                   # +inf for a trivial kernel
    k_star: int | None              # floor(s_star / 2); None when s_star is inf
    per_index: np.ndarray           # v_i, each in [0, 1]
    duals: np.ndarray               # (n, rank); row i certifies v_i ~ ||e_i - R^T duals[i]||_inf
    row_basis: np.ndarray           # (rank, n) orthonormal rows, kernel equal to the input's
    rank: int
    elapsed_s: float
    boundary: bool                  # 2*k_star == s_star (certification not strict at k_star)
    certifiable: bool               # k_star >= 1
    failed_indices: list[int] = field(default_factory=list)

    def to_jsonable(self) -> dict:
        return {
            "s_star": None if math.isinf(self.s_star) else self.s_star,
            "k_star": self.k_star,
            "per_index": [float(v) for v in self.per_index],
            "rank": self.rank,
            "boundary": self.boundary,
            "certifiable": self.certifiable,
            "failed_indices": list(self.failed_indices),
            "elapsed_s": self.elapsed_s,
        }


def _index_lp(kernel_basis: np.ndarray, i: int, opts: SolverOptions):
    """max (N w)_i subject to ||N w||_1 <= 1, in kernel coordinates w."""
    n = kernel_basis.shape[0]
    prob = StructuredProblem(
        c_z=-kernel_basis[i, :],
        blocks=[AbsBlock(size=n, M=kernel_basis, budget=1.0)],
        opts=opts,
    )
    x0 = prob.pack(np.zeros(kernel_basis.shape[1]), [np.full(n, 0.5 / n)])
    x, lam, gap, status, iters = primal_dual_ineq(prob, x0, opts)
    if status != conic.OPTIMAL:
        opts2 = SolverOptions(
            feas_tol=opts.feas_tol, gap_tol=opts.gap_tol, max_iters=opts.max_iters,
            reg_base=opts.reg_base * 10.0,
        )
        prob = StructuredProblem(
            c_z=-kernel_basis[i, :],
            blocks=[AbsBlock(size=n, M=kernel_basis, budget=1.0)],
            opts=opts2,
        )
        x, lam, gap, status, iters = primal_dual_ineq(prob, x0, opts2)
    value = -float(prob.c @ x)
    mult_plus = lam[prob.slices[("abs+", 0)]]
    mult_minus = lam[prob.slices[("abs-", 0)]]
    # stationarity in z space: e_i = R^T lam_R + (mult_plus - mult_minus)
    resid = -(mult_plus - mult_minus)
    resid[i] += 1.0
    return value, resid, status


def compute_s_star(
    matrix,
    opts: SolverOptions | None = None,
    threads: int | None = None,
) -> VerificationResult:
    """Verification constant, per-index values, and dual certificates.

    threads is accepted for interface stability; per-index subproblems are
    independent and could run concurrently, but the reduction (max over
    indices) is performed in index order either way, so results do not
    depend on it.
    """
    del threads
    opts = opts or SolverOptions()
    t0 = time.perf_counter()
    arr = as_array(matrix)
    n = arr.shape[1]
    dec = kernel_complement(arr)
    row_basis = dec.row_basis
    kernel = dec.kernel_basis

    if kernel.shape[1] == 0:
        return VerificationResult(
            s_star=math.inf,
            k_star=None,
            per_index=np.zeros(n),
            duals=np.zeros((n, dec.rank)),
            row_basis=row_basis,
            rank=dec.rank,
            elapsed_s=time.perf_counter() - t0,
            boundary=False,
            certifiable=True,
        )

    per_index = np.zeros(n)
    duals = np.zeros((n, dec.rank))
    failed: list[int] = []
    for i in range(n):
        value, resid, status = _index_lp(kernel, i, opts)
        if status == conic.OPTIMAL:
            per_index[i] = min(max(value, 0.0), 1.0)
            duals[i, :] = row_basis @ resid
            continue
        # the dual LP is an equivalent formulation (strong duality) on far
        # fewer variables; use it as a fallback before declaring the index dead
        value, lam_r, status = solve_index_dual_lp(row_basis, i, opts)
        if status == conic.OPTIMAL:
            per_index[i] = min(max(value, 0.0), 1.0)
            duals[i, :] = lam_r
        else:
            failed.append(i)

    if len(failed) == n:
        raise RuntimeError("all verification subproblems failed")

    vmax = float(np.max(per_index))
    if vmax <= TRIVIAL_KERNEL_TOL:
        s_star: float = math.inf
        k_star = None
        boundary = False
    else:
        s_star = 1.0 / vmax
        k_star = int(math.floor(s_star / 2.0))
        # the subproblem optima carry ~gap_tol noise; scale the boundary
        # detection accordingly so exact-integer cases are flagged "not strict"
        boundary = (s_star - 2.0 * k_star) <= 1e-6 * max(1.0, s_star)
    return VerificationResult(
        s_star=s_star,
        k_star=k_star,
        per_index=per_index,
        duals=duals,
        row_basis=row_basis,
        rank=dec.rank,
        elapsed_s=time.perf_counter() - t0,
        boundary=boundary,
        certifiable=(k_star is None) or (k_star >= 1),
        failed_indices=failed,
    )


def verify_positive(
    matrix,
    s: float,
    result: VerificationResult | None = None,
    margin_tol: float | None = None,
) -> tuple[bool, float]:
    """Is recovery verified at sparsity scale s? Returns (decision, margin).

    The decision requires strict slack: s must sit below s_star by more than
    margin_tol, which defaults to 1e-6 * max(1, s) so that boundary cases
    (s == s_star up to subproblem solver accuracy) are rejected rather than
    certified on noise.
    """
    if result is None:
        result = compute_s_star(matrix)
    if margin_tol is None:
        margin_tol = 1e-6 * max(1.0, s)
    margin = result.s_star - s
    return bool(s < result.s_star - margin_tol), margin


@dataclass(frozen=True)
class DimensionBoundReport:
    applicable: bool        # n >= 32 m
    threshold: float        # 2*sqrt(2 m)
    satisfied: bool | None  # None when not applicable
    message: str


def dimension_bound_check(m: int, n: int, s_star: float) -> DimensionBoundReport:
    """For strongly rectangular matrices (n >= 32 m) the verification
    constant provably stays below 2*sqrt(2m); report whether it did."""
    threshold = 2.0 * math.sqrt(2.0 * m)
    if n < 32 * m:
        return DimensionBoundReport(False, threshold, None, f"not applicable: n={n} < 32*m={32*m}")
    ok = bool(s_star < threshold)
    word = "holds" if ok else "VIOLATED"
    return DimensionBoundReport(
        True, threshold, ok, f"s_star={s_star:.6g} vs 2*sqrt(2m)={threshold:.6g}: {word}"
    )


def solve_index_dual_lp(Q: np.ndarray, i: int, opts: SolverOptions | None = None):
    """Independently solve min_lam ||e_i - Q^T lam||_inf as a dense LP.

    Used as a cross-check of the primal per-index values (strong duality);
    the variable count is rank+1, so this is cheap even at n = 256.
    """
    opts = opts or SolverOptions()
    Q = np.atleast_2d(np.asarray(Q, dtype=float))
    p, n = Q.shape
    e = np.zeros(n)
    e[i] = 1.0
    # variables (lam, t): +-(e_i - Q^T lam) <= t
    G = np.vstack([
        np.hstack([-Q.T, -np.ones((n, 1))]),
        np.hstack([Q.T, -np.ones((n, 1))]),
    ])
    h = np.concatenate([-e, e])
    c = np.append(np.zeros(p), 1.0)
    x0 = np.append(np.zeros(p), 2.0)
    sol = conic.solve_lp(conic.LinearProgram(c, G, h), opts, x0=x0)
    return float(sol.value), sol.x[:p], sol.status
