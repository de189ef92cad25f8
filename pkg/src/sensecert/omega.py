"""Goodness measures of sensing matrices via fixed-point computation.

omega_diamond(Q, s) is the minimum of ||Q z||_diamond / ||z||_inf over the
cone ||z||_1 <= s ||z||_inf. Its reciprocal is the unique positive fixed
point eta* of the scalar function

    f_s(eta) = max_i f_si(eta),
    f_si(eta) = max { z_i : ||Q z||_diamond <= 1, ||z||_1 <= s*eta },

so computing omega reduces to a one-dimensional root search whose function
evaluations are small LPs (diamond = l1, linf) or SOCPs (diamond = l2).
Three drivers are provided: a naive fixed-point iteration, an accelerated
bisection, and a hybrid that locates per-index fixed points and prunes.

Every subproblem solve also yields a dual pair (a, b) with

    f_si(eta') <= a*eta' + b   for every eta' > 0,

where a = s*||e_i - Q^T lam||_inf and b is the dual norm of lam. These
certificates are cached per index and let later sweeps skip indices whose
bound already sits below the current level, which is what makes the hybrid
driver cheap on matrices with a few dominant indices.
"""

from __future__ import annotations

import math
import time
import warnings
from dataclasses import dataclass, field, replace as dc_replace

import numpy as np

from . import conic
from .conic import SolverOptions
from .structured import AbsBlock, PmRows, QuadTerm, StructuredProblem
from .verify import VerificationResult, compute_s_star, verify_positive

DEFAULT_TOL = 1e-4          # relative tolerance on eta*
EARLY_EXIT_REL = 1e-6       # ascent threshold eps_abs = EARLY_EXIT_REL * eta_t
ETA_CAP = 1e12              # bracket ceiling when dual certificates degenerate
MAX_FP_ITERATIONS = 500
MAX_CACHED_CERTS = 3

_DIAMONDS = ("l1", "l2", "linf")


class OmegaError(RuntimeError):
    """A subproblem solve failed after retry; carries (index, eta) context."""


class NotVerifiableError(ValueError):
    """Requested s is not below the verification constant, so omega <= 0."""

    def __init__(self, s: float, s_star: float):
        super().__init__(
            f"s = {s:g} is not below the verification constant "
            f"s* = {s_star:g}; the goodness measure is not positive"
        )
        self.s = s
        self.s_star = s_star


@dataclass(frozen=True)
class GoodnessQuery:
    """What to compute: which matrix, which norm, which cone opening s."""

    matrix: object              # SensingMatrix or plain 2-d array
    s: float
    diamond: str = "l2"
    q_kind: str = "A"           # "A" or "AtA"

    def __post_init__(self):
        if self.diamond not in _DIAMONDS:
            raise ValueError(f"diamond must be one of {_DIAMONDS}")
        if self.q_kind not in ("A", "AtA"):
            raise ValueError("q_kind must be 'A' or 'AtA'")
        if not self.s > 1.0:
            raise ValueError("s must exceed 1")


@dataclass
class FixedPointTrace:
    algorithm: str
    iterates: list = field(default_factory=list)   # (eta, index, solves so far)
    converged: bool = False
    brackets: list | None = None                   # (lo, hi) per step, bisection

    def to_jsonable(self) -> dict:
        return {
            "algorithm": self.algorithm,
            "converged": self.converged,
            "iterates": [[float(e), int(i), int(c)] for e, i, c in self.iterates],
            "brackets": None if self.brackets is None
            else [[float(a), float(b)] for a, b in self.brackets],
        }


@dataclass
class GoodnessResult:
    omega: float
    eta_star: float
    trace: FixedPointTrace
    dual_upper_bound: float     # certified eta* <= this (inf if not available)
    tol: float
    subproblems_solved: int = 0
    elapsed_s: float = 0.0

    def to_jsonable(self) -> dict:
        return {
            "omega": self.omega,
            "eta_star": self.eta_star,
            "dual_upper_bound": None if math.isinf(self.dual_upper_bound)
            else self.dual_upper_bound,
            "tol": self.tol,
            "algorithm": self.trace.algorithm,
            "converged": self.trace.converged,
            "iterations": len(self.trace.iterates),
            "subproblems_solved": self.subproblems_solved,
            "elapsed_s": self.elapsed_s,
        }


def _matrix_data(matrix) -> np.ndarray:
    return np.asarray(getattr(matrix, "data", matrix), dtype=float)


def _column_norms(Q: np.ndarray, diamond: str) -> np.ndarray:
    if diamond == "l2":
        return np.linalg.norm(Q, axis=0)
    if diamond == "linf":
        return np.max(np.abs(Q), axis=0)
    return np.sum(np.abs(Q), axis=0)


def _dual_norm(lam: np.ndarray, diamond: str) -> float:
    # dual pairs: l2 <-> l2, linf <-> l1, l1 <-> linf
    if lam.size == 0:
        return 0.0
    if diamond == "l2":
        return float(np.linalg.norm(lam))
    if diamond == "linf":
        return float(np.sum(np.abs(lam)))
    return float(np.max(np.abs(lam)))


def build_q(matrix, q_kind: str) -> np.ndarray:
    """Materialize the operator whose goodness is being measured."""
    A = _matrix_data(matrix)
    if q_kind == "A":
        return A
    Q = A.T @ A
    diag = np.abs(np.diag(Q))
    if diag.size and np.min(diag) > 0 and np.max(diag) / np.min(diag) > 1e12:
        warnings.warn(
            "A^T A has a diagonal magnitude spread above 1e12; "
            "subproblem solves may lose accuracy",
            RuntimeWarning,
            stacklevel=2,
        )
    return Q


class FsEvaluator:
    """Solves the f_si subproblems for one (Q, s, diamond) triple.

    A single structured problem template is reused across calls; only the
    objective index and the l1-budget row change between solves. Certified
    affine upper bounds harvested from dual iterates are kept per index
    (at most MAX_CACHED_CERTS each) and consulted before every solve.
    """

    def __init__(self, Q: np.ndarray, s: float, diamond: str,
                 opts: SolverOptions | None = None):
        if diamond not in _DIAMONDS:
            raise ValueError(f"diamond must be one of {_DIAMONDS}")
        Q = np.atleast_2d(np.asarray(Q, dtype=float))
        self.Q = Q
        self.p, self.n = Q.shape
        self.s = float(s)
        self.diamond = diamond
        self.opts = opts or SolverOptions()
        self.solve_count = 0
        self.skip_count = 0
        self.iterations_total = 0
        self.certs: list[list[tuple[float, float]]] = [[] for _ in range(self.n)]
        self._prob = self._build_template(self.opts)

    def _build_template(self, opts: SolverOptions) -> StructuredProblem:
        n, p = self.n, self.p
        zero_c = np.zeros(n)
        budget_block = AbsBlock(size=n, budget=1.0)
        if self.diamond == "linf":
            pm = PmRows(self.Q, np.ones(p), np.ones(p))
            return StructuredProblem(zero_c, [budget_block], pm=pm, opts=opts)
        if self.diamond == "l1":
            image_block = AbsBlock(size=p, M=self.Q, budget=1.0)
            return StructuredProblem(zero_c, [budget_block, image_block], opts=opts)
        return StructuredProblem(zero_c, [budget_block],
                                 quad=QuadTerm(P=self.Q), opts=opts)

    # -- certificate cache --------------------------------------------------

    def add_certificate(self, i: int, a: float, b: float):
        pairs = self.certs[i]
        pairs.append((float(a), float(b)))
        if len(pairs) > MAX_CACHED_CERTS:
            # evict the loosest pair at its own fixed-point level
            def fixed_ub(pair):
                a_c, b_c = pair
                return b_c / (1.0 - a_c) if a_c < 1.0 else math.inf
            pairs.remove(max(pairs, key=fixed_ub))

    def bound_at(self, i: int, eta: float) -> float:
        pairs = self.certs[i]
        if not pairs:
            return math.inf
        return min(a * eta + b for a, b in pairs)

    def index_fixed_upper(self, i: int) -> float:
        """Certified upper bound on the per-index fixed point eta_i*."""
        best = math.inf
        for a, b in self.certs[i]:
            if a < 1.0:
                best = min(best, b / (1.0 - a))
        return best

    def eta_upper_bound(self) -> float:
        """Certified upper bound on eta* = max_i eta_i* (inf when uncovered)."""
        out = 0.0
        for i in range(self.n):
            ub = self.index_fixed_upper(i)
            if math.isinf(ub):
                return math.inf
            out = max(out, ub)
        return out

    # -- subproblem solves ----------------------------------------------------

    def _starting_point(self, prob: StructuredProblem, budget: float) -> np.ndarray:
        z0 = np.zeros(self.n)
        us = [np.full(self.n, 0.5 * budget / self.n)]
        if self.diamond == "l1":
            us.append(np.full(self.p, 0.5 / self.p))
        return prob.pack(z0, us)

    def _extract_dual(self, prob: StructuredProblem, lam: np.ndarray,
                      lam_quad: float | None, z_opt: np.ndarray) -> np.ndarray:
        if self.diamond == "linf":
            return lam[prob.slices["pm+"]] - lam[prob.slices["pm-"]]
        if self.diamond == "l1":
            return lam[prob.slices[("abs+", 1)]] - lam[prob.slices[("abs-", 1)]]
        theta = 0.0 if lam_quad is None else float(lam_quad)
        return theta * (self.Q @ z_opt)

    def _solve_once(self, prob: StructuredProblem, i: int, eta: float):
        budget = self.s * eta
        c_z = np.zeros(self.n)
        c_z[i] = -1.0
        prob.set_linear_z(c_z)
        prob.set_budget(0, budget)
        x0 = self._starting_point(prob, budget)
        if self.diamond == "l2":
            x, lam, lam_quad, _gap, status, iters = conic.log_barrier(
                prob, x0, self.opts)
        else:
            x, lam, _gap, status, iters = conic.primal_dual_ineq(
                prob, x0, self.opts)
            lam_quad = None
        return x, lam, lam_quad, status, iters

    def f_si_with_certificate(self, i: int, eta: float) -> tuple[float, tuple[float, float]]:
        """Exact f_si(eta) plus a certified affine pair (a, b)."""
        if not eta > 0:
            raise ValueError("eta must be positive")
        x, lam, lam_quad, status, iters = self._solve_once(self._prob, i, eta)
        if status != conic.OPTIMAL:
            retry_opts = dc_replace(self.opts, reg_base=self.opts.reg_base * 10.0)
            retry_prob = self._build_template(retry_opts)
            x, lam, lam_quad, status, iters2 = self._solve_once(retry_prob, i, eta)
            iters += iters2
            if status != conic.OPTIMAL:
                raise OmegaError(
                    f"f_s,i subproblem failed (index {i}, eta = {eta:g}, "
                    f"status {status})")
        self.solve_count += 1
        self.iterations_total += iters
        z = self._prob.unpack_z(x)
        value = float(z[i])
        lam_vec = self._extract_dual(self._prob, lam, lam_quad, z)
        resid = np.zeros(self.n)
        resid[i] = 1.0
        resid -= self.Q.T @ lam_vec
        a = self.s * float(np.max(np.abs(resid)))
        b = _dual_norm(lam_vec, self.diamond)
        self.add_certificate(i, a, b)
        return value, (a, b)

    def f_si(self, i: int, eta: float) -> float:
        return self.f_si_with_certificate(i, eta)[0]

    def f_si_dual(self, i: int, eta: float) -> float:
        """Dual objective at the solver's dual iterate; upper-bounds f_si."""
        _, (a, b) = self.f_si_with_certificate(i, eta)
        return a * eta + b

    # -- sweeps over indices ----------------------------------------------------

    def sweep_first_exceeding(self, eta: float, threshold: float):
        """First f_si(eta) > eta + threshold in index order, else None.

        Indices whose cached bound already sits at or below the cutoff are
        skipped; that cannot change which index is the first to exceed.
        Returns (value, index) or (best value among solved, -1, exceeded=False)
        folded as a 3-tuple (value, index, exceeded).
        """
        cutoff = eta + threshold
        best = -math.inf
        for i in range(self.n):
            if self.bound_at(i, eta) <= cutoff:
                self.skip_count += 1
                continue
            value, _ = self.f_si_with_certificate(i, eta)
            if value > cutoff:
                return value, i, True
            best = max(best, value)
        return best, -1, False

    def max_exact(self, eta: float, lo_skip: float = -math.inf,
                  stop_above: float | None = None):
        """Exact (f_s(eta), argmax) with certificate-based skipping.

        An index is skipped only when its cached bound cannot beat the
        running maximum (or lo_skip, a level known to lie below f_s(eta)),
        which preserves exactness of the returned maximum. When stop_above
        is given, the sweep returns early on the first value exceeding it.
        """
        bounds = np.array([self.bound_at(i, eta) for i in range(self.n)])
        order = np.argsort(-bounds)
        best = -math.inf
        arg = -1
        for i in order:
            if bounds[i] <= max(best, lo_skip):
                self.skip_count += 1
                continue
            value, _ = self.f_si_with_certificate(int(i), eta)
            if value > best:
                best, arg = value, int(i)
            if stop_above is not None and value > stop_above:
                return best, arg, True
        return best, arg, False

    def f_s(self, eta: float) -> tuple[float, int]:
        """Exact f_s(eta) = max_i f_si(eta) and the attaining index."""
        if not eta > 0:
            raise ValueError("eta must be positive")
        value, arg, _ = self.max_exact(eta)
        return value, arg


# -- bracketing ------------------------------------------------------------


def _verification_for(query: GoodnessQuery,
                      verification: VerificationResult | None,
                      opts: SolverOptions | None) -> VerificationResult:
    if verification is None:
        verification = compute_s_star(_matrix_data(query.matrix), opts=opts)
    # the strict-margin decision, not a bare comparison: s_star carries
    # subproblem solver noise, and at s == s_star the measure is zero, so
    # certifying on that noise would send the bracket search to infinity
    ok, _ = verify_positive(query.matrix, query.s, result=verification)
    if not ok:
        raise NotVerifiableError(query.s, verification.s_star)
    return verification


def seed_certificates(evaluator: FsEvaluator, verification: VerificationResult):
    """Convert verification duals into per-index affine bounds on f_si.

    The verification certificates live in the coordinates of an orthonormal
    row basis R with ker R = ker A. They are mapped onto Q through a least
    squares solve of Q^T lam = R^T lam_R, and the resulting (a, b) pairs are
    recomputed exactly from lam, so conversion error only loosens them.

    Square Q additionally gets the unit-vector dual lam = e_i / Q_ii, whose
    pair (s * max_j |delta_ij - Q_ji / Q_ii|, 1 / |Q_ii|) stays tight on
    diagonally dominant Gram queries where the least squares map runs
    through near-zero eigenvalues and its intercept explodes.
    """
    n = evaluator.n
    if verification.rank == n:
        targets = np.eye(n)
    else:
        targets = verification.row_basis.T @ verification.duals.T
    lam_all, *_ = np.linalg.lstsq(evaluator.Q.T, targets, rcond=None)
    resid = targets - evaluator.Q.T @ lam_all
    # target column i stands in for e_i: add back the defect e_i - t_i
    if verification.rank != n:
        resid += np.eye(n) - targets
    a_vec = evaluator.s * np.max(np.abs(resid), axis=0)
    for i in range(n):
        evaluator.add_certificate(i, float(a_vec[i]),
                                  _dual_norm(lam_all[:, i], evaluator.diamond))
    if evaluator.p == n:
        diag = np.diag(evaluator.Q)
        usable = np.nonzero(np.abs(diag) > 0)[0]
        if usable.size:
            scaled = evaluator.Q.T[:, usable] / diag[usable]
            resid_id = -scaled
            resid_id[usable, np.arange(usable.size)] += 1.0
            a_id = evaluator.s * np.max(np.abs(resid_id), axis=0)
            for k, i in enumerate(usable):
                evaluator.add_certificate(int(i), float(a_id[k]),
                                          1.0 / abs(float(diag[i])))


def bracket_init(query: GoodnessQuery,
                 verification: VerificationResult | None = None,
                 evaluator: FsEvaluator | None = None,
                 opts: SolverOptions | None = None) -> tuple[float, float]:
    """Certified bracket (eta_low, eta_high) around eta*.

    eta_low = 1/(s * min_i ||Q e_i||_diamond) satisfies f_s(eta_low) >=
    s*eta_low > eta_low. eta_high comes from the converted verification
    duals: with a = max_i a_i < 1 and b = max_i b_i, every fixed point obeys
    eta* <= b/(1 - a). Degenerate certificates fall back to a capped bracket
    with a warning.
    """
    verification = _verification_for(query, verification, opts)
    if evaluator is None:
        evaluator = FsEvaluator(build_q(query.matrix, query.q_kind),
                                query.s, query.diamond, opts)
    cols = _column_norms(evaluator.Q, query.diamond)
    if np.min(cols) <= 0.0:
        raise ValueError("Q has a zero column; the goodness measure is zero")
    eta_low = float(1.0 / (query.s * np.min(cols)))

    seed_certificates(evaluator, verification)
    eta_high = evaluator.eta_upper_bound()
    if not math.isfinite(eta_high) or eta_high > ETA_CAP:
        warnings.warn(
            "dual certificates do not give a finite upper bracket "
            "(s may be close to s*); capping eta_high",
            RuntimeWarning,
            stacklevel=2,
        )
        eta_high = ETA_CAP
    eta_high = max(eta_high, eta_low)
    return eta_low, eta_high


# -- fixed-point drivers -----------------------------------------------------


def _query_evaluator(query: GoodnessQuery, opts: SolverOptions | None) -> FsEvaluator:
    return FsEvaluator(build_q(query.matrix, query.q_kind),
                       query.s, query.diamond, opts)


def _result(evaluator: FsEvaluator, eta_star: float, trace: FixedPointTrace,
            tol: float, t0: float) -> GoodnessResult:
    return GoodnessResult(
        omega=1.0 / eta_star,
        eta_star=eta_star,
        trace=trace,
        dual_upper_bound=evaluator.eta_upper_bound(),
        tol=tol,
        subproblems_solved=evaluator.solve_count,
        elapsed_s=time.perf_counter() - t0,
    )


def fp_naive(query: GoodnessQuery, eta0: float | None = None,
             tol: float = DEFAULT_TOL, *,
             evaluator: FsEvaluator | None = None,
             opts: SolverOptions | None = None,
             max_iterations: int = MAX_FP_ITERATIONS) -> GoodnessResult:
    """Fixed-point iteration eta <- f_s(eta) from any positive start.

    Below eta* the iteration ascends through early-exit sweeps (the first
    index improving by more than eps_abs = 1e-6*eta supplies the next
    iterate); above eta* every step takes the full maximum. Terminates when
    no index improves past eps_abs or the relative change drops below tol.
    """
    t0 = time.perf_counter()
    if evaluator is None:
        evaluator = _query_evaluator(query, opts)
    if eta0 is None:
        cols = _column_norms(evaluator.Q, query.diamond)
        if np.min(cols) <= 0.0:
            raise ValueError("Q has a zero column; the goodness measure is zero")
        eta0 = float(1.0 / (query.s * np.min(cols)))
    if not eta0 > 0:
        raise ValueError("eta0 must be positive")

    trace = FixedPointTrace(algorithm="naive")
    eta = float(eta0)
    for _ in range(max_iterations):
        eps_abs = EARLY_EXIT_REL * eta
        value, idx, exceeded = evaluator.sweep_first_exceeding(eta, eps_abs)
        if exceeded:
            eta = value
            trace.iterates.append((eta, idx, evaluator.solve_count))
            continue
        # no index improves past the threshold; take the exact maximum (the
        # sweep's certificates make this cheap) to either terminate or, when
        # eta started above the fixed point, descend by eta <- f_s(eta)
        fs_value, arg, _ = evaluator.max_exact(eta)
        if abs(fs_value - eta) <= max(eps_abs, tol * eta):
            # a confirmation, not an update: the trace keeps only the
            # iterates eta <- f_s(eta) that moved
            trace.converged = True
            return _result(evaluator, fs_value, trace, tol, t0)
        eta = fs_value
        trace.iterates.append((eta, arg, evaluator.solve_count))
    return _result(evaluator, eta, trace, tol, t0)


def _brackets_from(query, bracket, verification, evaluator, opts):
    if bracket is None:
        return bracket_init(query, verification, evaluator, opts)
    return float(bracket[0]), float(bracket[1])


def fp_bisection(query: GoodnessQuery,
                 bracket: tuple[float, float] | None = None,
                 tol: float = DEFAULT_TOL, *,
                 evaluator: FsEvaluator | None = None,
                 verification: VerificationResult | None = None,
                 opts: SolverOptions | None = None,
                 max_iterations: int = MAX_FP_ITERATIONS) -> GoodnessResult:
    """Accelerated bisection on the sign of f_s(eta) - eta.

    Both bracket endpoints are replaced by function values rather than the
    midpoint itself: the first f_si above the midpoint raises the lower end,
    and a full sweep below it lowers the upper end to f_s(mid). The lower
    endpoint (always at most eta*) is returned once the width falls under
    tol times the lower endpoint.
    """
    t0 = time.perf_counter()
    if evaluator is None:
        evaluator = _query_evaluator(query, opts)
    lo, hi = _brackets_from(query, bracket, verification, evaluator, opts)

    # endpoint validation: f_s must cross the diagonal inside the bracket
    val, idx, exceeded = evaluator.max_exact(lo, stop_above=lo)
    if not exceeded and val <= lo:
        raise ValueError(
            f"invalid bracket: f_s(eta_low) = {val:g} <= eta_low = {lo:g}")
    lo = max(lo, val)
    if evaluator.eta_upper_bound() > hi:
        # not certified by cached duals; check the endpoint exactly
        hi_val, _, hi_exceeded = evaluator.max_exact(hi, lo_skip=lo,
                                                     stop_above=hi)
        if hi_exceeded:
            raise ValueError(
                f"invalid bracket: f_s(eta_high) exceeds eta_high = {hi:g}")
        hi = min(hi, max(hi_val, lo))

    trace = FixedPointTrace(algorithm="bisection", brackets=[(lo, hi)])
    for _ in range(max_iterations):
        if hi - lo <= tol * lo:
            trace.converged = True
            break
        mid = 0.5 * (lo + hi)
        value, idx, exceeded = evaluator.max_exact(mid, lo_skip=lo,
                                                   stop_above=mid)
        if exceeded:
            lo = max(lo, value)
        else:
            # value is the exact maximum of the solved indices; every skipped
            # index was certified at or below max(running best, lo), so the
            # true f_s(mid) is also bounded by max(value, lo) < mid
            hi = min(mid, max(value, lo))
        trace.iterates.append((lo, idx, evaluator.solve_count))
        trace.brackets.append((lo, hi))
    return _result(evaluator, lo, trace, tol, t0)


def _index_fixed_point(evaluator: FsEvaluator, i: int, lo: float, hi: float,
                       first_value: float, tol: float,
                       max_iterations: int) -> tuple[float, float]:
    """Bisection for the fixed point of a single f_si.

    Requires first_value = f_si(lo) > lo. Each solve's dual pair clamps the
    upper end through b/(1-a), which usually collapses the bracket in a few
    steps. Returns (lower, upper) with upper - lower <= tol * lower.
    """
    a = first_value
    b = min(hi, evaluator.index_fixed_upper(i))
    b = max(b, a)
    for _ in range(max_iterations):
        if b - a <= tol * a:
            break
        mid = 0.5 * (a + b)
        if evaluator.bound_at(i, mid) <= mid:
            b = min(b, evaluator.index_fixed_upper(i), mid)
            continue
        value, _ = evaluator.f_si_with_certificate(i, mid)
        if value > mid:
            a = value
        else:
            b = min(b, value)
        b = min(b, evaluator.index_fixed_upper(i))
        b = max(b, a)
    return a, b


def fp_hybrid(query: GoodnessQuery,
              bracket: tuple[float, float] | None = None,
              tol: float = DEFAULT_TOL, *,
              evaluator: FsEvaluator | None = None,
              verification: VerificationResult | None = None,
              opts: SolverOptions | None = None,
              max_iterations: int = MAX_FP_ITERATIONS) -> GoodnessResult:
    """Per-index fixed points by bisection, with pruning.

    Maintains an active index set. Each round solves one per-index fixed
    point, raises the global lower level to it, and prunes every remaining
    index whose f_si at that level does not exceed the level (certified
    bounds stand in for solves where they suffice). The next index examined
    is the one with the largest f_si at the last fixed point. The largest
    per-index fixed point is eta*.
    """
    t0 = time.perf_counter()
    if evaluator is None:
        evaluator = _query_evaluator(query, opts)
    lo, hi = _brackets_from(query, bracket, verification, evaluator, opts)

    trace = FixedPointTrace(algorithm="hybrid", brackets=[])
    n = evaluator.n
    best = lo
    converged = True

    # first index: scan in order of decreasing certified potential until one
    # value rises above the starting level
    ranking = np.argsort(
        [-evaluator.index_fixed_upper(i) for i in range(n)], kind="stable")
    active = [int(i) for i in ranking]
    pick = None
    first_value = None
    still = []
    for pos, i in enumerate(active):
        if evaluator.bound_at(i, best) <= best:
            evaluator.skip_count += 1
            continue
        value, _ = evaluator.f_si_with_certificate(i, best)
        if value > best:
            pick, first_value = i, value
            still = active[pos + 1:]
            break
    if pick is None:
        raise ValueError(
            f"invalid bracket: f_s(eta_low) <= eta_low = {best:g}")
    active = still

    while pick is not None:
        a, b = _index_fixed_point(evaluator, pick, best, hi, first_value,
                                  tol, max_iterations)
        converged = converged and (b - a <= tol * a)
        best = max(best, a)
        trace.iterates.append((best, pick, evaluator.solve_count))
        trace.brackets.append((a, b))
        # prune at the new level; survivors keep their exact value there
        values = {}
        for i in active:
            if evaluator.bound_at(i, best) <= best:
                evaluator.skip_count += 1
                continue
            value, _ = evaluator.f_si_with_certificate(i, best)
            if value > best:
                values[i] = value
        active = [i for i in active if i in values]
        pick = None
        if values:
            pick = max(values, key=lambda i: (values[i], -i))
            first_value = values[pick]
            active.remove(pick)

    trace.converged = converged
    return _result(evaluator, best, trace, tol, t0)


# -- public operations ---------------------------------------------------------


def eval_f_si(query: GoodnessQuery, eta: float, i: int,
              opts: SolverOptions | None = None) -> float:
    """max { z_i : ||Q z||_diamond <= 1, ||z||_1 <= s*eta }."""
    return _query_evaluator(query, opts).f_si(i, eta)


def eval_f_si_dual(query: GoodnessQuery, eta: float, i: int,
                   opts: SolverOptions | None = None) -> float:
    """Dual objective value; a certified upper bound on eval_f_si."""
    return _query_evaluator(query, opts).f_si_dual(i, eta)


def eval_f_s(query: GoodnessQuery, eta: float, mode: str = "full",
             threshold: float = 0.0,
             opts: SolverOptions | None = None) -> tuple[float, int]:
    """f_s(eta) and the attaining index.

    mode "full" computes the exact maximum; "early_exit" returns the first
    per-index value exceeding eta + threshold, falling back to the full
    maximum when no index exceeds it.
    """
    evaluator = _query_evaluator(query, opts)
    if mode == "full":
        return evaluator.f_s(eta)
    if mode != "early_exit":
        raise ValueError("mode must be 'full' or 'early_exit'")
    if not eta > 0:
        raise ValueError("eta must be positive")
    value, idx, exceeded = evaluator.sweep_first_exceeding(eta, threshold)
    if exceeded:
        return value, idx
    return evaluator.f_s(eta)


_ALGORITHMS = {
    "naive": "naive",
    "bisect": "bisection",
    "bisection": "bisection",
    "hybrid": "hybrid",
}


def compute_omega(query: GoodnessQuery, algorithm: str = "hybrid",
                  tol: float = DEFAULT_TOL,
                  opts: SolverOptions | None = None,
                  verification: VerificationResult | None = None) -> GoodnessResult:
    """omega_diamond(Q, s) = 1/eta* for s below the verification constant.

    Verifies s < s* first (raising NotVerifiableError otherwise, since the
    measure is not positive there), builds Q per q_kind, seeds dual
    certificates from the verification, and dispatches to the requested
    fixed-point driver with a certified bracket.
    """
    if algorithm not in _ALGORITHMS:
        raise ValueError(f"unknown algorithm {algorithm!r}")
    algorithm = _ALGORITHMS[algorithm]
    verification = _verification_for(query, verification, opts)
    evaluator = _query_evaluator(query, opts)
    bracket = bracket_init(query, verification, evaluator, opts)
    if algorithm == "naive":
        return fp_naive(query, bracket[0], tol, evaluator=evaluator, opts=opts)
    if algorithm == "bisection":
        return fp_bisection(query, bracket, tol, evaluator=evaluator, opts=opts)
    return fp_hybrid(query, bracket, tol, evaluator=evaluator, opts=opts)
