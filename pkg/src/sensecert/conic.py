"""Dense conic solvers: a primal-dual interior-point method for linear
programs and a log-barrier method for programs with one convex quadratic
constraint, both written directly against numpy.

The two drivers (`primal_dual_ineq`, `log_barrier`) operate on any object
with the small problem protocol below, which lets the structured
formulations in `structured.py` reuse the exact same iterations while
supplying much cheaper Newton-system solves:

    prob.nx          number of variables
    prob.m_rows      number of linear inequality rows
    prob.c           objective vector, shape (nx,)
    prob.residuals(x)     -> Gx - h, shape (m_rows,)
    prob.mul_G(dx)        -> G @ dx
    prob.mul_Gt(y)        -> G.T @ y
    prob.kkt_solve(d, rhs, quad_alpha, quad_vec, quad_gamma)
                          -> solve (G.T diag(d) G [+ quad terms] + reg I) dx = rhs
    prob.quad_val(x)      -> value of the quadratic constraint (or None)
    prob.grad_quad(x)     -> its gradient

Equality constraints never reach the drivers: `solve_lp` eliminates them
onto an orthonormal basis of their kernel first.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .ensembles import kernel_complement

OPTIMAL = "optimal"
MAX_ITERS = "max_iters"
INFEASIBLE = "infeasible"
NUMERICAL_FAILURE = "numerical_failure"


@dataclass(frozen=True)
class SolverOptions:
    feas_tol: float = 1e-8
    gap_tol: float = 1e-8
    max_iters: int = 200
    barrier_gap_tol: float = 1e-7   # target m_total / t for the SOCP barrier
    barrier_mu: float = 10.0        # t multiplier per centering round
    barrier_t0: float = 1.0         # first-round gap ~ number of constraints
    line_alpha: float = 0.01
    line_beta: float = 0.5
    newton_tol: float = 1e-9        # half squared Newton decrement
    max_newton: int = 50            # per centering round
    reg_base: float = 1e-12
    reg_escalations: int = 3


@dataclass(frozen=True)
class LinearProgram:
    """min c.x  s.t.  G x <= h,  A_eq x = b_eq (optional)."""

    c: np.ndarray
    G: np.ndarray
    h: np.ndarray
    A_eq: np.ndarray | None = None
    b_eq: np.ndarray | None = None

    def __post_init__(self):
        c = np.asarray(self.c, dtype=float).ravel()
        G = np.atleast_2d(np.asarray(self.G, dtype=float))
        h = np.asarray(self.h, dtype=float).ravel()
        if G.shape != (h.size, c.size):
            raise ValueError(f"G shape {G.shape} incompatible with c ({c.size}) / h ({h.size})")
        if h.size == 0:
            raise ValueError("need at least one inequality constraint")
        object.__setattr__(self, "c", c)
        object.__setattr__(self, "G", G)
        object.__setattr__(self, "h", h)
        if (self.A_eq is None) != (self.b_eq is None):
            raise ValueError("A_eq and b_eq must be given together")
        if self.A_eq is not None:
            A = np.atleast_2d(np.asarray(self.A_eq, dtype=float))
            b = np.asarray(self.b_eq, dtype=float).ravel()
            if A.shape != (b.size, c.size):
                raise ValueError("equality block shape mismatch")
            object.__setattr__(self, "A_eq", A)
            object.__setattr__(self, "b_eq", b)


@dataclass(frozen=True)
class SocpProgram:
    """min c.x  s.t.  0.5*||P x - d||^2 + g.x - r <= 0,  G x <= h.

    With the defaults d = 0, g = 0, r = 0.5 the quadratic row is
    0.5*(||P x||^2 - 1) <= 0, i.e. ||P x||_2 <= 1.
    """

    c: np.ndarray
    P: np.ndarray
    G: np.ndarray
    h: np.ndarray
    d: np.ndarray | None = None
    g: np.ndarray | None = None
    r: float = 0.5

    def __post_init__(self):
        c = np.asarray(self.c, dtype=float).ravel()
        P = np.atleast_2d(np.asarray(self.P, dtype=float))
        G = np.atleast_2d(np.asarray(self.G, dtype=float))
        h = np.asarray(self.h, dtype=float).ravel()
        if P.shape[1] != c.size or G.shape != (h.size, c.size):
            raise ValueError("inconsistent SOCP dimensions")
        object.__setattr__(self, "c", c)
        object.__setattr__(self, "P", P)
        object.__setattr__(self, "G", G)
        object.__setattr__(self, "h", h)
        if self.d is not None:
            object.__setattr__(self, "d", np.asarray(self.d, dtype=float).ravel())
        if self.g is not None:
            object.__setattr__(self, "g", np.asarray(self.g, dtype=float).ravel())


@dataclass
class ConicSolution:
    x: np.ndarray
    value: float
    duals: np.ndarray                 # multipliers of the inequality rows
    gap: float
    status: str
    iterations: int
    duals_eq: np.ndarray | None = None
    dual_quad: float | None = None    # multiplier of the quadratic row

    @property
    def ok(self) -> bool:
        return self.status == OPTIMAL


class _KktRegularizer:
    """Cholesky with additive regularization, escalating x10 on failure."""

    def __init__(self, opts: SolverOptions):
        self.base = opts.reg_base
        self.escalations = opts.reg_escalations

    def solve(self, H: np.ndarray, rhs: np.ndarray) -> np.ndarray:
        # regularize relative to the matrix scale; near convergence the
        # diagonal grows like 1/slack and an absolute shift would vanish
        # into roundoff long before the factorization starts failing
        scale = max(1.0, float(np.max(np.diagonal(H))))
        reg = self.base * scale
        eye = np.eye(H.shape[0])
        for _ in range(self.escalations + 1):
            try:
                cf = scipy.linalg.cho_factor(
                    H + reg * eye, lower=True, check_finite=False
                )
                return scipy.linalg.cho_solve(cf, rhs, check_finite=False)
            except (scipy.linalg.LinAlgError, np.linalg.LinAlgError):
                reg *= 10.0
        raise _NumericalFailure("Newton system not SPD after regularization")


class _NumericalFailure(RuntimeError):
    pass


def _solve_with_rank_one(reg, H, rhs, gamma, v):
    """Solve (H + gamma * v v^T) dz = rhs without forming the outer product.

    Deep centering steps have gamma ~ 1/q^2, and adding the outer product
    would swamp every other entry of H, so the factorization is done on H
    alone and the rank-one term enters through the Sherman-Morrison update.
    """
    sols = reg.solve(H, np.column_stack((rhs, v)))
    dz, hv = sols[:, 0], sols[:, 1]
    denom = 1.0 + gamma * float(v @ hv)
    return dz - hv * (gamma * float(v @ dz) / denom)


class DenseProblem:
    """Dense-matrix implementation of the driver problem protocol."""

    def __init__(self, c, G, h, quad=None, opts: SolverOptions | None = None):
        self.c = np.asarray(c, dtype=float).ravel()
        self.G = np.atleast_2d(np.asarray(G, dtype=float))
        self.h = np.asarray(h, dtype=float).ravel()
        self.nx = self.c.size
        self.m_rows = self.h.size
        self._reg = _KktRegularizer(opts or SolverOptions())
        if quad is None:
            self._P = self._d = self._g = None
            self._r = None
            self._PtP = None
        else:
            P, d, g, r = quad
            self._P = np.atleast_2d(np.asarray(P, dtype=float))
            self._d = np.zeros(self._P.shape[0]) if d is None else np.asarray(d, float).ravel()
            self._g = np.zeros(self.nx) if g is None else np.asarray(g, float).ravel()
            self._r = float(r)
            self._PtP = self._P.T @ self._P

    def residuals(self, x):
        return self.G @ x - self.h

    def mul_G(self, dx):
        return self.G @ dx

    def mul_Gt(self, y):
        return self.G.T @ y

    def quad_val(self, x):
        if self._P is None:
            return None
        resid = self._P @ x - self._d
        return 0.5 * float(resid @ resid) + float(self._g @ x) - self._r

    def grad_quad(self, x):
        return self._P.T @ (self._P @ x - self._d) + self._g

    def kkt_solve(self, d, rhs, quad_alpha=0.0, quad_vec=None, quad_gamma=0.0):
        H = self.G.T @ (d[:, None] * self.G)
        if quad_alpha:
            H += quad_alpha * self._PtP
        if quad_gamma and quad_vec is not None:
            return _solve_with_rank_one(self._reg, H, rhs, quad_gamma, quad_vec)
        return self._reg.solve(H, rhs)


def primal_dual_ineq(prob, x0, opts: SolverOptions, stop_predicate=None):
    """Primal-dual interior-point iteration for min c.x s.t. Gx <= h.

    Requires a strictly feasible x0. Returns (x, lam, gap, status, iters).
    """
    x = np.asarray(x0, dtype=float).copy()
    f = prob.residuals(x)
    if np.any(f >= 0):
        raise ValueError("starting point is not strictly feasible")
    lam = -1.0 / f
    mu = opts.barrier_mu
    status = MAX_ITERS
    it = 0
    gap = float(-(f @ lam))
    prev_gap = math.inf
    flat_count = 0
    for it in range(1, opts.max_iters + 1):
        gap = float(-(f @ lam))
        rdual = prob.c + prob.mul_Gt(lam)
        if gap <= opts.gap_tol and np.max(np.abs(rdual)) <= opts.feas_tol:
            status = OPTIMAL
            break
        if stop_predicate is not None and stop_predicate(x):
            status = OPTIMAL
            break
        # creep detection: near the optimum, steps can pass the decrease
        # test at alpha scales where it is vacuous (1 - line_alpha*alpha
        # rounds to 1) and the iteration freezes just above gap_tol. Only
        # the near-converged regime counts; slow phases farther out do
        # recover and must be left alone.
        if gap <= opts.gap_tol * 10 and gap >= 0.999 * prev_gap:
            flat_count += 1
        else:
            flat_count = 0
        prev_gap = gap
        if flat_count >= 5:
            status = OPTIMAL
            break
        t = mu * prob.m_rows / gap
        d = -lam / f
        w = 1.0 / (t * f)
        try:
            dx = prob.kkt_solve(d, -prob.c + prob.mul_Gt(w))
        except _NumericalFailure:
            status = NUMERICAL_FAILURE
            break
        gdx = prob.mul_G(dx)
        dlam = -lam - w + d * gdx

        neg = dlam < 0
        alpha = 1.0
        if np.any(neg):
            alpha = min(1.0, 0.99 * float(np.min(-lam[neg] / dlam[neg])))
        if alpha < 1e-14:
            # a multiplier sits on the boundary and blocks every step
            status = OPTIMAL if gap <= opts.gap_tol * 10 else NUMERICAL_FAILURE
            break
        # stay strictly primal feasible
        for _ in range(60):
            f_new = prob.residuals(x + alpha * dx)
            if np.all(f_new < 0):
                break
            alpha *= opts.line_beta
        else:
            status = NUMERICAL_FAILURE
            break
        # backtrack on the t-residual norm
        rc = -lam * f - 1.0 / t
        rnorm0 = math.hypot(float(np.linalg.norm(rdual)), float(np.linalg.norm(rc)))
        accepted = False
        for _ in range(60):
            x_new = x + alpha * dx
            lam_new = lam + alpha * dlam
            f_new = prob.residuals(x_new)
            if np.all(f_new < 0) and np.all(lam_new > 0):
                rd = prob.c + prob.mul_Gt(lam_new)
                rc = -lam_new * f_new - 1.0 / t
                rnorm = math.hypot(float(np.linalg.norm(rd)), float(np.linalg.norm(rc)))
                if rnorm <= (1.0 - opts.line_alpha * alpha) * rnorm0:
                    accepted = True
                    break
            alpha *= opts.line_beta
            if alpha < 1e-14:
                # the decrease test is vacuous at machine-scale steps;
                # treat this as a stall rather than spinning in place
                break
        if not accepted:
            # stalled; report what we have
            if gap <= opts.gap_tol * 10:
                status = OPTIMAL
            else:
                status = NUMERICAL_FAILURE
            break
        x, lam, f = x_new, lam_new, f_new
    gap = float(-(f @ lam))
    return x, lam, gap, status, it


def _barrier_value(prob, x, t):
    f = prob.residuals(x)
    if np.any(f >= 0):
        return np.inf
    val = t * float(prob.c @ x) - float(np.sum(np.log(-f)))
    q = prob.quad_val(x)
    if q is not None:
        if q >= 0:
            return np.inf
        val -= math.log(-q)
    return val


_SLACK_SHRINK = 0.1


def _slack_step_cap(prob, x, dx, f, q, gq):
    """Largest step along dx keeping every slack above a tenth of its value.

    Backtracking on the barrier value alone happily accepts steps that land
    orders of magnitude closer to the boundary than the analytic center sits;
    the Hessian is then dominated by one near-singular rank-one term and the
    Newton directions degrade.  Rationing the per-step slack reduction keeps
    iterates in the region where the centering system is well conditioned.
    """
    gdx = prob.mul_G(dx)
    shrinking = gdx > 0.0
    cap = np.inf
    if np.any(shrinking):
        cap = float(np.min((_SLACK_SHRINK - 1.0) * f[shrinking] / gdx[shrinking]))
    if q is not None:
        # q is quadratic along the ray, so the admissible step solves
        # q + b*alpha + h*alpha^2 <= _SLACK_SHRINK * q exactly
        b = float(gq @ dx)
        h = max(float(prob.quad_val(x + dx)) - q - b, 0.0)
        room = (_SLACK_SHRINK - 1.0) * q
        if h > 0.0:
            cap = min(cap, (-b + math.sqrt(b * b + 4.0 * h * room)) / (2.0 * h))
        elif b > 0.0:
            cap = min(cap, room / b)
    return cap


_CENTERED = "centered"
_STALLED = "stalled"


def log_barrier(prob, x0, opts: SolverOptions):
    """Log-barrier method; requires strictly feasible x0.

    Returns (x, lam_lin, lam_quad, gap, status, newton_steps). The barrier
    weight grows by barrier_mu per round; a round that fails to center
    restarts from the previous center and reaches the same weight through
    smaller intermediate jumps, which handles the corners of the central
    path where one multiplier changes quickly.
    """
    x = np.asarray(x0, dtype=float).copy()
    f = prob.residuals(x)
    q = prob.quad_val(x)
    if np.any(f >= 0) or (q is not None and q >= 0):
        raise ValueError("starting point is not strictly feasible")
    m_total = prob.m_rows + (1 if q is not None else 0)
    steps = 0
    budget = opts.max_iters * 10

    def center(x, t):
        nonlocal steps
        decrement = np.inf
        for _ in range(opts.max_newton):
            if steps >= budget:
                return x, MAX_ITERS
            f = prob.residuals(x)
            dvec = 1.0 / (-f)
            grad = t * prob.c + prob.mul_Gt(dvec)
            quad_alpha = quad_gamma = 0.0
            gq = None
            q = prob.quad_val(x)
            if q is not None:
                gq = prob.grad_quad(x)
                quad_alpha = 1.0 / (-q)
                quad_gamma = 1.0 / (q * q)
                grad = grad + gq * quad_alpha
            try:
                dx = prob.kkt_solve(dvec * dvec, -grad, quad_alpha, gq, quad_gamma)
            except _NumericalFailure:
                return x, NUMERICAL_FAILURE
            steps += 1
            decrement = float(-(grad @ dx))
            if decrement / 2.0 <= opts.newton_tol:
                return x, _CENTERED
            phi0 = _barrier_value(prob, x, t)
            gdx = float(grad @ dx)
            alpha = min(1.0, _slack_step_cap(prob, x, dx, f, q, gq))
            for _ in range(60):
                phi = _barrier_value(prob, x + alpha * dx, t)
                if phi <= phi0 + opts.line_alpha * alpha * gdx:
                    break
                alpha *= opts.line_beta
            else:
                return x, _STALLED
            x = x + alpha * dx
        if decrement / 2.0 <= 100.0 * opts.newton_tol:
            # fell one hair short of the decrement target; the iterate is
            # inside the quadratic zone and the gap estimate still holds
            return x, _CENTERED
        return x, _STALLED

    def ramp(x, t_lo, t_hi):
        # approach the center of t_hi through progressively finer jumps
        pieces = 2
        while pieces <= 16:
            factor = opts.barrier_mu ** (1.0 / pieces)
            xw, tw = x, t_lo
            while tw < t_hi * (1.0 - 1e-12):
                tw = min(tw * factor, t_hi)
                xw, res = center(xw, tw)
                if res == MAX_ITERS:
                    return xw, res
                if res != _CENTERED:
                    break
            else:
                return xw, _CENTERED
            pieces *= 2
        return x, NUMERICAL_FAILURE

    t = opts.barrier_t0
    x, res = center(x, t)
    while res == _CENTERED and m_total / t > opts.barrier_gap_tol:
        t_next = t * opts.barrier_mu
        x_next, res = center(x, t_next)
        if res == _STALLED:
            x_next, res = ramp(x, t, t_next)
        if res == _CENTERED:
            x, t = x_next, t_next
    if res == _CENTERED:
        status = OPTIMAL
    elif res == _STALLED:
        status = NUMERICAL_FAILURE
    else:
        status = res
    f = prob.residuals(x)
    lam_lin = 1.0 / (t * (-f))
    q = prob.quad_val(x)
    lam_quad = None if q is None else 1.0 / (t * (-q))
    return x, lam_lin, lam_quad, m_total / t, status, steps


def _phase1(G, h, opts: SolverOptions):
    """Find a strictly feasible point of Gx <= h, or detect infeasibility.

    Minimizes the max infeasibility s (bounded below by -1); infeasible when
    the optimum exceeds 1e-9.
    """
    m, nx = G.shape
    Gp = np.hstack([G, -np.ones((m, 1))])
    Gp = np.vstack([Gp, np.append(np.zeros(nx), -1.0)])
    hp = np.append(h, 1.0)
    c = np.append(np.zeros(nx), 1.0)
    s0 = max(float(np.max(-h)) + 1.0, -0.5)
    x0 = np.append(np.zeros(nx), s0)
    prob = DenseProblem(c, Gp, hp, opts=opts)
    xs, _, _, status, _ = primal_dual_ineq(
        prob, x0, opts, stop_predicate=lambda z: z[-1] < -1e-6
    )
    s_opt = xs[-1]
    if status not in (OPTIMAL, MAX_ITERS):
        return None, NUMERICAL_FAILURE
    if s_opt > 1e-9:
        return None, INFEASIBLE
    return xs[:nx], OPTIMAL


def solve_lp(lp: LinearProgram, opts: SolverOptions | None = None, x0=None) -> ConicSolution:
    """Solve a LinearProgram. Equality rows are eliminated onto an
    orthonormal kernel-complement basis; a phase-I search supplies a strictly
    feasible start when none is given."""
    opts = opts or SolverOptions()
    c, G, h = lp.c, lp.G, lp.h

    if lp.A_eq is not None:
        A, b = lp.A_eq, lp.b_eq
        x_part, *_ = np.linalg.lstsq(A, b, rcond=None)
        scale = max(1.0, float(np.max(np.abs(b))) if b.size else 1.0)
        if np.max(np.abs(A @ x_part - b)) > 1e-8 * scale:
            return ConicSolution(x_part, np.nan, np.zeros(h.size), np.inf, INFEASIBLE, 0)
        N = kernel_complement(A).kernel_basis
        if N.shape[1] == 0:
            # equalities pin the point; only feasibility is left to check
            f = G @ x_part - h
            status = OPTIMAL if np.all(f <= opts.feas_tol) else INFEASIBLE
            lam = np.zeros(h.size)
            nu = np.linalg.lstsq(A.T, -(c + G.T @ lam), rcond=None)[0]
            return ConicSolution(
                x_part, float(c @ x_part), lam, 0.0, status, 0, duals_eq=nu
            )
        red = LinearProgram(N.T @ c, G @ N, h - G @ x_part)
        v0 = None
        if x0 is not None:
            v0 = N.T @ (np.asarray(x0, float) - x_part)
        sol = solve_lp(red, opts, x0=v0)
        x = x_part + N @ sol.x
        nu = np.linalg.lstsq(A.T, -(c + G.T @ sol.duals), rcond=None)[0]
        return ConicSolution(
            x, float(c @ x), sol.duals, sol.gap, sol.status, sol.iterations, duals_eq=nu
        )

    if x0 is None:
        x0, st = _phase1(G, h, opts)
        if x0 is None:
            return ConicSolution(np.zeros(c.size), np.nan, np.zeros(h.size), np.inf, st, 0)
    else:
        x0 = np.asarray(x0, dtype=float)
        if np.any(G @ x0 - h >= 0):
            raise ValueError("provided x0 is not strictly feasible")

    prob = DenseProblem(c, G, h, opts=opts)
    x, lam, gap, status, iters = primal_dual_ineq(prob, x0, opts)
    return ConicSolution(x, float(c @ x), lam, gap, status, iters)


def solve_socp(sp: SocpProgram, opts: SolverOptions | None = None, x0=None) -> ConicSolution:
    """Solve a SocpProgram by the log-barrier method.

    Needs a strictly feasible x0; when omitted, phase-I runs on the linear
    rows and the quadratic row is checked at the point found.
    """
    opts = opts or SolverOptions()
    quad = (sp.P, sp.d, sp.g, sp.r)
    prob = DenseProblem(sp.c, sp.G, sp.h, quad=quad, opts=opts)
    if x0 is None:
        x0, st = _phase1(sp.G, sp.h, opts)
        if x0 is None:
            return ConicSolution(np.zeros(sp.c.size), np.nan, np.zeros(sp.h.size), np.inf, st, 0)
        if prob.quad_val(x0) >= 0:
            return ConicSolution(x0, np.nan, np.zeros(sp.h.size), np.inf, INFEASIBLE, 0)
    else:
        x0 = np.asarray(x0, dtype=float)
    x, lam, lam_quad, gap, status, steps = log_barrier(prob, x0, opts)
    return ConicSolution(
        x, float(sp.c @ x), lam, gap, status, steps, dual_quad=lam_quad
    )
