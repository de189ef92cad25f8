"""Built-in invariant suite over tiny instances, with fault injection.

Every check is small enough to run in well under a second, is named so a
failure points at the responsible subsystem, and is timed individually. The
fault-injection hook deliberately corrupts one input (currently the solver's
duality-gap tolerance) so callers can confirm the suite actually has teeth:
with the fault injected the duality-gap check must come out failed.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from . import bounds as bnd
from .conic import LinearProgram, SocpProgram, SolverOptions, solve_lp, solve_socp
from .ensembles import generate, sample_sparse_signal
from .omega import GoodnessQuery, compute_omega, eval_f_s, eval_f_si, eval_f_si_dual
from .recovery import RecoveryProblem, solve_bp
from .verify import compute_s_star, solve_index_dual_lp

FAULTS = ("gap-tolerance",)


@dataclass
class CheckResult:
    name: str
    passed: bool
    seconds: float
    message: str = ""

    def to_jsonable(self) -> dict:
        return {"name": self.name, "passed": self.passed,
                "seconds": self.seconds, "message": self.message}


@dataclass
class SelftestReport:
    checks: list = field(default_factory=list)
    injected_fault: str | None = None

    @property
    def all_passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def to_jsonable(self) -> dict:
        return {
            "all_passed": self.all_passed,
            "injected_fault": self.injected_fault,
            "checks": [c.to_jsonable() for c in self.checks],
        }


def _check_lp_duality_gap(opts: SolverOptions) -> str:
    rng = np.random.default_rng(7)
    n, m = 5, 12
    G = rng.standard_normal((m, n))
    h = G @ rng.standard_normal(n) + rng.uniform(0.5, 1.5, m)
    c = rng.standard_normal(n)
    sol = solve_lp(LinearProgram(c, G, h), opts)
    assert sol.ok, f"LP solve ended with status {sol.status}"
    dual_value = -float(h @ sol.duals)
    gap = abs(sol.value - dual_value)
    assert gap <= 1e-6 * max(1.0, abs(sol.value)), (
        f"duality gap {gap:.3g} exceeds 1e-6")
    station = float(np.max(np.abs(c + G.T @ sol.duals)))
    assert station <= 1e-6, f"dual stationarity residual {station:.3g}"
    return f"gap {gap:.2g}, stationarity {station:.2g}"


def _check_socp_kkt(opts: SolverOptions) -> str:
    rng = np.random.default_rng(11)
    n = 4
    c = rng.standard_normal(n)
    # box rows keep phase-I well posed; the ball constraint is the active one
    G = np.vstack([np.eye(n), -np.eye(n)])
    h = np.full(2 * n, 2.0)
    sp = SocpProgram(c=c, G=G, h=h, P=np.eye(n), d=np.zeros(n), g=None, r=0.5)
    sol = solve_socp(sp, opts)
    assert sol.ok, f"SOCP solve ended with status {sol.status}"
    x_true = -c / np.linalg.norm(c)
    err = float(np.max(np.abs(sol.x - x_true)))
    assert err <= 1e-5, f"minimizer off by {err:.3g}"
    lam_err = abs(sol.dual_quad - np.linalg.norm(c))
    assert lam_err <= 1e-4, f"ball multiplier off by {lam_err:.3g}"
    return f"x error {err:.2g}, multiplier error {lam_err:.2g}"


def _check_verification_constant(opts: SolverOptions) -> str:
    res = compute_s_star(np.array([[1.0, 1.0]]), opts)
    assert abs(res.s_star - 2.0) <= 1e-6, f"s*([1 1]) = {res.s_star}"
    square = compute_s_star(np.array([[2.0, 1.0], [0.5, 1.0]]), opts)
    assert math.isinf(square.s_star), "invertible matrix must verify trivially"
    return f"s*([1 1]) = {res.s_star:.8f}"


def _check_omega_identity(opts: SolverOptions) -> str:
    eye = np.eye(4)
    worst = 0.0
    for diamond in ("l2", "linf"):
        q = GoodnessQuery(matrix=eye, s=2.0, diamond=diamond)
        res = compute_omega(q, opts=opts)
        worst = max(worst, abs(res.omega - 1.0))
    assert worst <= 1e-6, f"identity measure off by {worst:.3g}"
    return f"max deviation {worst:.2g}"


def _tiny_query(opts: SolverOptions):
    matrix = generate("gaussian", 3, 6, seed=5)
    verification = compute_s_star(matrix, opts)
    query = GoodnessQuery(matrix=matrix, s=1.5, diamond="l2")
    return matrix, verification, query


def _check_cross_algorithm(opts: SolverOptions) -> str:
    tol = 1e-4
    _, verification, query = _tiny_query(opts)
    values = [compute_omega(query, algorithm=alg, tol=tol, opts=opts,
                            verification=verification).omega
              for alg in ("naive", "bisection", "hybrid")]
    spread = (max(values) - min(values)) / min(values)
    assert spread <= 2 * tol, f"algorithms disagree by {spread:.3g} relative"
    return f"relative spread {spread:.2g}"


def _check_fixed_point_residual(opts: SolverOptions) -> str:
    tol = 1e-4
    _, verification, query = _tiny_query(opts)
    res = compute_omega(query, tol=tol, opts=opts, verification=verification)
    value, _ = eval_f_s(query, res.eta_star, opts=opts)
    resid = abs(value - res.eta_star)
    assert resid <= tol * res.eta_star, f"fixed-point residual {resid:.3g}"
    return f"residual {resid:.2g} at eta* {res.eta_star:.6f}"


def _check_duality_certificates(opts: SolverOptions) -> str:
    matrix, verification, query = _tiny_query(opts)
    worst = 0.0
    arr = matrix.data
    for i in range(arr.shape[1]):
        dual, _, status = solve_index_dual_lp(verification.row_basis, i, opts)
        assert status == "optimal", f"dual LP {i} status {status}"
        worst = max(worst, abs(dual - verification.per_index[i]))
    eta = 1.2 / query.s
    for i in range(arr.shape[1]):
        gap = abs(eval_f_si(query, eta, i, opts=opts)
                  - eval_f_si_dual(query, eta, i, opts=opts))
        worst = max(worst, gap)
    assert worst <= 1e-5, f"primal/dual disagreement {worst:.3g}"
    return f"worst primal/dual gap {worst:.2g}"


def _check_chain_inequality(opts: SolverOptions) -> str:
    matrix, verification, query = _tiny_query(opts)
    om2 = compute_omega(query, opts=opts, verification=verification).omega
    q_inf = GoodnessQuery(matrix=matrix, s=query.s, diamond="linf", q_kind="AtA")
    om_inf = compute_omega(q_inf, opts=opts, verification=verification).omega
    slack = query.s * om_inf - om2 * om2
    assert slack >= -1e-6, f"chain inequality violated by {-slack:.3g}"
    return f"s*omega_inf - omega_2^2 = {slack:.4g}"


def _check_bound_soundness(opts: SolverOptions) -> str:
    matrix = generate("gaussian", 8, 12, seed=3)
    verification = compute_s_star(matrix, opts)
    k, eps = 1, 0.1
    assert verification.s_star > 2 * k, "test matrix failed verification"
    om = compute_omega(GoodnessQuery(matrix=matrix, s=2.0 * k, diamond="l2"),
                       opts=opts, verification=verification).omega
    bound = bnd.bound_bp_inf(om, eps)
    signal = sample_sparse_signal(12, k, seed=1)
    rng = np.random.default_rng(2)
    noise = rng.standard_normal(8)
    noise *= 0.99 * eps / np.linalg.norm(noise)
    y = matrix.data @ signal.values + noise
    rec = solve_bp(RecoveryProblem(matrix=matrix.data, y=y, level=eps), opts)
    assert rec.ok, f"recovery status {rec.status}"
    err = float(np.max(np.abs(rec.xhat - signal.values)))
    assert err <= bound + 1e-6, f"error {err:.3g} exceeds bound {bound:.3g}"
    return f"error {err:.3g} within bound {bound:.3g}"


def _check_exact_recovery(opts: SolverOptions) -> str:
    matrix = generate("gaussian", 8, 12, seed=3)
    verification = compute_s_star(matrix, opts)
    assert verification.k_star >= 1, "test matrix failed verification"
    worst = 0.0
    for trial in range(3):
        signal = sample_sparse_signal(12, 1, seed=100 + trial)
        y = matrix.data @ signal.values
        rec = solve_bp(RecoveryProblem(matrix=matrix.data, y=y, level=0.0), opts)
        assert rec.ok, f"recovery status {rec.status}"
        worst = max(worst, float(np.max(np.abs(rec.xhat - signal.values))))
    assert worst <= 1e-5, f"noise-free recovery error {worst:.3g}"
    return f"worst recovery error {worst:.2g}"


def _check_ric_identity(opts: SolverOptions) -> str:
    del opts
    est = bnd.ric_monte_carlo(np.eye(6), 2, trials=50, seed=0)
    assert est.delta_hat == 0.0, f"identity RIC estimate {est.delta_hat}"
    est2 = bnd.ric_monte_carlo(generate("gaussian", 4, 8, seed=9), 2,
                               trials=10**6, seed=0)
    assert est2.exhaustive, "small instance should enumerate exhaustively"
    assert 0.0 <= est2.delta_hat < 1.5, f"implausible RIC value {est2.delta_hat}"
    return f"identity 0, exhaustive 4x8 value {est2.delta_hat:.4f}"


CHECKS = [
    ("lp-duality-gap", _check_lp_duality_gap),
    ("socp-kkt", _check_socp_kkt),
    ("verification-constant", _check_verification_constant),
    ("omega-identity", _check_omega_identity),
    ("omega-cross-algorithm", _check_cross_algorithm),
    ("fixed-point-residual", _check_fixed_point_residual),
    ("duality-certificates", _check_duality_certificates),
    ("chain-inequality", _check_chain_inequality),
    ("bound-soundness", _check_bound_soundness),
    ("exact-recovery", _check_exact_recovery),
    ("ric-identity", _check_ric_identity),
]


def run_selftest(inject_fault: str | None = None, progress=None,
                 opts: SolverOptions | None = None) -> SelftestReport:
    """Run every named check; returns a report rather than raising.

    inject_fault="gap-tolerance" corrupts the duality-gap tolerance handed to
    the first check, which must then fail; anything else raises ValueError.
    """
    if inject_fault is not None and inject_fault not in FAULTS:
        raise ValueError(f"unknown fault {inject_fault!r}; known: {FAULTS}")
    opts = opts or SolverOptions()
    report = SelftestReport(injected_fault=inject_fault)
    for name, fn in CHECKS:
        check_opts = opts
        if inject_fault == "gap-tolerance" and name == "lp-duality-gap":
            check_opts = SolverOptions(feas_tol=opts.feas_tol, gap_tol=1e-2)
        t0 = time.perf_counter()
        try:
            message = fn(check_opts)
            passed = True
        except AssertionError as exc:
            message, passed = str(exc), False
        except Exception as exc:  # a crashed check is a failed check
            message, passed = f"{type(exc).__name__}: {exc}", False
        result = CheckResult(name, passed, time.perf_counter() - t0, message)
        report.checks.append(result)
        if progress is not None:
            flag = "ok" if passed else "FAIL"
            progress(f"{name:24s} {flag:4s} {result.seconds:7.3f}s  {message}")
    return report
