"""The three estimators: feasibility, optimality conditions, exact recovery."""

import numpy as np
import pytest
from numpy.testing import assert_allclose

from sensecert import conic
from sensecert.ensembles import (
    NoiseSpec,
    gen_gaussian,
    gen_hadamard,
    sample_bounded_noise,
    sample_sparse_signal,
)
from sensecert.recovery import (
    RecoveryProblem,
    solve,
    solve_bp,
    solve_ds,
    solve_lasso,
    soft_threshold,
)


def _instance(m=8, n=20, k=2, seed=31):
    A = gen_gaussian(m, n, seed=seed)
    sig = sample_sparse_signal(n, k, seed=seed + 1)
    return A, sig


def test_problem_validation():
    A = np.eye(3)
    with pytest.raises(ValueError):
        RecoveryProblem(A, np.zeros(2), 0.1)
    with pytest.raises(ValueError):
        RecoveryProblem(A, np.zeros(3), -0.1)


def test_bp_noise_free_square_system():
    x = np.array([0.0, 2.0, -1.0])
    res = solve_bp(RecoveryProblem(np.eye(3), x, 0.0))
    assert res.ok
    assert_allclose(res.xhat, x, atol=1e-10)


def test_bp_noise_free_exact_recovery():
    A, sig = _instance()
    res = solve_bp(RecoveryProblem(A, A.data @ sig.values, 0.0))
    assert res.ok
    assert np.max(np.abs(res.xhat - sig.values)) < 1e-6
    assert res.objective == pytest.approx(np.sum(np.abs(sig.values)), abs=1e-6)


def test_bp_noisy_feasibility_and_objective():
    A, sig = _instance(seed=57)
    eps = 0.1
    w = sample_bounded_noise(NoiseSpec("bp", eps), A, seed=3)
    y = A.data @ sig.values + w
    res = solve_bp(RecoveryProblem(A, y, eps))
    assert res.ok
    assert res.residual <= eps * (1 + 1e-6)
    # the true signal is feasible, so the optimum cannot exceed its l1 norm
    assert res.objective <= np.sum(np.abs(sig.values)) + 1e-6


def test_bp_infeasible_noise_ball():
    # rank-1 matrix whose range misses y by more than eps
    A = np.array([[1.0, 1.0], [1.0, 1.0]]) / np.sqrt(2.0)
    res = solve_bp(RecoveryProblem(A, np.array([1.0, -1.0]), 0.1))
    assert res.status == conic.INFEASIBLE
    assert np.all(np.isnan(res.xhat))


def test_ds_noisy_feasibility_and_objective():
    A, sig = _instance(seed=73)
    mu = 0.1
    w = sample_bounded_noise(NoiseSpec("dantzig", mu), A, seed=5)
    y = A.data @ sig.values + w
    res = solve_ds(RecoveryProblem(A, y, mu))
    assert res.ok
    assert res.residual <= mu * (1 + 1e-6)
    assert res.objective <= np.sum(np.abs(sig.values)) + 1e-6


def test_ds_zero_mu_reduces_to_equality():
    A, sig = _instance(seed=91, k=1)
    res = solve_ds(RecoveryProblem(A, A.data @ sig.values, 0.0))
    assert res.ok
    assert np.max(np.abs(res.xhat - sig.values)) < 1e-6


def test_soft_threshold():
    v = np.array([3.0, -0.5, 0.2, -2.0])
    assert_allclose(soft_threshold(v, 1.0), [2.0, 0.0, 0.0, -1.0])


def test_lasso_orthonormal_closed_form():
    # for A with orthonormal columns the solution is exactly
    # soft_threshold(A^T y, mu), coordinate by coordinate
    A = gen_hadamard(8, 8, seed=2)
    rng = np.random.default_rng(12)
    y = rng.standard_normal(8)
    for mu in (0.05, 0.3):
        res = solve_lasso(RecoveryProblem(A, y, mu))
        assert res.ok
        assert_allclose(res.xhat, soft_threshold(A.data.T @ y, mu), atol=1e-8)


@pytest.mark.parametrize("seed", [101, 102, 103, 104, 105])
def test_lasso_kkt_conditions(seed):
    """First-order optimality of the composite objective.

    g = A^T(A xhat - y) must satisfy ||g||_inf <= mu, with g_i = -mu*sign(xhat_i)
    wherever xhat_i != 0.
    """
    A, sig = _instance(m=10, n=24, k=3, seed=seed)
    w = sample_bounded_noise(NoiseSpec("lasso", 0.2, kappa=0.5), A, seed=seed)
    y = A.data @ sig.values + w
    mu = 0.2
    res = solve_lasso(RecoveryProblem(A, y, mu))
    assert res.ok
    g = A.data.T @ (A.data @ res.xhat - y)
    assert np.max(np.abs(g)) <= mu + 1e-6
    on = np.abs(res.xhat) > 1e-7
    assert_allclose(g[on], -mu * np.sign(res.xhat[on]), atol=1e-5)
    # reported objective matches a direct evaluation
    direct = 0.5 * np.sum((A.data @ res.xhat - y) ** 2) + mu * np.sum(
        np.abs(res.xhat))
    assert res.objective == pytest.approx(direct, rel=1e-10)


def test_lasso_rejects_zero_mu():
    with pytest.raises(ValueError):
        solve_lasso(RecoveryProblem(np.eye(2), np.ones(2), 0.0))


def test_dispatch_by_name():
    A, sig = _instance(seed=121, k=1)
    y = A.data @ sig.values
    for name in ("bp", "ds", "dantzig"):
        res = solve(name, RecoveryProblem(A, y, 0.0))
        assert np.max(np.abs(res.xhat - sig.values)) < 1e-6
    with pytest.raises(ValueError):
        solve("omp", RecoveryProblem(A, y, 0.0))


def test_result_jsonable():
    res = solve_bp(RecoveryProblem(np.eye(2), np.array([1.0, 0.0]), 0.0))
    payload = res.to_jsonable()
    assert payload["status"] == "optimal"
    assert len(payload["xhat"]) == 2
