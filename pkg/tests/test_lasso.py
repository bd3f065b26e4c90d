import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from amplab.amp import generate_instance, verify_lasso_kkt
from amplab.errors import MaxIterExceeded
from amplab.harness import ExperimentConfig, resolve
from amplab.lasso import _reduce_support, duality_gap, lasso_objective, lasso_path_mse, solve_lasso
from amplab.numerics import Tolerance
from amplab.scalar_risk import DiscretePrior


def instance(seed=0, N=400, delta=0.5, eps=0.05, mu=3.0, sigma=1.0, nonneg=False):
    prior = DiscretePrior.sparse(eps, mu, nonneg)
    return generate_instance(delta, 0.3, sigma, prior, N, seed)


def test_large_penalty_gives_zero():
    inst = instance()
    top = float(np.abs(inst.A.T @ inst.y).max())
    sol = solve_lasso(inst, top)
    assert not np.any(sol.x) and sol.support_size == 0
    assert sol.objective == pytest.approx(0.5 * float(inst.y @ inst.y))


def test_rejects_negative_penalty():
    with pytest.raises(ValueError):
        solve_lasso(instance(), -1.0)


@given(st.integers(0, 10_000), st.floats(0.05, 0.9), st.booleans())
@settings(max_examples=25)
def test_solution_certificates(seed, frac, nonneg):
    inst = instance(seed, N=200, nonneg=nonneg)
    top = float(np.abs(inst.A.T @ inst.y).max())
    lam = frac * top
    sol = solve_lasso(inst, lam, nonneg)
    assert sol.converged and sol.duality_gap >= 0
    assert sol.duality_gap <= 1e-9 * (1 + abs(sol.objective))
    assert sol.objective == lasso_objective(inst.A, inst.y, sol.x, lam)
    assert verify_lasso_kkt(inst, sol.x, lam, 1e-6 * (1 + lam), nonneg)
    if nonneg:
        assert np.all(sol.x >= 0)


def test_dual_bound_below_primal():
    inst = instance(3)
    x = np.random.default_rng(0).standard_normal(inst.N) * 0.1
    p, d, gap = duality_gap(inst.A, inst.y, x, 0.7)
    assert d <= p and gap == pytest.approx(p - d)


def test_debug_mode_checks_monotone_descent():
    inst = instance(4)
    a = solve_lasso(inst, 0.5, debug=True)
    b = solve_lasso(inst, 0.5)
    assert np.allclose(a.x, b.x, atol=1e-10)


def test_budget_exhaustion_carries_iterate():
    inst = instance(5, N=600, delta=0.25, eps=0.05)
    with pytest.raises(MaxIterExceeded) as info:
        solve_lasso(inst, 0.05, tol=Tolerance(1e-14, 1e-14, 3))
    last = info.value.last
    assert last is not None and not last.converged and last.duality_gap > 0
    assert info.value.residual == last.duality_gap


def test_warm_start_same_optimum():
    inst = instance(6)
    cold = solve_lasso(inst, 0.4)
    warm = solve_lasso(inst, 0.4, x_init=solve_lasso(inst, 0.8).x)
    assert np.allclose(cold.x, warm.x, atol=1e-6)


def test_zero_penalty_proxy_interpolates():
    inst = instance(7, sigma=0.0)
    sol = solve_lasso(inst, 0.0)
    top = float(np.abs(inst.A.T @ inst.y).max())
    assert sol.lambda_ == pytest.approx(1e-6 * top)
    assert np.linalg.norm(inst.y - inst.A @ sol.x) < 1e-3 * np.linalg.norm(inst.y)


def test_path_single_lambda_matches_solver():
    inst = instance(8)
    [(lam, mse)] = lasso_path_mse(inst, [0.6])
    sol = solve_lasso(inst, 0.6)
    assert lam == 0.6 and mse == pytest.approx(np.mean((sol.x - inst.x0) ** 2), abs=1e-9)


def test_path_order_and_large_penalty_limit():
    inst = instance(9)
    top = float(np.abs(inst.A.T @ inst.y).max())
    lams = [0.5, 2 * top, 1.0, 0.2]
    out = lasso_path_mse(inst, lams)
    assert [l for l, _ in out] == lams
    assert out[1][1] == pytest.approx(np.mean(inst.x0 ** 2))
    for lam, mse in out:
        sol = solve_lasso(inst, lam)
        assert mse == pytest.approx(np.mean((sol.x - inst.x0) ** 2), abs=1e-8)


def test_path_rejects_bad_lambdas():
    with pytest.raises(ValueError):
        lasso_path_mse(instance(), [])
    with pytest.raises(ValueError):
        lasso_path_mse(instance(), [0.5, 0.0])


@pytest.mark.parametrize("backend", ["python", "cython"])
def test_backends_agree(backend):
    from amplab._kernels import available_backends
    if backend not in available_backends():
        pytest.skip("compiled kernel not built")
    inst = instance(10)
    ref = solve_lasso(inst, 0.5, backend="python")
    sol = solve_lasso(inst, 0.5, backend=backend)
    assert np.allclose(sol.x, ref.x, atol=1e-7)


@pytest.mark.slow
def test_sign_information_does_not_hurt():
    R = 30
    plain, signed = [], []
    for s in range(R):
        inst = generate_instance(0.25, 0.2, 1.0, DiscretePrior.two_point_positive(0.04, 3.0), 600, 31, s)
        lam = 1.0
        plain.append(np.mean((solve_lasso(inst, lam).x - inst.x0) ** 2))
        signed.append(np.mean((solve_lasso(inst, lam, nonneg=True).x - inst.x0) ** 2))
    d = np.array(signed) - np.array(plain)
    se = d.std(ddof=1) / math.sqrt(R)
    assert d.mean() <= 3 * se


@given(st.integers(0, 10_000))
def test_support_reduction_keeps_fit_and_objective(seed):
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((6, 20))
    x = np.where(rng.random(20) < 0.6, rng.standard_normal(20), 0.0)
    x[:9] = rng.standard_normal(9)
    out = _reduce_support(A, x)
    assert out is not None
    assert np.count_nonzero(out) <= 6
    np.testing.assert_allclose(A @ out, A @ x, atol=1e-9)
    assert np.abs(out).sum() <= np.abs(x).sum() + 1e-9
    # no coordinate changes sign
    assert np.all(out * x >= 0)


def test_wide_support_stall_resolved():
    # a near-boundary draw whose coordinate-descent iterate carried more nonzeros than rows
    res = resolve(ExperimentConfig(delta=0.1, rho_fraction=0.95, N=500, R=1, seed=555))
    inst = generate_instance(res.delta, res.rho, res.sigma, res.prior, 500, 555, 384)
    sol = solve_lasso(inst, res.lambda_)
    assert sol.converged and sol.support_size <= inst.n
