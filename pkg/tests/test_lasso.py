import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from sklearn.base import clone
from sklearn.linear_model import Lasso

from oracles import lasso_active_set, lasso_grid_search
from sparse_bandit.lasso import (SparseLasso, fit_lasso, kkt_residual, lambda_schedule, objective,
                                 soft_threshold, support)


def test_lambda_schedule_value():
    # 4 * sqrt(log(100) / 400) = 4 * 0.1072983 = 0.4291932
    assert lambda_schedule(400, 100) == pytest.approx(0.4291932, abs=1e-6)
    with pytest.raises(ValueError):
        lambda_schedule(0, 10)


def test_soft_threshold():
    assert np.allclose(soft_threshold(np.array([-2.0, -0.5, 0.0, 0.5, 2.0]), 1.0),
                       [-1.0, 0.0, 0.0, 0.0, 1.0])


@pytest.mark.parametrize("seed", range(10))
def test_matches_active_set_enumeration(seed):
    rng = np.random.default_rng(seed)
    d = rng.integers(1, 4)
    n = rng.integers(d + 2, 21)
    X = rng.uniform(-1, 1, size=(n, d))
    y = X @ rng.normal(size=d) + 0.3 * rng.normal(size=n)
    lam = rng.uniform(0.01, 1.0)
    fit = fit_lasso(X, y, lam)
    assert fit.converged and fit.kkt_residual <= 1e-7
    assert np.allclose(fit.coefficients, lasso_active_set(X, y, lam), atol=1e-6)


@pytest.mark.parametrize("seed", range(5))
def test_matches_grid_search(seed):
    rng = np.random.default_rng(50 + seed)
    X = rng.uniform(-1, 1, size=(15, 3))
    y = X @ np.array([1.0, 0.0, -0.5]) + 0.2 * rng.normal(size=15)
    lam = 0.2
    fit = fit_lasso(X, y, lam)
    assert np.max(np.abs(fit.coefficients - lasso_grid_search(X, y, lam))) <= 5e-3


def test_agrees_with_sklearn_after_rescaling():
    # sklearn minimises (1/2n)||y - Xw||^2 + alpha ||w||_1, i.e. alpha = lam / 2
    rng = np.random.default_rng(3)
    X = rng.choice((-1.0, 1.0), size=(80, 30))
    theta = np.zeros(30)
    theta[:3] = [1.0, -1.0, 0.5]
    y = X @ theta + 0.5 * rng.normal(size=80)
    lam = 0.3
    ours = fit_lasso(X, y, lam, tol=1e-10).coefficients
    ref = Lasso(alpha=lam / 2, fit_intercept=False, tol=1e-12, max_iter=100000).fit(X, y).coef_
    assert np.allclose(ours, ref, atol=1e-6)


def test_zero_solution_above_lambda_max():
    rng = np.random.default_rng(0)
    X = rng.normal(size=(30, 5)) / 3
    y = rng.normal(size=30)
    lam_max = np.abs(2 * X.T @ y / 30).max()
    fit = fit_lasso(X, y, lam_max * 1.01)
    assert np.all(fit.coefficients == 0.0) and fit.support.size == 0
    assert fit_lasso(X, y, lam_max * 0.9).support.size >= 1


def test_kkt_residual_detects_non_solutions():
    rng = np.random.default_rng(1)
    X = rng.normal(size=(40, 4))
    y = rng.normal(size=40)
    fit = fit_lasso(X, y, 0.1)
    assert kkt_residual(fit.coefficients, X, y, 0.1) <= 1e-7
    assert kkt_residual(fit.coefficients + 0.1, X, y, 0.1) > 1e-3
    with pytest.raises(ValueError):
        kkt_residual(np.zeros(3), X, y, 0.1)


def test_max_iter_exhaustion_is_flagged(caplog):
    rng = np.random.default_rng(2)
    X = rng.normal(size=(50, 40))
    y = rng.normal(size=50)
    fit = fit_lasso(X, y, 0.01, max_iter=2)
    assert not fit.converged and fit.iterations == 2
    assert "max_iter" in caplog.text


def test_debug_mode_checks_monotone_objective():
    rng = np.random.default_rng(4)
    X = rng.choice((-1.0, 1.0), size=(60, 100))
    y = X[:, :3] @ np.ones(3) + rng.normal(size=60)
    fit = fit_lasso(X, y, lambda_schedule(60, 100), debug=True)
    assert fit.converged
    assert fit.objective == pytest.approx(objective(fit.coefficients, X, y, fit.lam))


def test_warm_start_reaches_same_solution():
    rng = np.random.default_rng(5)
    X = rng.normal(size=(40, 10)) / 2
    y = X[:, 0] + 0.1 * rng.normal(size=40)
    cold = fit_lasso(X, y, 0.05)
    warm = fit_lasso(X, y, 0.05, warm_start=cold.coefficients + 0.3)
    assert np.allclose(cold.coefficients, warm.coefficients, atol=1e-6)


def test_support_threshold():
    coef = np.array([0.0, 1e-8, -0.3, 0.6])
    assert support(coef).tolist() == [2, 3]
    assert support(coef, threshold=0.5).tolist() == [3]


def test_max_design_eigen():
    X = np.eye(4) * 2 - 1  # rows are +-1 vectors
    fit = fit_lasso(X, np.ones(4), 0.1)
    assert fit.max_design_eigen == pytest.approx(np.linalg.eigvalsh(X.T @ X / 4)[-1])


def test_estimator_interface():
    rng = np.random.default_rng(6)
    X = rng.choice((-1.0, 1.0), size=(200, 50))
    theta = np.zeros(50)
    theta[[3, 7]] = [1.0, -1.0]
    y = X @ theta + 0.1 * rng.normal(size=200)
    est = SparseLasso()
    assert clone(est).get_params()["lam"] == "theory"
    est.fit(X, y)
    assert est.lam_ == pytest.approx(lambda_schedule(200, 50))
    assert set(est.support_) >= {3, 7}
    assert est.predict(X).shape == (200,)
    assert est.score(X, y) > 0.5


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**31), st.integers(1, 5), st.floats(0.01, 2.0))
def test_property_solution_satisfies_kkt(seed, d, lam):
    rng = np.random.default_rng(seed)
    X = rng.uniform(-1, 1, size=(d + 5, d))
    y = rng.normal(size=d + 5)
    fit = fit_lasso(X, y, lam)
    assert fit.converged
    assert kkt_residual(fit.coefficients, X, y, lam) <= 1e-7
    # the zero vector is never better
    assert fit.objective <= objective(np.zeros(d), X, y, lam) + 1e-12
