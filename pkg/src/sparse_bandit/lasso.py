"""Coordinate-descent Lasso for ``(1/n) ||y - X theta||^2 + lam ||theta||_1``.

There is no intercept and no standardisation. Differentiating the squared
loss gives the stationarity conditions

    (2/n) X_j^T (y - X theta) =  lam * sign(theta_j)   if theta_j != 0
   |(2/n) X_j^T (y - X theta)| <= lam                  if theta_j == 0

which :func:`kkt_residual` measures.
"""
from dataclasses import dataclass
import logging

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_is_fitted, check_X_y, check_array

from ._validation import check_int, check_positive

logger = logging.getLogger(__name__)

DEFAULT_SUPPORT_THRESHOLD = 1e-6


@dataclass(frozen=True)
class LassoFit:
    coefficients: np.ndarray
    lam: float
    kkt_residual: float
    iterations: int
    support: np.ndarray
    max_design_eigen: float
    converged: bool
    objective: float
    support_threshold: float = DEFAULT_SUPPORT_THRESHOLD


def lambda_schedule(n, d):
    """Regularisation ``4 sqrt(log(d) / n)`` used for both exploration fits."""
    n = check_int(n, "n")
    d = check_int(d, "d", minimum=2)
    return 4.0 * np.sqrt(np.log(d) / n)


def soft_threshold(x, t):
    return np.sign(x) * np.maximum(np.abs(x) - t, 0.0)


def objective(coefficients, X, y, lam):
    r = y - X @ coefficients
    return float(r @ r / X.shape[0] + lam * np.abs(coefficients).sum())


def _kkt_from_gradient(corr, theta, lam):
    """``corr`` is ``(2/n) X^T (y - X theta)``."""
    nz = theta != 0
    viol = np.where(nz, np.abs(corr - lam * np.sign(theta)), np.maximum(np.abs(corr) - lam, 0.0))
    return float(viol.max()) if viol.size else 0.0


def kkt_residual(coefficients, X, y, lam):
    """Largest violation of the Lasso stationarity conditions."""
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    theta = np.asarray(coefficients, dtype=np.float64)
    if X.shape[0] != y.shape[0] or X.shape[1] != theta.shape[0]:
        raise ValueError(f"shape mismatch: X {X.shape}, y {y.shape}, coefficients {theta.shape}")
    corr = 2.0 * X.T @ (y - X @ theta) / X.shape[0]
    return _kkt_from_gradient(corr, theta, lam)


def support(fit, threshold=DEFAULT_SUPPORT_THRESHOLD):
    """Ascending indices ``j`` with ``|theta_j| > threshold``.

    ``fit`` may be a :class:`LassoFit` or a plain coefficient vector.
    """
    threshold = check_positive(threshold, "threshold", strict=False)
    coef = fit.coefficients if isinstance(fit, LassoFit) else np.asarray(fit, dtype=np.float64)
    return np.flatnonzero(np.abs(coef) > threshold)


def fit_lasso(X, y, lam, tol=1e-7, max_iter=100_000, support_threshold=DEFAULT_SUPPORT_THRESHOLD,
              warm_start=None, debug=False):
    """Cyclic coordinate descent with active-set sweeps.

    A full sweep over every coordinate runs every tenth pass and whenever the
    active set looks converged. Stops when the largest coordinate move is
    below ``tol * (1 + max|theta|)`` on a full sweep and the KKT residual is
    at most ``tol``. If ``max_iter`` sweeps run out first the fit is returned
    with ``converged=False``.

    With ``debug=True`` the objective is checked to be non-increasing after
    every sweep.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64).ravel()
    if X.ndim != 2 or X.shape[0] != y.shape[0]:
        raise ValueError(f"X must be (n, d) with n = len(y); got {X.shape} and {y.shape}")
    n, d = X.shape
    check_int(n, "n")
    lam = check_positive(lam, "lam", strict=False)
    tol = check_positive(tol, "tol")
    max_iter = check_int(max_iter, "max_iter")

    gram = X.T @ X / n
    xty = X.T @ y / n
    diag = np.diag(gram).copy()
    half_lam = 0.5 * lam

    theta = np.zeros(d) if warm_start is None else np.array(warm_start, dtype=np.float64)
    g_theta = gram @ theta
    prev_obj = objective(theta, X, y, lam) if debug else None

    full_every = 10
    force_full = True
    converged = False
    kkt = np.inf
    sweeps = 0
    for sweeps in range(1, max_iter + 1):
        active = np.flatnonzero(theta)
        full = force_full or sweeps % full_every == 0 or active.size == 0
        coords = range(d) if full else active
        max_change = 0.0
        for j in coords:
            if diag[j] == 0.0:
                continue
            old = theta[j]
            rho = xty[j] - g_theta[j] + diag[j] * old
            if rho > half_lam:
                new = (rho - half_lam) / diag[j]
            elif rho < -half_lam:
                new = (rho + half_lam) / diag[j]
            else:
                new = 0.0
            delta = new - old
            if delta != 0.0:
                theta[j] = new
                g_theta += delta * gram[:, j]
                if abs(delta) > max_change:
                    max_change = abs(delta)

        if debug:
            obj = objective(theta, X, y, lam)
            assert obj <= prev_obj + 1e-12 * max(1.0, abs(prev_obj)), \
                f"objective increased from {prev_obj} to {obj} at sweep {sweeps}"
            prev_obj = obj

        small = max_change < tol * (1.0 + np.abs(theta).max(initial=0.0))
        if small and full:
            kkt = _kkt_from_gradient(2.0 * (xty - g_theta), theta, lam)
            if kkt <= tol:
                converged = True
                break
        force_full = small and not full

    if not converged:
        kkt = kkt_residual(theta, X, y, lam)
        converged = kkt <= tol
        if not converged:
            logger.warning("Lasso hit max_iter=%d with KKT residual %.3g", max_iter, kkt)

    phi_max = float(np.linalg.eigvalsh(gram)[-1]) if d else 0.0
    return LassoFit(
        coefficients=theta,
        lam=lam,
        kkt_residual=float(kkt),
        iterations=sweeps,
        support=support(theta, support_threshold),
        max_design_eigen=phi_max,
        converged=bool(converged),
        objective=objective(theta, X, y, lam),
        support_threshold=support_threshold,
    )


class SparseLasso(RegressorMixin, BaseEstimator):
    """Estimator interface to :func:`fit_lasso`.

    ``lam="theory"`` picks ``lambda_schedule(n_samples, n_features)`` at fit
    time.
    """

    def __init__(self, lam="theory", tol=1e-7, max_iter=100_000,
                 support_threshold=DEFAULT_SUPPORT_THRESHOLD):
        self.lam = lam
        self.tol = tol
        self.max_iter = max_iter
        self.support_threshold = support_threshold

    def fit(self, X, y):
        X, y = check_X_y(X, y, dtype=np.float64, y_numeric=True)
        n, d = X.shape
        lam = lambda_schedule(n, max(d, 2)) if self.lam == "theory" else self.lam
        self.fit_ = fit_lasso(X, y, lam, tol=self.tol, max_iter=self.max_iter,
                              support_threshold=self.support_threshold)
        self.coef_ = self.fit_.coefficients
        self.lam_ = lam
        self.support_ = self.fit_.support
        self.n_iter_ = self.fit_.iterations
        self.kkt_residual_ = self.fit_.kkt_residual
        self.n_features_in_ = d
        return self

    def predict(self, X):
        check_is_fitted(self, "coef_")
        X = check_array(X, dtype=np.float64)
        return X @ self.coef_
