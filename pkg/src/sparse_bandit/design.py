"""Exploration designs over a finite action set.

Two problems are solved here:

* E-optimal: maximise ``sigma_min(sum_i w_i x_i x_i^T)`` over the simplex.
  The value of this problem is the ``C_min`` constant that drives the
  explore-then-commit exploration length.
* G-optimal: minimise the largest leverage ``x^T V(w)^{-1} x``; by the
  Kiefer-Wolfowitz theorem the optimum equals the dimension.

Both solvers are Frank-Wolfe variants and return a certificate bounding the
distance to the optimum.
"""
from dataclasses import dataclass
import logging

import numpy as np
import scipy.linalg
from scipy.optimize import minimize_scalar
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from ._validation import check_action_matrix, check_int, check_positive
from .core import ActionSet, as_generator

logger = logging.getLogger(__name__)

_WEIGHT_ATOL = 1e-12


@dataclass(frozen=True)
class DesignDistribution:
    """Finitely supported distribution over the rows of an action set."""

    indices: np.ndarray
    weights: np.ndarray
    dim: int

    def __post_init__(self):
        idx = np.asarray(self.indices, dtype=np.int64).ravel()
        w = np.asarray(self.weights, dtype=np.float64).ravel()
        if idx.shape != w.shape:
            raise ValueError("indices and weights must have the same length")
        if idx.size == 0:
            raise ValueError("a design needs at least one atom")
        if np.any(idx < 0):
            raise ValueError("atom indices must be non-negative")
        if np.unique(idx).size != idx.size:
            raise ValueError("atom indices must be distinct")
        if np.any(w < 0):
            raise ValueError("design weights must be non-negative")
        if abs(w.sum() - 1.0) > _WEIGHT_ATOL:
            raise ValueError(f"design weights sum to {w.sum()!r}, not 1")
        order = np.argsort(idx)
        object.__setattr__(self, "indices", idx[order])
        object.__setattr__(self, "weights", w[order])
        object.__setattr__(self, "dim", check_int(self.dim, "dim"))

    @classmethod
    def from_weights(cls, weights, dim, atol=0.0):
        """Build from a dense weight vector, dropping atoms with weight <= ``atol``."""
        w = np.asarray(weights, dtype=np.float64)
        keep = np.flatnonzero(w > atol)
        kept = w[keep]
        return cls(keep, kept / kept.sum(), dim)

    @classmethod
    def uniform(cls, n_actions, dim, indices=None):
        idx = np.arange(n_actions) if indices is None else np.asarray(indices)
        return cls(idx, np.full(idx.size, 1.0 / idx.size), dim)

    @property
    def atoms(self):
        return list(zip(self.indices.tolist(), self.weights.tolist()))

    def dense(self, n_actions):
        if self.indices.max() >= n_actions:
            raise ValueError(f"design refers to action {self.indices.max()} of a {n_actions}-action set")
        w = np.zeros(n_actions)
        w[self.indices] = self.weights
        return w

    def sample(self, size, rng):
        """``size`` iid action indices drawn from the design."""
        gen = as_generator(rng)
        return self.indices[gen.choice(self.indices.size, size=size, p=self.weights)]

    def to_dict(self):
        return {"dim": self.dim, "atoms": [[i, w] for i, w in self.atoms]}

    @classmethod
    def from_dict(cls, doc):
        atoms = doc["atoms"]
        return cls([int(a[0]) for a in atoms], [float(a[1]) for a in atoms], int(doc["dim"]))


@dataclass(frozen=True)
class DesignCertificate:
    """Convergence evidence: objective value, duality gap and iteration count."""

    objective: float
    fw_gap: float
    iterations: int
    converged: bool = True

    def __post_init__(self):
        if self.fw_gap < 0:
            raise ValueError("fw_gap must be non-negative")

    def to_dict(self):
        return {"objective": self.objective, "fw_gap": self.fw_gap,
                "iterations": self.iterations, "converged": self.converged}


def _as_matrix(actions):
    if isinstance(actions, ActionSet):
        return actions.matrix
    return check_action_matrix(actions)


def covariance(design, actions):
    """``sum_i w_i x_i x_i^T`` over the atoms of ``design``."""
    X = _as_matrix(actions)
    if design.indices.max() >= X.shape[0]:
        raise ValueError("design atom index out of range for this action set")
    if design.dim != X.shape[1]:
        raise ValueError(f"design dimension {design.dim} does not match actions ({X.shape[1]})")
    Xs = X[design.indices]
    sigma = (Xs.T * design.weights) @ Xs
    return 0.5 * (sigma + sigma.T)


def min_eigen(matrix):
    """Smallest eigenvalue of a symmetric matrix and a unit eigenvector."""
    A = np.asarray(matrix, dtype=np.float64)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError("min_eigen expects a square matrix")
    scale = max(np.abs(A).max(), 1.0)
    if not np.allclose(A, A.T, rtol=0.0, atol=1e-12 * scale):
        raise ValueError("min_eigen expects a symmetric matrix")
    lam, U = np.linalg.eigh(0.5 * (A + A.T))
    v = U[:, 0]
    return float(lam[0]), v / np.linalg.norm(v)


def _check_spanning(X):
    rank = np.linalg.matrix_rank(X)
    if rank < X.shape[1]:
        raise ValueError(f"C_min = 0: the actions span a {rank}-dimensional subspace of R^{X.shape[1]}")


def _spanning_subset(X):
    """Indices of ``d`` linearly independent rows, chosen by pivoted QR."""
    _, _, piv = scipy.linalg.qr(X.T, pivoting=True, mode="economic")
    return np.sort(piv[: X.shape[1]])


def _softmin(lam, beta):
    """Smoothed minimum ``-log(sum exp(-beta lam)) / beta`` and its weights."""
    z = np.exp(-beta * (lam - lam[0]))
    total = z.sum()
    return lam[0] - np.log(total) / beta, z / total


def solve_e_optimal(actions, tol=1e-3, max_iter=5000):
    """Maximise the minimum eigenvalue of the design covariance.

    Runs pairwise Frank-Wolfe on the log-sum-exp smoothing of ``sigma_min``,
    doubling the smoothing sharpness whenever the smoothed problem is solved
    to the current resolution. Any density matrix ``P`` gives the upper bound
    ``C_min <= max_x x^T P x``; the returned ``fw_gap`` is the best such bound
    minus the achieved objective (the rank-one ``P = v v^T`` from a minimum
    eigenvector is always among the candidates).

    Returns ``(DesignDistribution, DesignCertificate)``.
    """
    X = _as_matrix(actions)
    tol = check_positive(tol, "tol")
    max_iter = check_int(max_iter, "max_iter", minimum=0)
    K, d = X.shape
    _check_spanning(X)

    w = np.zeros(K)
    w[_spanning_subset(X)] = 1.0 / d
    log_d = np.log(max(d, 2))
    scale = np.trace((X.T * w) @ X) / d
    beta = log_d / (0.1 * scale)
    beta_max = 20.0 * d / tol

    best_w, best_obj, best_upper = w.copy(), -np.inf, np.inf
    it = 0
    while True:
        sigma = (X.T * w) @ X
        lam, U = np.linalg.eigh(0.5 * (sigma + sigma.T))
        proj = X @ U
        _, p = _softmin(lam, beta)
        g = (proj ** 2) @ p
        upper = min(g.max(), (proj[:, 0] ** 2).max())
        best_upper = min(best_upper, upper)
        if lam[0] > best_obj:
            best_w, best_obj = w.copy(), lam[0]
        gap = best_upper - best_obj
        if gap <= tol or it >= max_iter:
            break
        it += 1

        j = int(np.argmax(g))
        support = np.flatnonzero(w > 0)
        a = int(support[np.argmin(g[support])])
        if g[j] - g[a] < 0.25 * min(gap, log_d / beta) and beta < beta_max:
            beta *= 2.0
            continue

        direction = np.outer(X[j], X[j]) - np.outer(X[a], X[a])
        step_max = w[a]

        def neg_smooth(step):
            return -_softmin(np.linalg.eigvalsh(sigma + step * direction), beta)[0]

        res = minimize_scalar(neg_smooth, bounds=(0.0, step_max), method="bounded",
                              options={"xatol": 1e-9 * max(step_max, 1e-12)})
        step = res.x
        if neg_smooth(step_max) <= res.fun:
            step = step_max
        if not np.isfinite(step) or step <= 0:
            step = min(step_max, 2.0 / (it + 2.0))
        w[j] += step
        w[a] -= step
        if w[a] <= 1e-15:
            w[a] = 0.0

    converged = bool(gap <= tol)
    if not converged:
        logger.warning("E-optimal design stopped after %d iterations with gap %.3g > tol %.3g",
                       it, gap, tol)
    design = DesignDistribution.from_weights(best_w, d)
    return design, DesignCertificate(float(best_obj), float(max(gap, 0.0)), it, converged)


def c_min(actions, tol=1e-3, max_iter=5000):
    """Best achievable minimum eigenvalue of the design covariance."""
    return solve_e_optimal(actions, tol=tol, max_iter=max_iter)[1].objective


def leverages(X, weights):
    """``x_i^T V(w)^{-1} x_i`` for every row of ``X``."""
    V = (X.T * weights) @ X
    factor = scipy.linalg.cho_factor(0.5 * (V + V.T), lower=True)
    return np.einsum("ij,ji->i", X, scipy.linalg.cho_solve(factor, X.T))


def _g_optimal_weights(X, tol, max_iter):
    """Fedorov-Wynn iterations with away steps on an unvalidated spanning matrix."""
    K, d = X.shape
    w = np.full(K, 1.0 / K)
    it = 0
    while True:
        g = leverages(X, w)
        j = int(np.argmax(g))
        if g[j] <= (1.0 + tol) * d or it >= max_iter:
            break
        it += 1
        support = np.flatnonzero(w > 0)
        a = int(support[np.argmin(g[support])])
        if g[j] - d >= d - g[a] or w[a] >= 1.0:
            # toward vertex j; exact maximiser of log det along the segment
            step = (g[j] / d - 1.0) / (g[j] - 1.0)
            w *= 1.0 - step
            w[j] += step
        else:
            # away from vertex a, clipped so the weight stays non-negative
            step = min((1.0 - g[a] / d) / (g[a] - 1.0) if g[a] > 1.0 else np.inf,
                       w[a] / (1.0 - w[a]))
            w *= 1.0 + step
            w[a] -= step
            if w[a] <= 1e-15:
                w[a] = 0.0
        w /= w.sum()
    return w, float(g.max()), it


def solve_g_optimal(actions, tol=1e-3, max_iter=5000):
    """Minimise the maximum leverage over the simplex (Fedorov-Wynn with away steps).

    Stops once ``max_x x^T V^{-1} x <= (1 + tol) d``. The certificate objective
    is that maximum leverage and ``fw_gap`` is its excess over ``d``.
    """
    X = _as_matrix(actions)
    tol = check_positive(tol, "tol")
    max_iter = check_int(max_iter, "max_iter", minimum=0)
    d = X.shape[1]
    _check_spanning(X)
    w, max_lev, it = _g_optimal_weights(X, tol, max_iter)
    converged = bool(max_lev <= (1.0 + tol) * d)
    if not converged:
        logger.warning("G-optimal design stopped after %d iterations with max leverage %.4g (d=%d)",
                       it, max_lev, d)
    design = DesignDistribution.from_weights(w, d)
    return design, DesignCertificate(max_lev, max(max_lev - d, 0.0), it, converged)


class EOptimalDesign(BaseEstimator):
    """Estimator wrapper around :func:`solve_e_optimal`.

    ``fit(X)`` takes the action matrix; fitted attributes are ``design_``,
    ``weights_``, ``covariance_``, ``c_min_`` and ``certificate_``.
    """

    def __init__(self, tol=1e-3, max_iter=5000):
        self.tol = tol
        self.max_iter = max_iter

    def fit(self, X, y=None):
        X = check_action_matrix(X)
        self.design_, self.certificate_ = solve_e_optimal(X, self.tol, self.max_iter)
        self.weights_ = self.design_.dense(X.shape[0])
        self.covariance_ = covariance(self.design_, X)
        self.c_min_ = self.certificate_.objective
        self.n_features_in_ = X.shape[1]
        return self

    def sample(self, size, rng=None):
        check_is_fitted(self, "design_")
        return self.design_.sample(size, rng)


class GOptimalDesign(BaseEstimator):
    """Estimator wrapper around :func:`solve_g_optimal`."""

    def __init__(self, tol=1e-3, max_iter=5000):
        self.tol = tol
        self.max_iter = max_iter

    def fit(self, X, y=None):
        X = check_action_matrix(X)
        self.design_, self.certificate_ = solve_g_optimal(X, self.tol, self.max_iter)
        self.weights_ = self.design_.dense(X.shape[0])
        self.information_ = covariance(self.design_, X)
        self.max_leverage_ = self.certificate_.objective
        self.n_features_in_ = X.shape[1]
        return self

    def leverage(self, X):
        """``x^T V^{-1} x`` for each row of ``X`` under the fitted design."""
        check_is_fitted(self, "design_")
        X = check_action_matrix(X)
        return np.einsum("ij,ji->i", X, np.linalg.solve(self.information_, X.T))
