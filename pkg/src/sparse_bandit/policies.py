"""Bandit policies: explore-then-commit with Lasso, restricted phased elimination,
phased elimination and LinUCB.

Every ``run_*`` function plays against a :class:`SparseInstance` and returns a
:class:`RegretTrajectory`. The estimator classes at the bottom wrap them with
``get_params``/``set_params`` so the experiment harness can build them from
configuration dictionaries.
"""
from dataclasses import dataclass, field
import logging
import math

import numpy as np
from sklearn.base import BaseEstimator

from ._validation import check_int, check_positive, check_probability
from .core import (ActionSet, ContextSequence, ContextualRunner, EnvironmentRunner,
                   as_generator)
from .design import DesignDistribution, _g_optimal_weights, covariance, solve_e_optimal
from .lasso import fit_lasso, lambda_schedule

logger = logging.getLogger(__name__)


# --- configuration ----------------------------------------------------------

def exploration_length(n, d, s, r_max, c_min):
    """``ceil(n^(2/3) (s^2 log 2d)^(1/3) r_max^(-2/3) (2 / c_min^2)^(1/3))`` clamped to ``[1, n]``."""
    n = check_int(n, "n")
    d = check_int(d, "d", minimum=2)
    for name, v in (("s", s), ("r_max", r_max), ("c_min", c_min)):
        check_positive(v, name)
    value = (n ** (2 / 3) * (s**2 * math.log(2 * d)) ** (1 / 3)
             * r_max ** (-2 / 3) * (2.0 / c_min**2) ** (1 / 3))
    return int(min(max(math.ceil(value), 1), n))


def screening_length(n, d, s, min_signal, c_min, c1=1.0):
    """``ceil(c1 s log(d) / (m^2 c_min))`` clamped to ``[1, n]``."""
    n = check_int(n, "n")
    d = check_int(d, "d", minimum=2)
    value = c1 * s * math.log(d) / (min_signal**2 * c_min)
    return int(min(max(math.ceil(value), 1), n))


@dataclass(frozen=True)
class EstcConfig:
    """``sparsity=None`` means unknown: the exploration length becomes ``ceil(n^(2/3))``."""

    horizon: int
    sparsity: int | None = None
    r_max: float = 1.0
    explicit_n1: int | None = None

    def __post_init__(self):
        check_int(self.horizon, "horizon")
        if self.sparsity is not None:
            check_int(self.sparsity, "sparsity")
        check_positive(self.r_max, "r_max")
        if self.explicit_n1 is not None:
            check_int(self.explicit_n1, "explicit_n1")
            if self.explicit_n1 > self.horizon:
                raise ValueError("explicit_n1 cannot exceed the horizon")

    def resolve(self, d, c_min):
        if self.explicit_n1 is not None:
            return self.explicit_n1
        if self.sparsity is None:
            return int(min(max(math.ceil(self.horizon ** (2 / 3)), 1), self.horizon))
        return exploration_length(self.horizon, max(d, 2), self.sparsity, self.r_max, c_min)


@dataclass(frozen=True)
class RpeConfig:
    horizon: int
    sparsity: int
    min_signal: float
    c1_constant: float = 1.0
    elimination_delta: float = 0.1

    def __post_init__(self):
        check_int(self.horizon, "horizon")
        check_int(self.sparsity, "sparsity")
        check_positive(self.min_signal, "min_signal")
        check_positive(self.c1_constant, "c1_constant")
        check_probability(self.elimination_delta, "elimination_delta")

    def resolve(self, d, c_min):
        return screening_length(self.horizon, max(d, 2), self.sparsity, self.min_signal,
                                c_min, self.c1_constant)


@dataclass
class PhaseState:
    """Bookkeeping for one phase of phased elimination."""

    phase_index: int
    live_actions: np.ndarray
    design: np.ndarray = field(repr=False)
    pulls: np.ndarray = field(repr=False)
    estimate: np.ndarray | None = field(default=None, repr=False)

    @property
    def accuracy(self):
        return 2.0 ** (-self.phase_index)


def _design_c_min(design, X):
    lam = np.linalg.eigvalsh(covariance(design, X))
    return float(lam[0])


def _context_c_min(contexts):
    """Minimum eigenvalue of the covariance of a uniformly chosen arm, pooled over rounds."""
    C = contexts.contexts
    sigma = np.einsum("tni,tnj->ij", C, C) / (C.shape[0] * C.shape[1])
    return float(np.linalg.eigvalsh(sigma)[0])


def _greedy(X, theta_hat):
    return int(np.argmax(X @ theta_hat))


# --- explore the sparsity then commit ----------------------------------------

def run_estc(actions, instance, config, design=None, rng=None, c_min=None, informative=()):
    """Explore from ``design`` for ``n1`` rounds, fit the Lasso, commit greedily.

    The committed arm maximises the estimated reward. ``actions`` may be a
    fixed :class:`ActionSet` or a :class:`ContextSequence`; in the contextual
    case each exploration round pulls a uniformly random arm and the greedy
    arm is recomputed every round from that round's features.

    ``c_min`` defaults to the minimum eigenvalue of the design covariance.
    """
    gen = as_generator(rng)
    n = config.horizon
    if isinstance(actions, ContextSequence):
        return _run_estc_contextual(actions, instance, config, gen, c_min)

    actions = actions if isinstance(actions, ActionSet) else ActionSet(actions)
    X = actions.matrix
    d = actions.dim
    if design is None:
        design, _ = solve_e_optimal(actions)
    if c_min is None:
        c_min = _design_c_min(design, X)
    n1 = config.resolve(d, c_min)
    runner = EnvironmentRunner(actions, instance, gen, n, informative)

    idx, rewards = runner.play(design.sample(n1, gen))
    lam = lambda_schedule(n1, max(d, 2))
    fit = fit_lasso(X[idx], rewards, lam)
    arm = _greedy(X, fit.coefficients)
    if runner.remaining:
        runner.play(np.full(runner.remaining, arm))

    traj = runner.trajectory
    traj.diagnostics.update(
        n_explore=n1, lam=lam, c_min=c_min, kkt_residual=fit.kkt_residual,
        lasso_converged=fit.converged, support_size=int(fit.support.size),
        committed_action=arm, r_max=config.r_max,
    )
    traj.diagnostics["fit"] = fit
    return traj


def _run_estc_contextual(contexts, instance, config, gen, c_min):
    n = config.horizon
    d = contexts.dim
    if c_min is None:
        c_min = _context_c_min(contexts.truncate(n))
    n1 = config.resolve(d, c_min)
    runner = ContextualRunner(contexts, instance, gen, n)
    arms, rewards = runner.play(gen.integers(contexts.n_arms, size=n1))
    X_explore = contexts.contexts[np.arange(n1), arms]
    lam = lambda_schedule(n1, max(d, 2))
    fit = fit_lasso(X_explore, rewards, lam)
    if runner.remaining:
        scores = contexts.contexts[n1:n] @ fit.coefficients
        runner.play(np.argmax(scores, axis=1))
    traj = runner.trajectory
    traj.diagnostics.update(
        n_explore=n1, lam=lam, c_min=c_min, kkt_residual=fit.kkt_residual,
        lasso_converged=fit.converged, support_size=int(fit.support.size),
        r_max=config.r_max,
    )
    traj.diagnostics["fit"] = fit
    return traj


# --- phased elimination ------------------------------------------------------

def _span_coordinates(Z, rtol=1e-10):
    """Rows of ``Z`` expressed in an orthonormal basis of their span."""
    if Z.size == 0:
        return Z.reshape(Z.shape[0], 0)
    _, sv, Vt = np.linalg.svd(Z, full_matrices=False)
    rank = int(np.sum(sv > rtol * max(sv[0], 1e-300)))
    return Z @ Vt[:rank].T


def _phased_elimination(runner, Z, arm_map, delta, noise_var, design_tol=1e-3, max_design_iter=5000):
    """Play phased elimination through ``runner`` until its horizon is used up.

    ``Z`` holds the feature vectors the algorithm sees (one row per candidate),
    ``arm_map[i]`` the original arm played for row ``i``. Each phase works in
    coordinates of the span of the live rows, so dependent coordinates never
    make the least-squares system singular.

    Returns the list of :class:`PhaseState` records and the rows still live
    when the horizon ran out.
    """
    K = Z.shape[0]
    live = np.arange(K)
    phases = []
    ell = 1
    while runner.remaining > 0:
        if live.size == 1:
            runner.play(np.full(runner.remaining, arm_map[live[0]]))
            break
        W = _span_coordinates(Z[live])
        r = W.shape[1]
        if r == 0:
            # every live arm has the same (zero) features: nothing left to learn
            runner.play(np.full(runner.remaining, arm_map[live[0]]))
            break
        eps = 2.0 ** (-ell)
        weights, _, _ = _g_optimal_weights(W, design_tol, max_design_iter)
        weights[weights < 1e-8 * weights.max()] = 0.0
        weights /= weights.sum()
        on = np.flatnonzero(weights)
        budget = 2.0 * r * weights[on] / eps**2 * math.log(K * ell * (ell + 1) / delta) * noise_var
        counts = np.maximum(np.ceil(budget), 1).astype(np.int64)

        pulled, rewards = runner.play(np.repeat(arm_map[live[on]], counts))
        rows = np.repeat(on, counts)[: pulled.size]
        Wp = W[rows]
        V = Wp.T @ Wp
        rhs = Wp.T @ rewards
        try:
            theta_hat = np.linalg.solve(V, rhs)
            singular = False
        except np.linalg.LinAlgError:
            theta_hat = np.linalg.pinv(V) @ rhs
            singular = True
        state = PhaseState(ell, live.copy(), weights, np.bincount(rows, minlength=live.size), theta_hat)
        phases.append(state)
        if singular:
            logger.info("phase %d: singular design matrix, used the pseudo-inverse", ell)
        if runner.remaining == 0:
            break
        est = W @ theta_hat
        live = live[est.max() - est <= 2.0 * eps]
        ell += 1
    return phases, live


def run_phased_elimination(actions, instance, horizon, delta=0.1, rng=None, informative=()):
    """Phased elimination with G-optimal designs on a finite action set."""
    gen = as_generator(rng)
    actions = actions if isinstance(actions, ActionSet) else ActionSet(actions)
    delta = check_probability(delta, "delta")
    runner = EnvironmentRunner(actions, instance, gen, horizon, informative)
    phases, live = _phased_elimination(runner, actions.matrix, np.arange(len(actions)), delta,
                                       max(instance.noise_std**2, 0.0))
    traj = runner.trajectory
    traj.diagnostics.update(n_phases=len(phases), surviving_actions=live.tolist())
    traj.diagnostics["phases"] = phases
    return traj


def run_restricted_pe(actions, instance, config, design=None, rng=None, c_min=None, informative=()):
    """Lasso screening on ``n2`` design rounds, then phased elimination on the selected coordinates.

    The support estimate keeps coordinates with ``|theta_hat_j| > min_signal / 2``;
    if none survive, the single largest coordinate is kept. Arms whose
    projections coincide are merged and represented by the lowest index,
    so only original arms are ever played.
    """
    if isinstance(actions, ContextSequence):
        raise TypeError("restricted phased elimination needs a fixed finite action set")
    gen = as_generator(rng)
    actions = actions if isinstance(actions, ActionSet) else ActionSet(actions)
    X = actions.matrix
    d = actions.dim
    if design is None:
        design, _ = solve_e_optimal(actions)
    if c_min is None:
        c_min = _design_c_min(design, X)
    n = config.horizon
    n2 = config.resolve(d, c_min)
    runner = EnvironmentRunner(actions, instance, gen, n, informative)

    idx, rewards = runner.play(design.sample(n2, gen))
    lam = lambda_schedule(n2, max(d, 2))
    fit = fit_lasso(X[idx], rewards, lam)
    selected = np.flatnonzero(np.abs(fit.coefficients) > config.min_signal / 2)
    fallback = selected.size == 0
    if fallback:
        selected = np.array([int(np.argmax(np.abs(fit.coefficients)))])

    phases, surviving = [], []
    if runner.remaining:
        projected = X[:, selected]
        unique_rows, first = np.unique(projected, axis=0, return_index=True)
        phases, live = _phased_elimination(runner, unique_rows, first, config.elimination_delta,
                                           instance.noise_std**2)
        surviving = first[live].tolist()

    traj = runner.trajectory
    traj.diagnostics.update(
        n_explore=n2, lam=lam, c_min=c_min, kkt_residual=fit.kkt_residual,
        lasso_converged=fit.converged, support=selected.tolist(),
        support_size=int(selected.size), support_fallback=fallback,
        max_design_eigen=fit.max_design_eigen, n_phases=len(phases),
        surviving_actions=surviving,
    )
    traj.diagnostics["fit"] = fit
    traj.diagnostics["phases"] = phases
    return traj


# --- LinUCB ------------------------------------------------------------------

def linucb_radius(t, d, regularization, param_bound, delta, noise_std=1.0, confidence_scale=1.0):
    """Confidence radius after ``t`` observations."""
    inner = 2.0 * math.log(1.0 / delta) + d * math.log(1.0 + t / (regularization * d))
    return confidence_scale * (math.sqrt(regularization) * param_bound + noise_std * math.sqrt(inner))


def run_linucb(actions, instance, horizon, regularization=1.0, confidence_scale=1.0, rng=None,
               delta=0.05, param_bound=None, informative=()):
    """Optimism over an ellipsoidal confidence set (ridge estimate plus bonus).

    ``param_bound`` defaults to ``||theta||_2`` of the instance.
    """
    gen = as_generator(rng)
    regularization = check_positive(regularization, "regularization")
    delta = check_probability(delta, "delta")
    if param_bound is None:
        param_bound = float(np.linalg.norm(instance.theta))
    sigma = instance.noise_std

    if isinstance(actions, ContextSequence):
        runner = ContextualRunner(actions, instance, gen, horizon)
        d = actions.dim
        Vinv = np.eye(d) / regularization
        b = np.zeros(d)
        for t in range(horizon):
            Xt = actions[t]
            theta_hat = Vinv @ b
            width = np.sqrt(np.maximum(np.einsum("ij,jk,ik->i", Xt, Vinv, Xt), 0.0))
            beta = linucb_radius(t, d, regularization, param_bound, delta, sigma, confidence_scale)
            arm = int(np.argmax(Xt @ theta_hat + beta * width))
            _, reward = runner.play([arm])
            x = Xt[arm]
            u = Vinv @ x
            Vinv -= np.outer(u, u) / (1.0 + x @ u)
            b += reward[0] * x
        return runner.trajectory

    actions = actions if isinstance(actions, ActionSet) else ActionSet(actions)
    X = actions.matrix
    d = actions.dim
    runner = EnvironmentRunner(actions, instance, gen, horizon, informative)
    Vinv = np.eye(d) / regularization
    b = np.zeros(d)
    width_sq = (X**2).sum(axis=1) / regularization
    noise = sigma * gen.standard_normal(horizon)
    means, gaps = runner.means, runner.gaps
    chosen = np.empty(horizon, dtype=np.int64)
    for t in range(horizon):
        theta_hat = Vinv @ b
        beta = linucb_radius(t, d, regularization, param_bound, delta, sigma, confidence_scale)
        arm = int(np.argmax(X @ theta_hat + beta * np.sqrt(np.maximum(width_sq, 0.0))))
        chosen[t] = arm
        x = X[arm]
        u = Vinv @ x
        denom = 1.0 + x @ u
        Vinv -= np.outer(u, u) / denom
        width_sq -= (X @ u) ** 2 / denom
        b += (means[arm] + noise[t]) * x
    runner.trajectory.record(chosen, means[chosen] + noise, gaps[chosen])
    return runner.trajectory


# --- estimator-style wrappers -------------------------------------------------

class ESTC(BaseEstimator):
    """Explore the sparsity, then commit.

    ``r_max=None`` uses ``max_x |<x, theta>|`` of the instance being played,
    which bounds the regret of any single round by ``2 r_max``.
    """

    def __init__(self, sparsity=None, r_max=None, n_explore=None):
        self.sparsity = sparsity
        self.r_max = r_max
        self.n_explore = n_explore

    def run(self, actions, instance, horizon, rng=None, design=None, c_min=None, informative=()):
        r_max = self.r_max
        if r_max is None:
            if isinstance(actions, ContextSequence):
                r_max = float(np.abs(actions.contexts[:horizon] @ instance.theta).max())
            else:
                r_max = instance.max_abs_reward(actions)
            r_max = max(r_max, 1e-12)
        config = EstcConfig(horizon, self.sparsity, r_max, self.n_explore)
        return run_estc(actions, instance, config, design, rng, c_min, informative)


class RestrictedPhaseElimination(BaseEstimator):
    def __init__(self, sparsity=None, min_signal=None, c1_constant=1.0, delta=0.1):
        self.sparsity = sparsity
        self.min_signal = min_signal
        self.c1_constant = c1_constant
        self.delta = delta

    def run(self, actions, instance, horizon, rng=None, design=None, c_min=None, informative=()):
        s = self.sparsity if self.sparsity is not None else instance.sparsity_bound
        if self.min_signal is None:
            raise ValueError("restricted phased elimination needs the minimum-signal level min_signal")
        config = RpeConfig(horizon, s, self.min_signal, self.c1_constant, self.delta)
        return run_restricted_pe(actions, instance, config, design, rng, c_min, informative)


class PhasedElimination(BaseEstimator):
    def __init__(self, delta=0.1):
        self.delta = delta

    def run(self, actions, instance, horizon, rng=None, design=None, c_min=None, informative=()):
        if isinstance(actions, ContextSequence):
            raise TypeError("phased elimination needs a fixed finite action set")
        return run_phased_elimination(actions, instance, horizon, self.delta, rng, informative)


class LinUCB(BaseEstimator):
    def __init__(self, regularization=1.0, confidence_scale=1.0, delta=0.05, param_bound=None):
        self.regularization = regularization
        self.confidence_scale = confidence_scale
        self.delta = delta
        self.param_bound = param_bound

    def run(self, actions, instance, horizon, rng=None, design=None, c_min=None, informative=()):
        return run_linucb(actions, instance, horizon, self.regularization, self.confidence_scale,
                          rng, self.delta, self.param_bound, informative)


POLICIES = {
    "estc": ESTC,
    "restricted_pe": RestrictedPhaseElimination,
    "phased_elimination": PhasedElimination,
    "linucb": LinUCB,
}
