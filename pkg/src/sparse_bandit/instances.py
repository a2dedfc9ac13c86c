"""Problem generators, the lower-bound construction and regret-bound formulas.

The hard instance splits the arms into a sparse low-regret family ``S``
(signed vectors with ``s - 1`` nonzeros among the first ``d - 1``
coordinates, last coordinate 0) and an informative family ``H``
(``{-kappa, kappa}^{d-1} x {1}``). With
``theta = (eps, ..., eps, 0, ..., 0, -1)`` every arm of ``H`` costs at least
1 in regret but together they make the design well conditioned.
"""
from dataclasses import dataclass
import itertools
import math

import numpy as np

from ._validation import check_int, check_positive
from .core import ActionSet, ContextSequence, SparseInstance, as_generator

DEFAULT_ACTION_CAP = 10**6
DEFAULT_CANDIDATE_CAP = 10**5


def data_poor_epsilon(kappa, s, n):
    """``kappa^(-2/3) s^(-2/3) n^(-1/3)``, the signal size of the data-poor construction."""
    return kappa ** (-2 / 3) * s ** (-2 / 3) * n ** (-1 / 3)


@dataclass(frozen=True)
class HardInstanceSpec:
    d: int
    s: int
    kappa: float = 1.0
    epsilon: float | None = None
    horizon: int | None = None
    n_informative: int = 500
    n_uninformative: int = 200
    noise_std: float = 1.0

    def __post_init__(self):
        d = check_int(self.d, "d", minimum=3)
        s = check_int(self.s, "s", minimum=2)
        if s > d - 1:
            raise ValueError(f"need 2 <= s <= d - 1, got s={s}, d={d}")
        kappa = check_positive(self.kappa, "kappa")
        if kappa > 1:
            raise ValueError(f"kappa must lie in (0, 1], got {kappa}")
        if self.epsilon is None and self.horizon is None:
            raise ValueError("give either epsilon or the horizon used to tune it")
        if self.epsilon is not None:
            check_positive(self.epsilon, "epsilon")
        if self.horizon is not None:
            check_int(self.horizon, "horizon")
        check_int(self.n_informative, "n_informative")
        check_int(self.n_uninformative, "n_uninformative")
        check_positive(self.noise_std, "noise_std", strict=False)

    @property
    def eps(self):
        if self.epsilon is not None:
            return float(self.epsilon)
        return data_poor_epsilon(self.kappa, self.s, self.horizon)

    @property
    def n_low_regret_total(self):
        return math.comb(self.d - 1, self.s - 1) * 2 ** (self.s - 1)

    @property
    def n_informative_total(self):
        return 2 ** (self.d - 1)

    def theta(self):
        theta = np.zeros(self.d)
        theta[: self.s - 1] = self.eps
        theta[-1] = -1.0
        return theta

    def optimal_arm(self):
        x = np.zeros(self.d)
        x[: self.s - 1] = 1.0
        return x

    def instance(self):
        return SparseInstance(self.theta(), self.s, self.noise_std)


@dataclass(frozen=True)
class ContextualSpec:
    num_arms: int = 20
    d: int = 100
    s: int = 5
    rho: float = 0.0
    horizon: int = 1000
    noise_std: float = 1.0

    def __post_init__(self):
        check_int(self.num_arms, "num_arms", minimum=2)
        check_int(self.d, "d")
        check_int(self.s, "s")
        if self.s > self.d:
            raise ValueError("s cannot exceed d")
        if not 0.0 <= self.rho < 1.0:
            raise ValueError(f"rho must lie in [0, 1), got {self.rho}")
        check_int(self.horizon, "horizon")


def _sign_patterns(k):
    return np.array(list(itertools.product((-1.0, 1.0), repeat=k))).reshape(-1, k)


def _sparse_signed(coords, k, d):
    """All vectors with ``k`` signed unit entries placed among ``coords``."""
    signs = _sign_patterns(k)
    rows = []
    for combo in itertools.combinations(coords, k):
        block = np.zeros((signs.shape[0], d))
        block[:, list(combo)] = signs
        rows.append(block)
    return np.vstack(rows) if rows else np.zeros((0, d))


def low_regret_arms(spec):
    return _sparse_signed(range(spec.d - 1), spec.s - 1, spec.d)


def informative_arms(spec):
    H = spec.kappa * _sign_patterns(spec.d - 1)
    return np.hstack([H, np.ones((H.shape[0], 1))])


def is_low_regret_arm(x, spec):
    x = np.asarray(x)
    body = x[:-1]
    return (x[-1] == 0 and np.all(np.isin(body, (-1.0, 0.0, 1.0)))
            and np.count_nonzero(body) == spec.s - 1)


def is_informative_arm(x, spec):
    x = np.asarray(x)
    return x[-1] == 1 and np.all(np.isin(x[:-1], (-spec.kappa, spec.kappa)))


def hard_instance(spec, cap=DEFAULT_ACTION_CAP):
    """Full enumeration of ``S`` followed by ``H``.

    Returns ``(ActionSet, SparseInstance, informative_mask)``.
    """
    total = spec.n_low_regret_total + spec.n_informative_total
    if total > cap:
        raise ValueError(f"the full hard instance has {total} actions (cap {cap}); "
                         "use subsample_hard_instance instead")
    S = low_regret_arms(spec)
    H = informative_arms(spec)
    mask = np.r_[np.zeros(len(S), bool), np.ones(len(H), bool)]
    return ActionSet(np.vstack([S, H])), spec.instance(), mask


def _distinct_rows(draw, size, gen):
    """Collect ``size`` distinct rows from the batch sampler ``draw(gen, m)``."""
    seen = {}
    while len(seen) < size:
        batch = draw(gen, 2 * (size - len(seen)) + 8)
        for row in batch:
            key = row.tobytes()
            if key not in seen:
                seen[key] = row
                if len(seen) == size:
                    break
    return np.array(list(seen.values()))


def subsample_hard_instance(spec, rng, cap=DEFAULT_ACTION_CAP):
    """Uniform samples without replacement from ``H`` and ``S``.

    The optimal arm is always part of the ``S`` sample. The combined rows are
    returned in a random order so that index-based tie breaking cannot favour
    the optimum.
    """
    gen = as_generator(rng)
    d, s = spec.d, spec.s
    n_h, n_s = spec.n_informative, spec.n_uninformative
    if n_h > spec.n_informative_total:
        raise ValueError(f"asked for {n_h} informative arms but only {spec.n_informative_total} exist")
    if n_s > spec.n_low_regret_total:
        raise ValueError(f"asked for {n_s} low-regret arms but only {spec.n_low_regret_total} exist")

    if spec.n_informative_total <= cap:
        H_all = informative_arms(spec)
        H = H_all[np.sort(gen.choice(len(H_all), n_h, replace=False))]
    else:
        def draw_h(g, m):
            rows = spec.kappa * g.choice((-1.0, 1.0), size=(m, d))
            rows[:, -1] = 1.0
            return rows
        H = _distinct_rows(draw_h, n_h, gen)

    x_star = spec.optimal_arm()
    if spec.n_low_regret_total <= cap:
        S_all = low_regret_arms(spec)
        others = np.flatnonzero(np.any(S_all != x_star, axis=1))
        S = np.vstack([x_star, S_all[np.sort(gen.choice(others, n_s - 1, replace=False))]])
    else:
        def draw_s(g, m):
            rows = np.zeros((m, d))
            for r in range(m):
                idx = g.choice(d - 1, s - 1, replace=False)
                rows[r, idx] = g.choice((-1.0, 1.0), s - 1)
            return rows
        first = _distinct_rows(draw_s, n_s, gen)
        first = first[np.any(first != x_star, axis=1)][: n_s - 1]
        S = np.vstack([x_star, first])

    X = np.vstack([S, H])
    mask = np.r_[np.zeros(len(S), bool), np.ones(len(H), bool)]
    perm = gen.permutation(len(X))
    return ActionSet(X[perm]), spec.instance(), mask[perm]


# --- lower-bound alternative ---------------------------------------------

def _lexicographic_first(candidates, values, atol=1e-12):
    best = values.min()
    tied = candidates[values <= best + atol * max(1.0, abs(best))]
    order = np.lexsort(tied.T[::-1])
    return tied[order[0]]


def alternative_direction(spec, logged_actions=None, candidate_count=None, rng=None,
                          cap=DEFAULT_CANDIDATE_CAP):
    """The ``(s-1)``-sparse signed vector on coordinates ``s..d-1`` least explored so far.

    Minimises ``sum_t <A_t, x>^2`` over the logged actions. Candidates are
    enumerated when there are at most ``cap`` of them, otherwise
    ``candidate_count`` are drawn uniformly. Ties go to the lexicographically
    smallest vector.
    """
    d, s = spec.d, spec.s
    free = list(range(s - 1, d - 1))
    if len(free) < s - 1:
        raise ValueError(f"the alternative set is empty: need d - 1 >= 2 (s - 1), got d={d}, s={s}")
    n_candidates = math.comb(len(free), s - 1) * 2 ** (s - 1)

    if n_candidates <= cap:
        C = _sparse_signed(free, s - 1, d)
    else:
        if candidate_count is None:
            raise ValueError(f"{n_candidates} alternative candidates exceed the cap; pass candidate_count")
        gen = as_generator(rng)
        C = np.zeros((check_int(candidate_count, "candidate_count"), d))
        for r in range(C.shape[0]):
            idx = gen.choice(free, s - 1, replace=False)
            C[r, idx] = gen.choice((-1.0, 1.0), s - 1)

    if logged_actions is None or len(logged_actions) == 0:
        values = np.zeros(len(C))
    else:
        A = np.atleast_2d(np.asarray(logged_actions, dtype=np.float64))
        values = ((C @ A.T) ** 2).sum(axis=1)
    return _lexicographic_first(C, values)


def alternative_theta(theta, spec, logged_actions=None, candidate_count=None, rng=None,
                      cap=DEFAULT_CANDIDATE_CAP):
    """``theta + 2 eps x_tilde``: flips which arm is optimal while staying hard to detect."""
    x_tilde = alternative_direction(spec, logged_actions, candidate_count, rng, cap)
    return np.asarray(theta, dtype=np.float64) + 2.0 * spec.eps * x_tilde


def kl_between(theta, theta_tilde, actions, pull_counts, noise_std=1.0):
    """KL divergence between the laws of a run under ``theta`` and ``theta_tilde``.

    ``pull_counts[i]`` is the (expected) number of pulls of ``actions[i]``
    under ``theta``; the result is ``sum_i T_i <x_i, theta - theta_tilde>^2 / (2 sigma^2)``.
    """
    X = actions.matrix if isinstance(actions, ActionSet) else np.atleast_2d(np.asarray(actions, float))
    counts = np.asarray(pull_counts, dtype=np.float64)
    if counts.shape != (X.shape[0],):
        raise ValueError(f"need one pull count per action ({X.shape[0]}), got shape {counts.shape}")
    if np.any(counts < 0):
        raise ValueError("pull counts must be non-negative")
    noise_std = check_positive(noise_std, "noise_std")
    diff = X @ (np.asarray(theta, float) - np.asarray(theta_tilde, float))
    return float(counts @ diff**2 / (2.0 * noise_std**2))


# --- other environments ---------------------------------------------------

def contextual_instance(spec, rng, clip=True):
    """Per-round Gaussian arms correlated across arms with ``corr = rho^2``.

    Each coordinate is drawn independently across coordinates and rounds;
    features are then truncated to ``[-1, 1]``. ``theta`` has ``s`` entries
    of magnitude 1 with random signs.

    Returns ``(ContextSequence, SparseInstance)`` (raw arrays when ``clip=False``).
    """
    gen = as_generator(rng)
    N, d = spec.num_arms, spec.d
    V = np.full((N, N), spec.rho**2)
    np.fill_diagonal(V, 1.0)
    L = np.linalg.cholesky(V)
    Z = gen.standard_normal((spec.horizon, d, N)) @ L.T
    contexts = np.ascontiguousarray(Z.transpose(0, 2, 1))

    theta = np.zeros(d)
    coords = gen.choice(d, spec.s, replace=False)
    theta[coords] = gen.choice((-1.0, 1.0), spec.s)
    instance = SparseInstance(theta, spec.s, spec.noise_std)
    if not clip:
        return contexts, instance
    return ContextSequence(np.clip(contexts, -1.0, 1.0)), instance


def random_instance(n_arms, d, s, rng, signal=1.0, distribution="rademacher", noise_std=1.0):
    """Random bounded arms with an ``s``-sparse parameter of magnitude ``signal``."""
    gen = as_generator(rng)
    if distribution == "rademacher":
        draw = lambda g, m: g.choice((-1.0, 1.0), size=(m, d))  # noqa: E731
    elif distribution == "uniform":
        draw = lambda g, m: g.uniform(-1.0, 1.0, size=(m, d))  # noqa: E731
    else:
        raise ValueError(f"unknown action distribution {distribution!r}")
    X = _distinct_rows(draw, n_arms, gen)
    theta = np.zeros(d)
    coords = gen.choice(d, s, replace=False)
    theta[coords] = signal * gen.choice((-1.0, 1.0), s)
    return ActionSet(X), SparseInstance(theta, s, noise_std)


def basis_instance(d, gap, noise_std=1.0):
    """Standard basis arms; arm 0 is best by ``gap``."""
    theta = np.zeros(d)
    theta[0] = gap
    return ActionSet(np.eye(d)), SparseInstance(theta, 1, noise_std)


# --- regret bounds ----------------------------------------------------------

def lower_bound(n, d, s, c_min):
    """Minimax lower bound ``exp(-4)/4 * min(c_min^(-1/3) s^(1/3) n^(2/3), sqrt(d n))``."""
    for name, v in (("n", n), ("d", d), ("s", s), ("c_min", c_min)):
        check_positive(v, name)
    return math.exp(-4) / 4 * min(c_min ** (-1 / 3) * s ** (1 / 3) * n ** (2 / 3), math.sqrt(d * n))


def estc_upper_bound(n, d, s, r_max, c_min, n1, c1=1.0):
    for name, v in (("n", n), ("d", d), ("s", s), ("r_max", r_max), ("c_min", c_min), ("n1", n1)):
        check_positive(v, name)
    main = (2 * math.log(2 * d) * r_max) ** (1 / 3) * c_min ** (-2 / 3) * s ** (2 / 3) * n ** (2 / 3)
    return main + 3 * n * r_max * math.exp(-c1 * n1)


def rpe_upper_bound(n, d, s, m, c_min, phi_max, K, C=1.0):
    for name, v in (("n", n), ("d", d), ("s", s), ("m", m), ("c_min", c_min),
                    ("phi_max", phi_max), ("K", K), ("C", C)):
        check_positive(v, name)
    screening = s * math.log(d) / (m**2 * c_min)
    elimination = math.sqrt(9 * phi_max * math.log(K * n) / c_min) * math.sqrt(s * n)
    return C * (screening + elimination)
