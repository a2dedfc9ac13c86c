"""Actions, environments, reward sampling and regret bookkeeping."""
import hashlib
import json
from dataclasses import dataclass, field

import numpy as np

from ._validation import check_action_matrix, check_int, check_positive

_U64 = 2**64


@dataclass(frozen=True)
class RngStream:
    """Named random stream: the pair ``(seed, stream_id)`` fixes every draw.

    ``generator()`` builds a fresh PCG64 generator each call, so two calls
    replay the same sequence bit for bit.
    """

    seed: int
    stream_id: int = 0

    def __post_init__(self):
        for name in ("seed", "stream_id"):
            value = getattr(self, name)
            if isinstance(value, bool) or not isinstance(value, (int, np.integer)):
                raise TypeError(f"{name} must be an integer")
            if not 0 <= int(value) < _U64:
                raise ValueError(f"{name} must fit in an unsigned 64-bit integer")

    def generator(self):
        seq = np.random.SeedSequence(entropy=int(self.seed), spawn_key=(int(self.stream_id),))
        return np.random.Generator(np.random.PCG64(seq))

    def substream(self, key):
        """Deterministic child stream, ``key`` being an int or a string label."""
        if isinstance(key, str):
            key = int.from_bytes(hashlib.blake2b(key.encode("utf8"), digest_size=8).digest(), "little")
        mixed = np.random.SeedSequence(entropy=int(self.seed),
                                       spawn_key=(int(self.stream_id), int(key) % _U64))
        return RngStream(self.seed, int(mixed.generate_state(1, np.uint64)[0]))


def as_generator(rng):
    """Accept an RngStream, a Generator, an int seed or None."""
    if isinstance(rng, RngStream):
        return rng.generator()
    if isinstance(rng, np.random.Generator):
        return rng
    if rng is None or isinstance(rng, (int, np.integer)):
        return np.random.default_rng(rng)
    raise TypeError(f"cannot build a random generator from {type(rng).__name__}")


class ActionSet:
    """Finite, ordered set of arms stored as the rows of a ``(K, d)`` matrix."""

    def __init__(self, actions, *, check_duplicates=True):
        X = check_action_matrix(actions)
        if check_duplicates:
            n_unique = np.unique(X, axis=0).shape[0]
            if n_unique != X.shape[0]:
                raise ValueError(f"action set contains {X.shape[0] - n_unique} duplicate action(s)")
        X.setflags(write=False)
        self._X = X

    @property
    def matrix(self):
        return self._X

    @property
    def dim(self):
        return self._X.shape[1]

    def __len__(self):
        return self._X.shape[0]

    def __getitem__(self, index):
        return self._X[index]

    def __iter__(self):
        return iter(self._X)

    def __repr__(self):
        return f"ActionSet(K={len(self)}, dim={self.dim})"

    def rank(self, tol=None):
        return int(np.linalg.matrix_rank(self._X, tol=tol))

    def spans(self):
        return self.rank() == self.dim

    def subset(self, indices):
        return ActionSet(self._X[np.asarray(indices, dtype=int)], check_duplicates=False)


@dataclass(frozen=True)
class SparseInstance:
    """Linear reward model ``Y = <x, theta> + noise_std * N(0, 1)``.

    ``noise_std = 0`` is accepted so tests can run noiseless environments.
    """

    theta: np.ndarray
    sparsity_bound: int
    noise_std: float = 1.0

    def __post_init__(self):
        theta = np.array(self.theta, dtype=np.float64).ravel()
        if not np.all(np.isfinite(theta)):
            raise ValueError("theta must be finite")
        theta.setflags(write=False)
        object.__setattr__(self, "theta", theta)
        s = check_int(self.sparsity_bound, "sparsity_bound", minimum=0)
        if np.count_nonzero(theta) > s:
            raise ValueError(f"theta has {np.count_nonzero(theta)} nonzeros, more than sparsity_bound={s}")
        object.__setattr__(self, "sparsity_bound", s)
        object.__setattr__(self, "noise_std", check_positive(self.noise_std, "noise_std", strict=False))

    @property
    def dim(self):
        return self.theta.shape[0]

    def mean_rewards(self, actions):
        X = _matrix(actions)
        _check_dim(self, X.shape[1])
        return X @ self.theta

    def max_abs_reward(self, actions):
        """Largest |<x, theta>| over the set; bounds the per-round regret by twice this."""
        return float(np.max(np.abs(self.mean_rewards(actions))))


def _matrix(actions):
    if isinstance(actions, ActionSet):
        return actions.matrix
    return np.atleast_2d(np.asarray(actions, dtype=np.float64))


def _check_dim(instance, d):
    if d != instance.dim:
        raise ValueError(f"dimension mismatch: actions have d={d}, theta has d={instance.dim}")


def optimal_action(instance, actions):
    """Index and value of ``argmax_x <x, theta>``; ties go to the lowest index."""
    means = instance.mean_rewards(actions)
    index = int(np.argmax(means))
    return index, float(means[index])


def suboptimality_gap(instance, actions, index):
    means = instance.mean_rewards(actions)
    if not -len(means) <= index < len(means):
        raise IndexError(f"action index {index} out of range for {len(means)} actions")
    return float(means.max() - means[index])


def gaps(instance, actions):
    means = instance.mean_rewards(actions)
    return means.max() - means


def sample_reward(instance, action, rng):
    """One noisy reward for a single action vector."""
    action = np.asarray(action, dtype=np.float64).ravel()
    _check_dim(instance, action.shape[0])
    gen = as_generator(rng)
    return float(action @ instance.theta + instance.noise_std * gen.standard_normal())


def sample_rewards(instance, actions, indices, gen):
    """Vectorised rewards for the arms ``indices`` of ``actions``."""
    X = _matrix(actions)
    _check_dim(instance, X.shape[1])
    means = X[indices] @ instance.theta
    return means + instance.noise_std * gen.standard_normal(means.shape[0])


@dataclass
class RegretTrajectory:
    """Played arms, rewards and per-round pseudo-regret of one run.

    Rounds are implicitly numbered ``1..len(self)``. The arrays grow through
    :meth:`record`; nothing else should mutate them.
    """

    horizon: int
    informative: frozenset = frozenset()
    action_indices: np.ndarray = field(init=False, repr=False)
    rewards: np.ndarray = field(init=False, repr=False)
    instant_regret: np.ndarray = field(init=False, repr=False)
    diagnostics: dict = field(default_factory=dict)

    def __post_init__(self):
        self.horizon = check_int(self.horizon, "horizon", minimum=0)
        self._n = 0
        self.action_indices = np.zeros(self.horizon, dtype=np.int64)
        self.rewards = np.zeros(self.horizon)
        self.instant_regret = np.zeros(self.horizon)
        self.informative = frozenset(int(i) for i in self.informative)

    def __len__(self):
        return self._n

    @property
    def remaining(self):
        return self.horizon - self._n

    def record(self, indices, rewards, regrets):
        indices = np.atleast_1d(np.asarray(indices, dtype=np.int64))
        rewards = np.atleast_1d(np.asarray(rewards, dtype=np.float64))
        regrets = np.atleast_1d(np.asarray(regrets, dtype=np.float64))
        m = indices.shape[0]
        if not (rewards.shape[0] == regrets.shape[0] == m):
            raise ValueError("indices, rewards and regrets must have equal length")
        if self._n + m > self.horizon:
            raise ValueError("trajectory would exceed its horizon")
        if np.any(regrets < -1e-12):
            raise ValueError("instantaneous regret must be non-negative")
        sl = slice(self._n, self._n + m)
        self.action_indices[sl] = indices
        self.rewards[sl] = rewards
        self.instant_regret[sl] = np.maximum(regrets, 0.0)
        self._n += m

    @property
    def rounds(self):
        return np.arange(1, self._n + 1)

    @property
    def cumulative(self):
        return np.cumsum(self.instant_regret[: self._n])

    @property
    def final_regret(self):
        return float(self.instant_regret[: self._n].sum())

    @property
    def informative_pulls(self):
        if not self.informative:
            return 0
        mask = np.isin(self.action_indices[: self._n], list(self.informative))
        return int(mask.sum())

    def steps(self):
        """``(t, action index, reward, instantaneous regret)`` tuples."""
        n = self._n
        return list(zip(range(1, n + 1), self.action_indices[:n].tolist(),
                        self.rewards[:n].tolist(), self.instant_regret[:n].tolist()))

    def pull_counts(self, n_actions):
        return np.bincount(self.action_indices[: self._n], minlength=n_actions)


class EnvironmentRunner:
    """Plays arms of a fixed action set against an instance and logs regret."""

    def __init__(self, actions, instance, gen, horizon, informative=()):
        self.actions = actions if isinstance(actions, ActionSet) else ActionSet(actions)
        _check_dim(instance, self.actions.dim)
        self.instance = instance
        self.gen = gen
        self.means = instance.mean_rewards(self.actions)
        self.gaps = self.means.max() - self.means
        self.trajectory = RegretTrajectory(horizon, informative=informative)

    @property
    def remaining(self):
        return self.trajectory.remaining

    def play(self, indices):
        """Play ``indices`` in order (truncated at the horizon); returns rewards."""
        indices = np.atleast_1d(np.asarray(indices, dtype=np.int64))[: self.remaining]
        noise = self.instance.noise_std * self.gen.standard_normal(indices.shape[0])
        rewards = self.means[indices] + noise
        self.trajectory.record(indices, rewards, self.gaps[indices])
        return indices, rewards


class ContextSequence:
    """Per-round action sets: ``contexts[t]`` is the ``(N, d)`` arm matrix of round ``t + 1``."""

    def __init__(self, contexts):
        contexts = np.asarray(contexts, dtype=np.float64)
        if contexts.ndim != 3:
            raise ValueError("contexts must have shape (horizon, n_arms, dim)")
        if np.any(np.abs(contexts) > 1.0 + 1e-12):
            raise ValueError("contexts must satisfy max |x_j| <= 1")
        contexts.setflags(write=False)
        self.contexts = contexts

    @property
    def horizon(self):
        return self.contexts.shape[0]

    @property
    def n_arms(self):
        return self.contexts.shape[1]

    @property
    def dim(self):
        return self.contexts.shape[2]

    def __len__(self):
        return self.horizon

    def __getitem__(self, t):
        return self.contexts[t]

    def truncate(self, horizon):
        if horizon > self.horizon:
            raise ValueError(f"only {self.horizon} rounds of contexts available, asked for {horizon}")
        return ContextSequence(self.contexts[:horizon])


class ContextualRunner:
    """Like :class:`EnvironmentRunner` but the arm set changes every round."""

    def __init__(self, contexts, instance, gen, horizon):
        if horizon > contexts.horizon:
            raise ValueError(f"horizon {horizon} exceeds the {contexts.horizon} generated rounds")
        _check_dim(instance, contexts.dim)
        self.contexts = contexts
        self.instance = instance
        self.gen = gen
        self.means = contexts.contexts[:horizon] @ instance.theta
        self.gaps = self.means.max(axis=1, keepdims=True) - self.means
        self.trajectory = RegretTrajectory(horizon)

    @property
    def t(self):
        """Zero-based index of the next round."""
        return len(self.trajectory)

    @property
    def remaining(self):
        return self.trajectory.remaining

    def play(self, arms):
        """Play ``arms[i]`` in round ``t + i`` for consecutive rounds."""
        arms = np.atleast_1d(np.asarray(arms, dtype=np.int64))[: self.remaining]
        rows = np.arange(self.t, self.t + arms.shape[0])
        rewards = self.means[rows, arms] + self.instance.noise_std * self.gen.standard_normal(arms.shape[0])
        self.trajectory.record(arms, rewards, self.gaps[rows, arms])
        return arms, rewards


# --- JSON -----------------------------------------------------------------

def problem_to_dict(actions, instance=None, labels=None):
    X = _matrix(actions)
    doc = {"dim": int(X.shape[1]), "actions": X.tolist()}
    if instance is not None:
        doc.update(theta=instance.theta.tolist(), sparsity_bound=instance.sparsity_bound,
                   noise_std=instance.noise_std)
    if labels is not None:
        doc["labels"] = {"informative": sorted(int(i) for i in labels)}
    return doc


def problem_from_dict(doc):
    """Inverse of :func:`problem_to_dict`; returns ``(actions, instance or None, labels)``."""
    if "actions" not in doc:
        raise ValueError("problem document needs an 'actions' field")
    actions = ActionSet(doc["actions"])
    if "dim" in doc and int(doc["dim"]) != actions.dim:
        raise ValueError(f"'dim' is {doc['dim']} but actions have dimension {actions.dim}")
    instance = None
    if "theta" in doc:
        theta = np.asarray(doc["theta"], dtype=float)
        instance = SparseInstance(theta, int(doc.get("sparsity_bound", np.count_nonzero(theta))),
                                  float(doc.get("noise_std", 1.0)))
        _check_dim(instance, actions.dim)
    labels = None
    if "labels" in doc:
        labels = frozenset(int(i) for i in doc["labels"].get("informative", []))
    return actions, instance, labels


def save_problem(path, actions, instance=None, labels=None):
    with open(path, "w") as fh:
        json.dump(problem_to_dict(actions, instance, labels), fh)


def load_problem(path):
    with open(path) as fh:
        return problem_from_dict(json.load(fh))
