import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from sparse_bandit.core import (ActionSet, ContextSequence, EnvironmentRunner, RegretTrajectory,
                                RngStream, SparseInstance, gaps, load_problem, optimal_action,
                                sample_reward, sample_rewards, save_problem, suboptimality_gap)


def test_rng_stream_replays_exactly():
    a = RngStream(7, 3).generator().standard_normal(5)
    b = RngStream(7, 3).generator().standard_normal(5)
    c = RngStream(7, 4).generator().standard_normal(5)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)


def test_substream_keys_with_shared_prefix_differ():
    base = RngStream(1)
    x = base.substream("policy-estc/horizon-1000").generator().random()
    y = base.substream("policy-estc/horizon-2000").generator().random()
    assert x != y
    assert base.substream("a") == base.substream("a")


@pytest.mark.parametrize("bad", [-1, 2**64, 1.5, True])
def test_rng_stream_rejects_bad_seed(bad):
    with pytest.raises((TypeError, ValueError)):
        RngStream(bad)


def test_action_set_validation():
    with pytest.raises(ValueError):
        ActionSet([[1.5, 0.0]])
    with pytest.raises(ValueError):
        ActionSet([[1.0, 0.0], [1.0, 0.0]])
    with pytest.raises(ValueError):
        ActionSet([[np.nan, 0.0]])
    A = ActionSet(np.eye(3))
    assert len(A) == 3 and A.dim == 3 and A.spans()
    assert not ActionSet([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]]).spans()
    with pytest.raises(ValueError):
        A.matrix[0, 0] = 0.5


def test_sparse_instance_checks_sparsity():
    with pytest.raises(ValueError):
        SparseInstance([1.0, 1.0, 0.0], sparsity_bound=1)
    with pytest.raises(ValueError):
        SparseInstance([1.0, 0.0], 1, noise_std=-1.0)
    inst = SparseInstance([1.0, 0.0], 1, noise_std=0.0)
    assert inst.dim == 2


def test_optimal_action_and_gaps_tie_lowest_index():
    A = ActionSet([[0.5, 0.0], [0.0, 0.5], [0.0, 0.0]])
    inst = SparseInstance([1.0, 1.0], 2)
    assert optimal_action(inst, A) == (0, 0.5)
    assert np.allclose(gaps(inst, A), [0.0, 0.0, 0.5])
    assert suboptimality_gap(inst, A, 2) == pytest.approx(0.5)


def test_sample_reward_noiseless_and_noise_scale():
    inst = SparseInstance([0.3, -0.2], 2, noise_std=0.0)
    assert sample_reward(inst, np.array([1.0, 1.0]), RngStream(0)) == pytest.approx(0.1)
    noisy = SparseInstance([0.3, -0.2], 2, noise_std=2.0)
    X = np.array([[1.0, 1.0]])
    r = sample_rewards(noisy, X, np.zeros(20000, dtype=int), np.random.default_rng(0))
    assert abs(r.mean() - 0.1) < 0.05
    assert abs(r.std() - 2.0) < 0.05


def test_trajectory_bookkeeping():
    traj = RegretTrajectory(4, informative={1})
    traj.record([0, 1], [0.1, 0.2], [0.0, 0.5])
    traj.record(1, 0.3, 0.5)
    assert len(traj) == 3 and traj.remaining == 1
    assert np.allclose(traj.cumulative, [0.0, 0.5, 1.0])
    assert traj.final_regret == pytest.approx(1.0)
    assert traj.informative_pulls == 2
    assert traj.steps()[0] == (1, 0, 0.1, 0.0)
    with pytest.raises(ValueError):
        traj.record([0, 0], [0.0, 0.0], [0.0, 0.0])
    with pytest.raises(ValueError):
        traj.record(0, 0.0, -1.0)


def test_runner_truncates_at_horizon_and_regret_recomputes():
    A = ActionSet(np.eye(3))
    inst = SparseInstance([1.0, 0.5, 0.0], 2)
    runner = EnvironmentRunner(A, inst, np.random.default_rng(0), horizon=5)
    played, _ = runner.play([2, 1, 0, 2, 1, 0, 0])
    assert played.tolist() == [2, 1, 0, 2, 1]
    assert runner.remaining == 0
    assert runner.trajectory.final_regret == pytest.approx(1 + 0.5 + 0 + 1 + 0.5)


def test_context_sequence_shape_and_bounds():
    ctx = ContextSequence(np.zeros((4, 3, 2)))
    assert (ctx.horizon, ctx.n_arms, ctx.dim) == (4, 3, 2)
    assert ctx.truncate(2).horizon == 2
    with pytest.raises(ValueError):
        ctx.truncate(5)
    with pytest.raises(ValueError):
        ContextSequence(np.full((1, 2, 2), 2.0))


def test_problem_json_roundtrip(tmp_path):
    A = ActionSet([[1.0, 0.0], [0.0, -1.0]])
    inst = SparseInstance([0.0, 0.7], 1, noise_std=0.5)
    path = tmp_path / "p.json"
    save_problem(path, A, inst, labels={1})
    doc = json.loads(path.read_text())
    assert doc["dim"] == 2 and doc["labels"] == {"informative": [1]}
    A2, inst2, labels = load_problem(path)
    assert np.array_equal(A2.matrix, A.matrix)
    assert np.array_equal(inst2.theta, inst.theta) and inst2.noise_std == 0.5
    assert labels == frozenset({1})


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 6), st.integers(1, 30), st.integers(0, 2**31))
def test_cumulative_regret_matches_played_gaps(d, n, seed):
    g = np.random.default_rng(seed)
    X = np.unique(g.choice((-1.0, 0.0, 1.0), size=(8, d)), axis=0)
    theta = g.normal(size=d)
    inst = SparseInstance(theta, d)
    runner = EnvironmentRunner(ActionSet(X), inst, g, horizon=n)
    runner.play(g.integers(0, len(X), size=n))
    means = X @ theta
    expected = np.cumsum(means.max() - means[runner.trajectory.action_indices])
    assert np.allclose(runner.trajectory.cumulative, expected)
