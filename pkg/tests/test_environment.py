import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from rewardteach.environment import (
    BanditInstance,
    TRUNCATED_GAUSSIAN,
    fixed_instance,
    global_summary,
    random_instance,
    sample_global_reward,
    sample_local_reward,
)


def test_fixed_instance_layout(fixed):
    assert fixed.num_clients == 5 and fixed.num_arms == 5
    # client 1, arm 2
    assert fixed.local_means[0, 1] == 0.9
    assert fixed.local_means[3].tolist() == [0.4, 0.3, 0.8, 0.9, 0.4]


def test_fixed_global_summary(fixed):
    s = global_summary(fixed)
    np.testing.assert_allclose(s.global_means, [0.3, 0.4, 0.5, 0.6, 0.7], atol=1e-12, rtol=0)
    assert s.optimal_arm == 4
    assert s.delta_min == pytest.approx(0.1, abs=1e-12)
    assert s.delta_max == pytest.approx(0.4, abs=1e-12)
    assert s.psi_max == 4
    assert s.gaps[4] == s.delta_min


def test_constant_columns_average_to_constants():
    inst = BanditInstance([[0.5, 0.2]] * 4)
    s = global_summary(inst)
    assert s.global_means.tolist() == [0.5, 0.2]
    assert s.delta_min == pytest.approx(0.3)
    assert s.psi_max == math.ceil(math.log2(1 / 0.3)) == 2


def test_argmax_ties_take_lowest_index():
    s = global_summary(BanditInstance([[0.2, 0.6, 0.6]]))
    assert s.optimal_arm == 1


@pytest.mark.parametrize("means", [[[0.5]], [[1.2, 0.1]], [[0.1, -0.01]], [0.1, 0.2]])
def test_invalid_instances_rejected(means):
    with pytest.raises(ValueError):
        BanditInstance(means)


def test_bernoulli_degenerate_means(rng):
    inst = BanditInstance([[1.0, 0.0]])
    assert {sample_local_reward(inst, 0, 0, rng) for _ in range(200)} == {1.0}
    assert {sample_local_reward(inst, 0, 1, rng) for _ in range(200)} == {0.0}
    assert {sample_global_reward(inst, 0, rng) for _ in range(200)} == {1.0}


def test_bernoulli_law_of_large_numbers(rng):
    inst = BanditInstance([[0.7, 0.3]])
    xs = [sample_local_reward(inst, 0, 0, rng) for _ in range(100_000)]
    assert set(xs) <= {0.0, 1.0}
    assert abs(np.mean(xs) - 0.7) < 0.01
    ys = [sample_global_reward(inst, 1, rng) for _ in range(100_000)]
    assert abs(np.mean(ys) - 0.3) < 0.01


def test_fixed_instance_global_reward_is_bernoulli(fixed, rng):
    ys = [sample_global_reward(fixed, 4, rng) for _ in range(20_000)]
    assert set(ys) == {0.0, 1.0}
    assert abs(np.mean(ys) - 0.7) < 0.02


def test_each_draw_consumes_one_uniform(fixed):
    a, b = np.random.default_rng(7), np.random.default_rng(7)
    for _ in range(50):
        sample_local_reward(fixed, 2, 3, a)
    b.random(50)
    assert a.random() == b.random()
    tg = BanditInstance([[0.5, 0.5]], TRUNCATED_GAUSSIAN, 0.3)
    for _ in range(50):
        sample_local_reward(tg, 0, 1, a)
    b.random(50)
    assert a.random() == b.random()


def test_truncated_gaussian_clamps_to_unit_interval(rng):
    inst = BanditInstance([[0.95, 0.05]], TRUNCATED_GAUSSIAN, 0.5)
    xs = np.array([sample_local_reward(inst, 0, k % 2, rng) for k in range(5000)])
    assert xs.min() >= 0.0 and xs.max() <= 1.0
    assert (xs == 1.0).any() and (xs == 0.0).any()


def test_index_checks(fixed, rng):
    with pytest.raises(IndexError):
        sample_local_reward(fixed, 5, 0, rng)
    with pytest.raises(IndexError):
        sample_local_reward(fixed, 0, -1, rng)
    with pytest.raises(IndexError):
        sample_global_reward(fixed, 9, rng)


def test_same_seed_same_stream(fixed):
    def stream(seed):
        g = np.random.default_rng(seed)
        return [sample_local_reward(fixed, m % 5, (3 * m) % 5, g) for m in range(500)]

    assert stream(3) == stream(3)
    assert stream(3) != stream(4)


def test_random_instance_determinism_and_mean():
    a = random_instance(5, 5, np.random.default_rng(11))
    b = random_instance(5, 5, np.random.default_rng(11))
    assert np.array_equal(a.local_means, b.local_means)
    assert a.reward_kind == "bernoulli"
    g = np.random.default_rng(0)
    pooled = np.concatenate([random_instance(5, 5, g).local_means.ravel() for _ in range(10_000)])
    assert abs(pooled.mean() - 0.5) < 0.01
    with pytest.raises(ValueError):
        random_instance(3, 1, g)


def test_json_schema_is_client_major(fixed):
    obj = fixed.to_json()
    assert obj["M"] == 5 and obj["K"] == 5 and obj["reward_kind"] == "bernoulli"
    assert obj["means"][0] == [0.2, 0.9, 0.1, 0.8, 0.6]
    tg = BanditInstance([[0.1, 0.2]], TRUNCATED_GAUSSIAN, 0.25).to_json()
    assert tg["reward_kind"] == {"truncated_gaussian": 0.25}


def test_json_shape_mismatch_rejected():
    with pytest.raises(ValueError):
        BanditInstance.from_json({"M": 3, "K": 2, "means": [[0.1, 0.2]]})


unit = st.floats(0.0, 1.0, allow_nan=False)


@settings(max_examples=60, deadline=None)
@given(arrays(np.float64, st.tuples(st.integers(1, 6), st.integers(2, 6)), elements=unit))
def test_summary_survives_json_round_trip(means):
    inst = BanditInstance(means)
    back = BanditInstance.from_json(json.loads(json.dumps(inst.to_json())))
    a, b = global_summary(inst), global_summary(back)
    assert a.global_means.tobytes() == b.global_means.tobytes()
    assert (a.optimal_arm, a.delta_min, a.delta_max, a.psi_max) == (b.optimal_arm, b.delta_min, b.delta_max, b.psi_max)


@settings(max_examples=60, deadline=None)
@given(arrays(np.float64, st.tuples(st.integers(1, 6), st.integers(2, 6)), elements=unit))
def test_summary_invariants(means):
    s = global_summary(BanditInstance(means))
    np.testing.assert_allclose(s.global_means, means.mean(axis=0), atol=1e-12)
    best = s.global_means[s.optimal_arm]
    assert best == s.global_means.max()
    assert s.optimal_arm == int(np.flatnonzero(s.global_means == best)[0])
    others = np.delete(np.arange(means.shape[1]), s.optimal_arm)
    assert (s.gaps[others] >= 0).all()
    assert s.psi_max >= 1
    if s.delta_min > 0:
        assert s.psi_max == max(1, math.ceil(math.log2(1 / s.delta_min)))
