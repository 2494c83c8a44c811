import math
from collections import Counter

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate, stats

from rewardteach.clients import (
    EpsGreedyClient,
    RangeViolation,
    ThompsonClient,
    UCB1Client,
    make_client,
    parse_strategy,
    reveal,
)


class ScriptedRng:
    """Returns queued uniforms; fails loudly if more are requested."""

    def __init__(self, values):
        self.values = list(values)

    def random(self):
        return self.values.pop(0)


def test_ucb1_forced_initialisation_in_index_order():
    c = UCB1Client(4)
    rng = np.random.default_rng(0)
    picks = []
    for t in range(1, 5):
        k = c.choose(t, rng)
        picks.append(k)
        c.observe(k, 0.5, rng)
    assert picks == [0, 1, 2, 3]


def test_ucb1_index_example():
    c = UCB1Client(2)
    c.counts, c.sums = [2, 1], [1.0, 0.9]
    # oracle: evaluate both indices by hand
    idx1 = 0.5 + math.sqrt(2 * math.log(4) / 2)
    idx2 = 0.9 + math.sqrt(2 * math.log(4) / 1)
    assert idx1 == pytest.approx(1.677, abs=1e-3)
    assert idx2 == pytest.approx(2.565, abs=1e-3)
    assert c.choose(4, ScriptedRng([])) == 1


def test_ucb1_equal_indices_are_uniform():
    counts = Counter()
    for seed in range(3000):
        c = UCB1Client(3)
        c.counts, c.sums = [1, 1, 1], [0.4, 0.4, 0.4]
        counts[c.choose(4, np.random.default_rng(seed))] += 1
    for k in range(3):
        assert abs(counts[k] / 3000 - 1 / 3) < 0.03


def test_lowest_tie_break_mode_is_deterministic():
    c = UCB1Client(3, tie_break="lowest")
    c.counts, c.sums = [1, 1, 1], [0.4, 0.4, 0.4]
    assert c.choose(4, ScriptedRng([])) == 0


@settings(max_examples=80, deadline=None)
@given(st.integers(2, 8), st.sampled_from([0.0, 0.25, 0.5, 1.0, 0.3]), st.integers(1, 400), st.integers(0, 2**32 - 1))
def test_ucb1_round_robin_under_constant_reward(K, gamma, tau, seed):
    c = UCB1Client(K)
    rng = np.random.default_rng(seed)
    for t in range(1, tau + 1):
        k = c.choose(t, rng)
        c.observe(k, gamma, rng)
        assert max(c.counts) - min(c.counts) <= 1
    assert sum(c.counts) == c.t == tau


def test_eps_schedule():
    c = EpsGreedyClient(5, c=1.0)
    assert c.epsilon(1) == 1.0
    assert c.epsilon(10) == 0.5
    assert EpsGreedyClient(5, c=0.5).epsilon(5) == 0.5


def test_eps_explores_uniformly_at_t1():
    counts = Counter(EpsGreedyClient(5).choose(1, np.random.default_rng(s)) for s in range(5000))
    for k in range(5):
        assert abs(counts[k] / 5000 - 0.2) < 0.03


def test_eps_all_zero_means_uniform_regardless_of_epsilon():
    counts = Counter()
    rng = np.random.default_rng(1)
    c = EpsGreedyClient(4)
    c.counts, c.sums, c.t = [10, 10, 10, 10], [0.0] * 4, 40
    for _ in range(20_000):
        counts[c.choose(10**6, rng)] += 1
    for k in range(4):
        assert abs(counts[k] / 20_000 - 0.25) < 0.02


def test_eps_exploit_decomposition():
    c = EpsGreedyClient(3)
    c.counts, c.sums = [5, 5, 5], [0.0, 2.0, 0.0]
    t = 10**6
    eps = c.epsilon(t)
    # oracle: P(arm 2) = (1 - eps) + eps / 3
    p_other = eps * 2 / 3
    assert 1 - p_other == pytest.approx(0.999998, abs=1e-7)
    # coin above eps -> greedy arm, no further draws
    assert c.choose(t, ScriptedRng([eps])) == 1
    # coin below eps -> uniform arm from the second draw
    assert c.choose(t, ScriptedRng([eps / 2, 0.99])) == 2
    rng = np.random.default_rng(5)
    misses = sum(c.choose(t, rng) != 1 for _ in range(100_000))
    assert misses <= 5  # expected 0.2


def test_eps_unpulled_arms_count_as_zero():
    c = EpsGreedyClient(3)
    c.counts, c.sums = [0, 4, 0], [0.0, 0.0, 0.0]
    rng = np.random.default_rng(3)
    seen = Counter(c.choose(10**9, rng) for _ in range(3000))
    assert set(seen) == {0, 1, 2}


def test_ts_uniform_prior_frequencies():
    c = ThompsonClient(5)
    rng = np.random.default_rng(2)
    counts = Counter(c.choose(1, rng) for _ in range(100_000))
    for k in range(5):
        assert abs(counts[k] / 100_000 - 0.2) < 0.01


def test_ts_concentrated_posteriors():
    # oracle: P(theta_2 > theta_1) by quadrature
    p_wrong, _ = integrate.quad(lambda x: stats.beta(1, 100).pdf(x) * stats.beta(100, 1).cdf(x), 0, 1)
    assert p_wrong < 1e-3
    c = ThompsonClient(2)
    c.alpha, c.beta = [100.0, 1.0], [1.0, 100.0]
    rng = np.random.default_rng(4)
    wins = sum(c.choose(1, rng) == 0 for _ in range(20_000))
    assert wins / 20_000 > 0.999


@pytest.mark.parametrize("reward, field", [(1.0, "alpha"), (0.0, "beta")])
def test_ts_binary_updates(reward, field):
    rng = np.random.default_rng(9)
    c = ThompsonClient(3)
    for _ in range(25):
        c.observe(2, reward, rng)
    assert getattr(c, field)[2] == 26.0
    assert c.alpha[2] + c.beta[2] == 2 + c.counts[2]


def test_ts_fractional_rewards_binarised():
    rng = np.random.default_rng(10)
    c = ThompsonClient(2)
    for _ in range(20_000):
        c.observe(0, 0.3, rng)
    assert c.alpha[0] + c.beta[0] == 2 + 20_000
    assert abs((c.alpha[0] - 1) / 20_000 - 0.3) < 0.015


def test_observe_keeps_fixed_point_mean():
    c = UCB1Client(2)
    c.counts, c.sums = [3, 0], [1.5, 0.0]
    c.observe(0, 0.5, None)
    assert c.sample_mean(0) == 0.5


@pytest.mark.parametrize("client", [UCB1Client(2), EpsGreedyClient(2), ThompsonClient(2)])
def test_out_of_range_rewards_rejected(client):
    with pytest.raises(RangeViolation):
        client.observe(0, 1.5, np.random.default_rng(0))
    with pytest.raises(RangeViolation):
        client.observe(0, -0.1, np.random.default_rng(0))


def test_reveal_rounding_and_violation():
    assert reveal(0.3, 0.7) == (1.0, False)
    assert reveal(0.5, 0.5 + 1e-15) == (1.0, True)
    with pytest.raises(RangeViolation):
        reveal(0.5, 0.6)


@settings(max_examples=80, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 3), st.floats(0, 1)), min_size=1, max_size=60), st.integers(0, 1000))
def test_counts_sum_to_clock(events, seed):
    rng = np.random.default_rng(seed)
    for c in (UCB1Client(4), EpsGreedyClient(4), ThompsonClient(4)):
        for k, r in events:
            c.observe(k, r, rng)
        assert sum(c.counts) == c.t == len(events)
        for k in range(4):
            if c.counts[k]:
                assert 0.0 <= c.sample_mean(k) <= 1.0 + 1e-12


def test_parse_strategy():
    assert parse_strategy("ucb1") == ("ucb1", 0.0)
    assert parse_strategy("ts") == ("ts", 0.0)
    assert parse_strategy("eps_greedy:c=2.5") == ("eps_greedy", 2.5)
    assert parse_strategy("eps_greedy") == ("eps_greedy", 1.0)
    for bad in ("ucb2", "eps_greedy:c=-1", "eps_greedy:c=abc", "kl_ucb"):
        with pytest.raises(ValueError):
            parse_strategy(bad)
    assert isinstance(make_client("eps_greedy:c=0.5", 3), EpsGreedyClient)
