import numpy as np
import pytest

from rewardteach import backend
from rewardteach.environment import BanditInstance, fixed_instance
from rewardteach.harness import RunConfig, run_episode

pytestmark = pytest.mark.skipif(backend.COMPILED not in backend.available(),
                                reason="compiled kernel not built")

FIELDS = ("regret", "cost", "client_regret", "client_cost", "client_counts", "actions", "raw", "sigma")


def both(config):
    return run_episode(config, backend.PYTHON), run_episode(config, backend.COMPILED)


def assert_same(a, b):
    for f in FIELDS:
        np.testing.assert_array_equal(getattr(a, f), getattr(b, f), err_msg=f)
    assert a.server == b.server
    assert a.realized_regret == b.realized_regret
    assert (a.learning_spread_max, a.learning_spread_violations, a.roundoff_clips) == \
        (b.learning_spread_max, b.learning_spread_violations, b.roundoff_clips)


@pytest.mark.parametrize("strategy", ["ucb1", "eps_greedy:c=1", "eps_greedy:c=0.3", "ts"])
@pytest.mark.parametrize("policy", ["tal", "twl", "ng", "ng:target=2", "na", "none", "twl:g1=0.7,g2=0.1"])
def test_backends_bit_identical(strategy, policy):
    c = RunConfig(fixed_instance(), strategy, policy, 4000, seed=3, checkpoint_stride=37, record=True,
                  realized_regret=True)
    assert_same(*both(c))


def test_mixed_strategies_and_lowest_tie_break():
    c = RunConfig(fixed_instance(), ["ucb1", "ts", "eps_greedy", "ucb1", "eps_greedy:c=2"], "twl", 20000,
                  seed=12, tie_break="lowest", record=True)
    assert_same(*both(c))


def test_truncated_gaussian_rewards():
    inst = BanditInstance(fixed_instance().local_means, reward_kind="truncated_gaussian", stddev=0.2)
    for policy in ("tal", "na"):
        c = RunConfig(inst, "ucb1", policy, 3000, seed=5, record=True)
        a, b = both(c)
        assert_same(a, b)
        assert a.raw.min() >= 0 and a.raw.max() <= 1


def test_full_horizon_tal_matches():
    c = RunConfig(fixed_instance(), "ucb1", "tal", 50000, seed=0, checkpoint_stride=100)
    a, b = both(c)
    np.testing.assert_array_equal(a.regret, b.regret)
    np.testing.assert_array_equal(a.cost, b.cost)
    assert a.switch_step == b.switch_step and a.learned_target == b.learned_target == 4


def test_forced_backend_env(monkeypatch):
    import importlib

    monkeypatch.setenv("REWARDTEACH_BACKEND", "python")
    assert importlib.reload(backend).BACKEND == backend.PYTHON
    monkeypatch.delenv("REWARDTEACH_BACKEND")
    assert importlib.reload(backend).BACKEND == backend.COMPILED


def test_unknown_backend():
    with pytest.raises(ValueError):
        run_episode(RunConfig(fixed_instance(), "ucb1", "na", 10), "gpu")
