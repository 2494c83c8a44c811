"""Bandit instances: local models, the derived global model, reward sampling."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.special import ndtri

BERNOULLI = "bernoulli"
TRUNCATED_GAUSSIAN = "truncated_gaussian"


@dataclass(frozen=True, eq=False)
class BanditInstance:
    """M clients x K arms of local mean rewards.

    ``local_means[m, k]`` is client m's mean for arm k (client-major rows).
    ``stddev`` is only used when ``reward_kind`` is truncated Gaussian; the
    clamp to [0, 1] shifts the realised mean slightly away from mu.
    """

    local_means: np.ndarray
    reward_kind: str = BERNOULLI
    stddev: float = 0.0
    _nu: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        means = np.array(self.local_means, dtype=np.float64)
        if means.ndim != 2:
            raise ValueError("local_means must be an M x K matrix")
        m, k = means.shape
        if m < 1 or k < 2:
            raise ValueError(f"need M >= 1 and K >= 2, got M={m}, K={k}")
        if not np.all((means >= 0.0) & (means <= 1.0)):
            raise ValueError("every local mean must lie in [0, 1]")
        if self.reward_kind not in (BERNOULLI, TRUNCATED_GAUSSIAN):
            raise ValueError(f"unknown reward kind {self.reward_kind!r}")
        if self.reward_kind == TRUNCATED_GAUSSIAN and not self.stddev > 0:
            raise ValueError("truncated Gaussian rewards need stddev > 0")
        means.setflags(write=False)
        object.__setattr__(self, "local_means", means)
        object.__setattr__(self, "_nu", _average_clients(means))

    @property
    def num_clients(self) -> int:
        return self.local_means.shape[0]

    @property
    def num_arms(self) -> int:
        return self.local_means.shape[1]

    @property
    def global_means(self) -> np.ndarray:
        return self._nu

    def to_json(self) -> dict:
        kind = BERNOULLI if self.reward_kind == BERNOULLI else {TRUNCATED_GAUSSIAN: self.stddev}
        return {
            "M": self.num_clients,
            "K": self.num_arms,
            "means": self.local_means.tolist(),
            "reward_kind": kind,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "BanditInstance":
        means = obj["means"]
        kind = obj.get("reward_kind", BERNOULLI)
        if isinstance(kind, dict):
            if set(kind) != {TRUNCATED_GAUSSIAN}:
                raise ValueError(f"unknown reward_kind {kind!r}")
            inst = cls(means, TRUNCATED_GAUSSIAN, float(kind[TRUNCATED_GAUSSIAN]))
        else:
            inst = cls(means, kind)
        if "M" in obj and obj["M"] != inst.num_clients:
            raise ValueError(f"M={obj['M']} does not match {inst.num_clients} rows of means")
        if "K" in obj and obj["K"] != inst.num_arms:
            raise ValueError(f"K={obj['K']} does not match {inst.num_arms} columns of means")
        return inst

    @classmethod
    def load(cls, path) -> "BanditInstance":
        return cls.from_json(json.loads(Path(path).read_text()))


def _average_clients(means: np.ndarray) -> np.ndarray:
    # fixed summation order: client 1 first
    m, k = means.shape
    nu = np.zeros(k)
    for row in means:
        nu += row
    nu /= m
    nu.setflags(write=False)
    return nu


@dataclass(frozen=True)
class GlobalSummary:
    global_means: np.ndarray
    optimal_arm: int
    gaps: np.ndarray
    delta_min: float
    delta_max: float
    psi_max: int


def global_summary(instance: BanditInstance) -> GlobalSummary:
    """Global means, best arm (lowest index on ties) and gap statistics.

    ``gaps[optimal_arm]`` is set to ``delta_min``. When every arm has the same
    global mean there is no sub-optimal arm; ``delta_min`` is then 0 and
    ``psi_max`` is reported as 1.
    """
    nu = instance.global_means
    best = int(np.argmax(nu))
    gaps = nu[best] - nu
    others = np.delete(gaps, best)
    positive = others[others > 0]
    delta_min = float(positive.min()) if positive.size else 0.0
    delta_max = float(others.max())
    gaps = gaps.copy()
    gaps[best] = delta_min
    psi_max = max(1, math.ceil(math.log2(1.0 / delta_min))) if delta_min > 0 else 1
    return GlobalSummary(nu, best, gaps, delta_min, float(delta_max), psi_max)


def reward_from_uniform(mean: float, u: float, kind: str = BERNOULLI, stddev: float = 0.0) -> float:
    """Map one uniform variate to a reward with the given mean.

    Bernoulli: ``1`` iff ``u < mean``. Truncated Gaussian: inverse transform
    through the normal quantile, then clamp to [0, 1].
    """
    if kind == BERNOULLI:
        return 1.0 if u < mean else 0.0
    return min(1.0, max(0.0, mean + stddev * float(ndtri(u))))


def _check_index(value: int, bound: int, name: str) -> None:
    if not 0 <= value < bound:
        raise IndexError(f"{name} index {value} out of range [0, {bound})")


def sample_local_reward(instance: BanditInstance, client: int, arm: int, rng: np.random.Generator) -> float:
    """Draw X_{arm, client}; consumes exactly one uniform from ``rng``."""
    _check_index(client, instance.num_clients, "client")
    _check_index(arm, instance.num_arms, "arm")
    x = reward_from_uniform(instance.local_means[client, arm], rng.random(), instance.reward_kind, instance.stddev)
    assert 0.0 <= x <= 1.0
    return x


def sample_global_reward(instance: BanditInstance, arm: int, rng: np.random.Generator) -> float:
    """Draw Y_arm with mean equal to the arm's global mean; one uniform per draw."""
    _check_index(arm, instance.num_arms, "arm")
    y = reward_from_uniform(instance.global_means[arm], rng.random(), instance.reward_kind, instance.stddev)
    assert 0.0 <= y <= 1.0
    return y


FIXED_MEANS = (
    (0.2, 0.9, 0.1, 0.8, 0.6),
    (0.4, 0.1, 0.9, 0.4, 0.8),
    (0.2, 0.2, 0.5, 0.5, 0.9),
    (0.4, 0.3, 0.8, 0.9, 0.4),
    (0.3, 0.5, 0.2, 0.4, 0.8),
)


def fixed_instance() -> BanditInstance:
    """The 5-client, 5-arm Bernoulli benchmark instance (global means 0.3..0.7)."""
    return BanditInstance(FIXED_MEANS)


def random_instance(num_clients: int, num_arms: int, rng: np.random.Generator) -> BanditInstance:
    if num_clients < 1 or num_arms < 2:
        raise ValueError(f"need M >= 1 and K >= 2, got M={num_clients}, K={num_arms}")
    return BanditInstance(rng.random((num_clients, num_arms)))
