"""Autonomous client bandit strategies.

Clients only ever see adjusted rewards. Every random decision goes through
the client's own ``numpy.random.Generator`` using ``rng.random()`` and
``rng.beta()``; the compiled kernel calls the same C routines on the same
bit generator, so both backends make identical choices.
"""

from __future__ import annotations

import math
import re

UCB1 = "ucb1"
EPS_GREEDY = "eps_greedy"
THOMPSON = "ts"

TIE_RANDOM = "random"
TIE_LOWEST = "lowest"

# x + (gamma - x) can miss gamma by an ulp for non-binary x
ROUNDOFF_TOL = 1e-12


class RangeViolation(ValueError):
    """A revealed reward fell outside [0, 1]."""


def reveal(raw: float, sigma: float) -> tuple[float, bool]:
    """Revealed reward ``raw + sigma`` and whether round-off had to be clamped.

    Anything further than ``ROUNDOFF_TOL`` outside [0, 1] raises.
    """
    adj = raw + sigma
    if 0.0 <= adj <= 1.0:
        return adj, False
    if -ROUNDOFF_TOL <= adj <= 1.0 + ROUNDOFF_TOL:
        return (0.0 if adj < 0.0 else 1.0), True
    raise RangeViolation(f"adjusted reward {adj!r} outside [0, 1]: raw={raw!r}, sigma={sigma!r}")


def uniform_index(rng, n: int) -> int:
    """One uniform variate -> index in ``range(n)``."""
    return min(int(rng.random() * n), n - 1)


def _pick(candidates: list[int], rng, tie_break: str) -> int:
    # a uniform is drawn only when there is a genuine tie
    if len(candidates) == 1 or tie_break == TIE_LOWEST:
        return candidates[0]
    return candidates[uniform_index(rng, len(candidates))]


def _argmax_all(values: list[float]) -> list[int]:
    best = max(values)
    return [k for k, v in enumerate(values) if v == best]


class ClientStrategy:
    """Shared per-client state: pull counts, perceived reward sums and a clock."""

    kind = ""

    def __init__(self, num_arms: int, tie_break: str = TIE_RANDOM):
        if num_arms < 2:
            raise ValueError("a client needs at least two arms")
        if tie_break not in (TIE_RANDOM, TIE_LOWEST):
            raise ValueError(f"unknown tie_break {tie_break!r}")
        self.num_arms = num_arms
        self.tie_break = tie_break
        self.counts = [0] * num_arms
        self.sums = [0.0] * num_arms
        self.t = 0

    def sample_mean(self, arm: int) -> float:
        n = self.counts[arm]
        return self.sums[arm] / n if n else 0.0

    def choose(self, t: int, rng) -> int:
        raise NotImplementedError

    def observe(self, arm: int, reward: float, rng) -> None:
        if not 0.0 <= reward <= 1.0:
            raise RangeViolation(f"adjusted reward {reward!r} outside [0, 1]")
        self.counts[arm] += 1
        self.sums[arm] += reward
        self.t += 1

    def spec(self) -> str:
        return self.kind


class UCB1Client(ClientStrategy):
    kind = UCB1

    def choose(self, t: int, rng) -> int:
        counts, sums = self.counts, self.sums
        for k, n in enumerate(counts):
            if n == 0:
                return k
        bonus = 2.0 * math.log(t)
        index = [sums[k] / counts[k] + math.sqrt(bonus / counts[k]) for k in range(self.num_arms)]
        return _pick(_argmax_all(index), rng, self.tie_break)


class EpsGreedyClient(ClientStrategy):
    """Explores w.p. ``min(1, c*K/t)``; otherwise greedy on perceived means.

    Unpulled arms count as mean 0.
    """

    kind = EPS_GREEDY

    def __init__(self, num_arms: int, c: float = 1.0, tie_break: str = TIE_RANDOM):
        super().__init__(num_arms, tie_break)
        if not c > 0:
            raise ValueError("epsilon-greedy constant c must be positive")
        self.c = float(c)

    def epsilon(self, t: int) -> float:
        return min(1.0, self.c * self.num_arms / t)

    def choose(self, t: int, rng) -> int:
        if rng.random() < self.epsilon(t):
            return uniform_index(rng, self.num_arms)
        means = [self.sample_mean(k) for k in range(self.num_arms)]
        return _pick(_argmax_all(means), rng, self.tie_break)

    def spec(self) -> str:
        return f"{EPS_GREEDY}:c={self.c!r}"


class ThompsonClient(ClientStrategy):
    """Beta-Bernoulli Thompson sampling with Beta(1, 1) priors.

    Fractional adjusted rewards are binarised by one Bernoulli draw so the
    posterior stays conjugate.
    """

    kind = THOMPSON

    def __init__(self, num_arms: int, tie_break: str = TIE_RANDOM):
        super().__init__(num_arms, tie_break)
        self.alpha = [1.0] * num_arms
        self.beta = [1.0] * num_arms

    def choose(self, t: int, rng) -> int:
        theta = [rng.beta(self.alpha[k], self.beta[k]) for k in range(self.num_arms)]
        # continuous draws: exact ties have probability zero, lowest index wins
        return theta.index(max(theta))

    def observe(self, arm: int, reward: float, rng) -> None:
        super().observe(arm, reward, rng)
        if rng.random() < reward:
            self.alpha[arm] += 1.0
        else:
            self.beta[arm] += 1.0


_EPS_RE = re.compile(r"^eps_greedy(?::c=(?P<c>[^,\s]+))?$")


def parse_strategy(spec: str) -> tuple[str, float]:
    """``"ucb1" | "eps_greedy:c=<float>" | "ts"`` -> (kind, c)."""
    text = spec.strip().lower()
    if text in (UCB1, THOMPSON):
        return text, 0.0
    match = _EPS_RE.match(text)
    if match:
        c = float(match.group("c")) if match.group("c") else 1.0
        if not (c > 0 and math.isfinite(c)):
            raise ValueError(f"epsilon-greedy constant must be positive, got {spec!r}")
        return EPS_GREEDY, c
    raise ValueError(f"unknown client strategy {spec!r}; expected ucb1, eps_greedy:c=<float> or ts")


def make_client(spec: str, num_arms: int, tie_break: str = TIE_RANDOM) -> ClientStrategy:
    kind, c = parse_strategy(spec)
    if kind == UCB1:
        return UCB1Client(num_arms, tie_break)
    if kind == EPS_GREEDY:
        return EpsGreedyClient(num_arms, c, tie_break)
    return ThompsonClient(num_arms, tie_break)
