"""Server reward-adjustment policies: TAL, TWL and the NG / NA baselines.

Every policy implements ``adjust(t, arms, raw)`` which ingests the step-t
observations (one pulled arm and raw local reward per client), applies any
epoch update, and returns the per-client adjustment sigma such that the
revealed reward ``raw + sigma`` stays in [0, 1].
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field

from .environment import BanditInstance, reward_from_uniform

TAL = "tal"
TWL = "twl"
NG = "ng"
NA = "na"
IDENTITY = "none"

LEARNING = "learning"
TEACHING = "teaching"


class ScheduleError(RuntimeError):
    """Epoch statistics were read before their window was complete."""


@dataclass(frozen=True)
class EpochSchedule:
    """Per-epoch pull counts ``f`` and their running totals ``F``.

    ``f(psi) = ceil(2**(2 psi + 3) * ln(2 K T^2) / M)``. Epochs are listed up
    to the first one whose cumulative count exceeds the horizon; later epochs
    can never complete.
    """

    horizon: int
    num_arms: int
    num_clients: int
    f: tuple[int, ...] = field(init=False)
    F: tuple[int, ...] = field(init=False)

    def __post_init__(self):
        if self.horizon < 1 or self.num_arms < 2 or self.num_clients < 1:
            raise ValueError("schedule needs T >= 1, K >= 2, M >= 1")
        f, F = [], []
        total, psi = 0, 1
        while True:
            n = math.ceil(self.f_unrounded(psi))
            total += n
            f.append(n)
            F.append(total)
            if total > self.horizon:
                break
            psi += 1
        object.__setattr__(self, "f", tuple(f))
        object.__setattr__(self, "F", tuple(F))

    @property
    def log_term(self) -> float:
        return math.log(2.0 * self.num_arms * float(self.horizon) ** 2)

    def f_unrounded(self, psi: int) -> float:
        return 2.0 ** (2 * psi + 3) * self.log_term / self.num_clients

    @staticmethod
    def radius(psi: int) -> float:
        """Confidence radius 2**(-psi-2) used for epoch psi."""
        return 2.0 ** (-psi - 2)

    def hoeffding_radius(self, psi: int, rounded: bool = True) -> float:
        n = self.f[psi - 1] if rounded else self.f_unrounded(psi)
        return math.sqrt(self.log_term / (2.0 * self.num_clients * n))

    @property
    def num_epochs(self) -> int:
        return len(self.f)

    def pulls_through(self, psi: int) -> int:
        """F(psi), with F(0) = 0."""
        return self.F[psi - 1] if psi > 0 else 0

    def to_json(self) -> dict:
        return {"f": list(self.f), "F": list(self.F), "radius": [self.radius(p) for p in range(1, self.num_epochs + 1)]}


class EpochStats:
    """Raw-reward window sums keyed by (arm, client, epoch).

    The n-th pull of arm k by client m lands in the window of the epoch psi
    with F(psi-1) < n <= F(psi), independently of the server's current epoch.
    """

    def __init__(self, schedule: EpochSchedule):
        self.schedule = schedule
        k, m = schedule.num_arms, schedule.num_clients
        self.counts = [[0] * m for _ in range(k)]
        self._cursor = [[0] * m for _ in range(k)]
        self._sums = [[[0.0] * schedule.num_epochs for _ in range(m)] for _ in range(k)]

    def ingest(self, client: int, arm: int, raw: float) -> None:
        n = self.counts[arm][client] + 1
        self.counts[arm][client] = n
        e = self._cursor[arm][client]
        if n > self.schedule.F[e]:
            e += 1
            self._cursor[arm][client] = e
        self._sums[arm][client][e] += raw

    def drop(self, arm: int) -> None:
        """Discard the window sums of an arm (pull counts are kept)."""
        for row in self._sums[arm]:
            for e in range(len(row)):
                row[e] = 0.0

    def complete(self, psi: int, arms) -> bool:
        need = self.schedule.pulls_through(psi)
        return all(n >= need for k in arms for n in self.counts[k])

    def window_mean(self, arm: int, client: int, psi: int) -> float:
        if self.counts[arm][client] < self.schedule.pulls_through(psi):
            raise ScheduleError(f"window {psi} of arm {arm}, client {client} is incomplete")
        return self._sums[arm][client][psi - 1] / self.schedule.f[psi - 1]

    def global_estimate(self, arm: int, psi: int) -> float:
        total = 0.0
        for m in range(self.schedule.num_clients):
            total += self.window_mean(arm, m, psi)
        return total / self.schedule.num_clients


def epoch_bounds(stats: EpochStats, psi: int, arms) -> dict[int, tuple[float, float]]:
    """``{arm: (UCB, LCB)}`` for epoch psi; the bounds are not clipped to [0, 1]."""
    radius = EpochSchedule.radius(psi)
    out = {}
    for k in arms:
        nu_hat = stats.global_estimate(k, psi)
        out[k] = (nu_hat + radius, nu_hat - radius)
    return out


class ServerPolicy:
    name = ""

    def __init__(self, num_arms: int, num_clients: int):
        self.num_arms = num_arms
        self.num_clients = num_clients

    def adjust(self, t: int, arms: list[int], raw: list[float]) -> list[float]:
        raise NotImplementedError

    def metadata(self) -> dict:
        return {}


class IdentityServer(ServerPolicy):
    """Never adjusts; test stub."""

    name = IDENTITY

    def adjust(self, t, arms, raw):
        return [0.0] * len(arms)


class TALServer(ServerPolicy):
    """Teaching-after-learning.

    While learning, every revealed reward is ``gamma1``. Once an arm's lower
    bound reaches every other arm's upper bound it becomes the target; from
    then on the target's raw rewards pass through and all other arms reveal
    ``gamma2``. If no arm is ever identified the run stays in learning.
    """

    name = TAL

    def __init__(self, schedule: EpochSchedule, gamma1: float = 1.0, gamma2: float = 0.0):
        super().__init__(schedule.num_arms, schedule.num_clients)
        _check_gamma(gamma1, gamma2)
        self.schedule = schedule
        self.gamma1, self.gamma2 = float(gamma1), float(gamma2)
        self.stats = EpochStats(schedule)
        self.phase = LEARNING
        self.psi = 1
        self.target: int | None = None
        self.switch_step: int | None = None
        self.epoch_log: list[tuple[int, int]] = []

    def _check(self, t: int) -> None:
        psi = self.psi
        if psi > self.schedule.num_epochs or not self.stats.complete(psi, range(self.num_arms)):
            return
        bounds = epoch_bounds(self.stats, psi, range(self.num_arms))
        self.epoch_log.append((t, psi))
        for j in range(self.num_arms):
            lcb = bounds[j][1]
            if all(lcb >= bounds[k][0] for k in range(self.num_arms) if k != j):
                self.target, self.phase, self.switch_step = j, TEACHING, t
                return
        self.psi = psi + 1

    def adjust(self, t, arms, raw):
        for m, (k, x) in enumerate(zip(arms, raw)):
            self.stats.ingest(m, k, x)
        if self.phase == LEARNING:
            self._check(t)
        if self.phase == LEARNING:
            return [self.gamma1 - x for x in raw]
        return [0.0 if k == self.target else self.gamma2 - x for k, x in zip(arms, raw)]

    def metadata(self):
        return {
            "phase": self.phase,
            "target": self.target,
            "switch_step": self.switch_step,
            "epochs": list(self.epoch_log),
        }


class TWLServer(ServerPolicy):
    """Teaching-while-learning via successive elimination on the global model."""

    name = TWL

    def __init__(self, schedule: EpochSchedule, gamma1: float = 1.0, gamma2: float = 0.0):
        super().__init__(schedule.num_arms, schedule.num_clients)
        _check_gamma(gamma1, gamma2)
        self.schedule = schedule
        self.gamma1, self.gamma2 = float(gamma1), float(gamma2)
        self.stats = EpochStats(schedule)
        self.active = list(range(self.num_arms))
        self._is_active = [True] * self.num_arms
        self.psi = 1
        self.epoch_log: list[tuple[int, int]] = []
        # arm -> (epoch, step) of elimination
        self.eliminated: dict[int, tuple[int, int]] = {}

    def _check(self, t: int) -> None:
        psi = self.psi
        if psi > self.schedule.num_epochs or not self.stats.complete(psi, self.active):
            return
        bounds = epoch_bounds(self.stats, psi, self.active)
        self.epoch_log.append((t, psi))
        keep = [j for j in self.active if all(bounds[j][0] >= bounds[k][1] for k in self.active)]
        for j in self.active:
            if j not in keep:
                self.eliminated[j] = (psi, t)
                self._is_active[j] = False
                self.stats.drop(j)
        self.active = keep
        self.psi = psi + 1

    def adjust(self, t, arms, raw):
        for m, (k, x) in enumerate(zip(arms, raw)):
            if self._is_active[k]:
                self.stats.ingest(m, k, x)
            else:
                self.stats.counts[k][m] += 1
        if len(self.active) > 1:
            self._check(t)
        single = len(self.active) == 1
        sigma = []
        for k, x in zip(arms, raw):
            if not self._is_active[k]:
                sigma.append(self.gamma2 - x)
            elif single:
                sigma.append(0.0)
            else:
                sigma.append(self.gamma1 - x)
        return sigma

    def metadata(self):
        return {
            "active": list(self.active),
            "eliminated": {k: list(v) for k, v in sorted(self.eliminated.items())},
            "epochs": list(self.epoch_log),
        }


class NGServer(ServerPolicy):
    """Naive guess: fix one target arm, zero every other arm's reward."""

    name = NG

    def __init__(self, num_arms: int, num_clients: int, rng=None, target: int | None = None):
        super().__init__(num_arms, num_clients)
        if target is None:
            if rng is None:
                raise ValueError("NG needs an rng or an explicit target")
            target = min(int(rng.random() * num_arms), num_arms - 1)
        if not 0 <= target < num_arms:
            raise ValueError(f"NG target {target} out of range")
        self.target = target

    def adjust(self, t, arms, raw):
        return [0.0 if k == self.target else -x for k, x in zip(arms, raw)]

    def metadata(self):
        return {"target": self.target}


class NAServer(ServerPolicy):
    """Naive align: reveal a fresh global-reward sample in place of the local one.

    Draws one uniform per client per step from its own stream, in client order.
    """

    name = NA

    def __init__(self, instance: BanditInstance, rng):
        super().__init__(instance.num_arms, instance.num_clients)
        self.instance = instance
        self.rng = rng

    def adjust(self, t, arms, raw):
        inst = self.instance
        nu = inst.global_means
        out = []
        for k, x in zip(arms, raw):
            y = reward_from_uniform(nu[k], self.rng.random(), inst.reward_kind, inst.stddev)
            out.append(y - x)
        return out


def _check_gamma(gamma1: float, gamma2: float) -> None:
    for g in (gamma1, gamma2):
        if not 0.0 <= g <= 1.0:
            raise ValueError(f"gamma values must lie in [0, 1], got {g!r}")


@dataclass(frozen=True)
class PolicySpec:
    kind: str
    gamma1: float = 1.0
    gamma2: float = 0.0
    target: int | None = None  # 0-based; NG only

    def label(self) -> str:
        if self.kind in (TAL, TWL):
            return f"{self.kind}:g1={_fmt(self.gamma1)},g2={_fmt(self.gamma2)}"
        if self.kind == NG and self.target is not None:
            return f"ng:target={self.target + 1}"
        return self.kind

    def slug(self) -> str:
        return re.sub(r"[^a-z0-9.]+", "_", self.label()).strip("_")


def _fmt(x: float) -> str:
    return f"{x:g}"


_KV_RE = re.compile(r"^\s*(\w+)\s*=\s*([^,\s]+)\s*$")


def parse_policy(spec: str) -> PolicySpec:
    """Parse ``tal:g1=<f>,g2=<f>``, ``twl:...``, ``ng[:target=<arm>]``, ``na`` or ``none``.

    NG targets are 1-based arm numbers. Omitted gammas default to (1, 0).
    """
    text = spec.strip().lower()
    kind, _, rest = text.partition(":")
    params = {}
    if rest:
        for part in rest.split(","):
            match = _KV_RE.match(part)
            if not match:
                raise ValueError(f"malformed policy parameter {part!r} in {spec!r}")
            params[match.group(1)] = match.group(2)
    try:
        if kind in (TAL, TWL):
            unknown = set(params) - {"g1", "g2"}
            if unknown:
                raise ValueError(f"unknown parameter(s) {sorted(unknown)} for {kind}")
            g1 = float(params.get("g1", 1.0))
            g2 = float(params.get("g2", 0.0))
            _check_gamma(g1, g2)
            return PolicySpec(kind, g1, g2)
        if kind == NG:
            unknown = set(params) - {"target"}
            if unknown:
                raise ValueError(f"unknown parameter(s) {sorted(unknown)} for ng")
            target = int(params["target"]) - 1 if "target" in params else None
            if target is not None and target < 0:
                raise ValueError("ng target is a 1-based arm number")
            return PolicySpec(NG, 0.0, 0.0, target)
        if kind in (NA, IDENTITY):
            if params:
                raise ValueError(f"{kind} takes no parameters")
            return PolicySpec(kind, 0.0, 0.0)
    except ValueError as exc:
        raise ValueError(f"bad policy spec {spec!r}: {exc}") from None
    raise ValueError(f"unknown policy {spec!r}; expected tal, twl, ng, na or none")


def make_server(spec: PolicySpec, instance: BanditInstance, horizon: int, rng) -> ServerPolicy:
    """Build a policy. ``rng`` is the server stream (NG guess, NA global samples)."""
    M, K = instance.num_clients, instance.num_arms
    if spec.kind in (TAL, TWL):
        schedule = EpochSchedule(horizon, K, M)
        cls = TALServer if spec.kind == TAL else TWLServer
        return cls(schedule, spec.gamma1, spec.gamma2)
    if spec.kind == NG:
        if spec.target is not None and spec.target >= K:
            raise ValueError(f"ng target {spec.target + 1} exceeds K={K}")
        return NGServer(K, M, rng, spec.target)
    if spec.kind == NA:
        return NAServer(instance, rng)
    return IdentityServer(K, M)
