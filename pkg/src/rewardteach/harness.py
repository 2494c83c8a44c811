"""Episode driver, seeded batches, random-instance sweeps and aggregation."""

from __future__ import annotations

import csv
import json
import logging
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import backend as _backend
from .clients import TIE_LOWEST, TIE_RANDOM, parse_strategy
from .environment import BanditInstance, global_summary, random_instance
from .servers import NG, TAL, TWL, EpochSchedule, PolicySpec, parse_policy

log = logging.getLogger(__name__)

DEFAULT_STRIDE = 100
DEFAULT_SEEDS = 50

# labels of the independent random streams derived from a master seed
ENV_STREAM, CLIENT_STREAM, SERVER_STREAM, GLOBAL_STREAM, REGRET_STREAM = range(5)
INSTANCE_STREAM, SWEEP_RUN_STREAM = 100, 101

RUN_COLUMNS = ("t", "regret_cum", "cost_cum")
AGGREGATE_COLUMNS = ("t", "regret_mean", "regret_p10", "regret_p90", "cost_mean", "cost_p10", "cost_p90")
SCATTER_COLUMNS = ("instance_id", "final_regret", "final_cost")


def _generator(seed: int, *key: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=key)))


def make_streams(seed: int, num_clients: int) -> dict:
    """Labelled, mutually independent streams for one run.

    Adding or removing a consumer never shifts another consumer's draws.
    """
    if seed < 0:
        raise ValueError("seeds must be non-negative integers")
    return {
        "environment": _generator(seed, ENV_STREAM),
        "clients": [_generator(seed, CLIENT_STREAM, m) for m in range(num_clients)],
        "server": _generator(seed, SERVER_STREAM),
        "global": _generator(seed, GLOBAL_STREAM),
        "regret": _generator(seed, REGRET_STREAM),
    }


@dataclass
class RunConfig:
    instance: BanditInstance
    strategies: list[str]
    policy: str
    horizon: int
    seed: int = 0
    checkpoint_stride: int = DEFAULT_STRIDE
    tie_break: str = TIE_RANDOM
    realized_regret: bool = False
    record: bool = False
    instance_source: str = "custom"

    def __post_init__(self):
        if isinstance(self.strategies, str):
            self.strategies = [self.strategies] * self.instance.num_clients
        self.strategies = list(self.strategies)
        self.validate()

    def validate(self) -> None:
        M, K = self.instance.num_clients, self.instance.num_arms
        if len(self.strategies) != M:
            raise ValueError(f"strategies has {len(self.strategies)} entries but the instance has M={M} clients")
        for s in self.strategies:
            parse_strategy(s)
        spec = self.policy_spec
        if spec.kind == NG and spec.target is not None and spec.target >= K:
            raise ValueError(f"ng target {spec.target + 1} exceeds K={K}")
        if self.horizon < K:
            raise ValueError(f"horizon T={self.horizon} must be at least K={K}")
        if self.checkpoint_stride < 1:
            raise ValueError("checkpoint stride must be positive")
        if self.tie_break not in (TIE_RANDOM, TIE_LOWEST):
            raise ValueError(f"tie_break must be {TIE_RANDOM!r} or {TIE_LOWEST!r}")
        if self.seed < 0:
            raise ValueError("seed must be non-negative")

    @property
    def policy_spec(self) -> PolicySpec:
        return parse_policy(self.policy)

    def with_seed(self, seed: int) -> "RunConfig":
        return RunConfig(**{**self.__dict__, "seed": seed})


@dataclass
class MetricsSeries:
    seed: int
    policy: str
    strategies: list[str]
    horizon: int
    t: np.ndarray
    regret: np.ndarray
    cost: np.ndarray
    client_regret: np.ndarray
    client_cost: np.ndarray
    server: dict
    schedule: dict | None = None
    realized_regret: float | None = None
    learning_spread_max: int = 0
    learning_spread_violations: int = 0
    roundoff_clips: int = 0
    optimal_arm: int = 0
    client_counts: np.ndarray | None = None
    actions: np.ndarray | None = None
    raw: np.ndarray | None = None
    sigma: np.ndarray | None = None
    meta: dict = field(default_factory=dict)

    @property
    def final_regret(self) -> float:
        return float(self.regret[-1])

    @property
    def final_cost(self) -> float:
        return float(self.cost[-1])

    def at(self, t: int) -> tuple[float, float]:
        """(regret, cost) at checkpoint t."""
        idx = int(np.searchsorted(self.t, t))
        if idx >= len(self.t) or self.t[idx] != t:
            raise KeyError(f"no checkpoint at t={t}")
        return float(self.regret[idx]), float(self.cost[idx])

    @property
    def learned_target(self) -> int | None:
        return self.server.get("target") if self.policy.startswith(TAL) else None

    @property
    def switch_step(self) -> int | None:
        return self.server.get("switch_step")

    @property
    def surviving_arms(self) -> list[int] | None:
        return self.server.get("active")

    def summary(self) -> dict:
        """Summary record; arm numbers are 1-based."""
        one = lambda k: None if k is None else int(k) + 1  # noqa: E731
        out = {
            "seed": int(self.seed),
            "policy": self.policy,
            "strategies": list(self.strategies),
            "T": int(self.horizon),
            "k_target_learned": one(self.learned_target),
            "t_phase_switch": self.switch_step,
            "final_regret": self.final_regret,
            "final_cost": self.final_cost,
            "schedule": self.schedule,
        }
        if self.policy.startswith(TWL):
            out["final_active"] = [one(k) for k in self.surviving_arms]
            out["eliminations"] = {str(one(k)): {"epoch": v[0], "t": v[1]}
                                   for k, v in self.server["eliminated"].items()}
        if self.policy.startswith(NG):
            out["ng_target"] = one(self.server["target"])
        if "epochs" in self.server:
            out["epoch_boundaries"] = [{"t": t, "psi": p} for t, p in self.server["epochs"]]
        if self.policy.startswith(TAL):
            out["learning_spread_max"] = self.learning_spread_max
            out["learning_spread_violations"] = self.learning_spread_violations
        if self.realized_regret is not None:
            out["final_realized_regret"] = self.realized_regret
        out["optimal_arm"] = self.optimal_arm + 1
        out["client_final_regret"] = [float(v) for v in self.client_regret]
        out["client_final_cost"] = [float(v) for v in self.client_cost]
        out["roundoff_clips"] = self.roundoff_clips
        out.update(self.meta)
        return out


def run_episode(config: RunConfig, backend: str | None = None) -> MetricsSeries:
    """Simulate one seeded run of the synchronous teach/observe protocol."""
    config.validate()
    inst = config.instance
    spec = config.policy_spec
    streams = make_streams(config.seed, inst.num_clients)
    out = _backend.simulate(
        inst, config.strategies, spec, config.horizon, config.checkpoint_stride, streams,
        tie_break=config.tie_break, realized=config.realized_regret, record=config.record,
        backend=backend,
    )
    schedule = None
    if spec.kind in (TAL, TWL):
        schedule = EpochSchedule(config.horizon, inst.num_arms, inst.num_clients).to_json()
    meta = {
        "instance_source": config.instance_source,
        "instance": inst.to_json(),
        "checkpoint_stride": config.checkpoint_stride,
        "tie_break": config.tie_break,
        "regret_kind": "pseudo",
    }
    if any(parse_strategy(s)[0] == "ts" for s in config.strategies):
        meta["ts_convention"] = "Beta(1,1) priors, Bernoulli binarisation of revealed rewards"
    return MetricsSeries(
        seed=config.seed,
        policy=spec.label(),
        strategies=list(config.strategies),
        horizon=config.horizon,
        t=out["checkpoint_t"],
        regret=out["regret"],
        cost=out["cost"],
        client_regret=out["client_regret"],
        client_cost=out["client_cost"],
        server=out["server"],
        schedule=schedule,
        realized_regret=out["realized_regret"],
        learning_spread_max=out["learning_spread_max"],
        learning_spread_violations=out["learning_spread_violations"],
        roundoff_clips=out["roundoff_clips"],
        optimal_arm=global_summary(inst).optimal_arm,
        client_counts=out["client_counts"],
        actions=out["actions"],
        raw=out["raw"],
        sigma=out["sigma"],
        meta=meta,
    )


@dataclass
class RunFailure:
    seed: int
    error: str
    kind: str


class BatchResult(list):
    """Completed runs in seed order; failed seeds are listed in ``failures``."""

    def __init__(self, runs=(), failures=()):
        super().__init__(runs)
        self.failures: list[RunFailure] = list(failures)


def _run_one(args):
    config, backend = args
    try:
        return run_episode(config, backend)
    except Exception as exc:  # reported per seed, the batch keeps going
        return RunFailure(config.seed, str(exc), type(exc).__name__)


def default_workers() -> int:
    return len(os.sched_getaffinity(0)) if hasattr(os, "sched_getaffinity") else (os.cpu_count() or 1)


def run_batch(template: RunConfig, seeds, workers: int | None = 1, backend: str | None = None) -> BatchResult:
    """One run per seed; results come back in seed-list order for any worker count."""
    seeds = [int(s) for s in seeds]
    jobs = [(template.with_seed(s), backend) for s in seeds]
    workers = default_workers() if workers is None else max(1, int(workers))
    if workers == 1 or len(jobs) <= 1:
        results = [_run_one(j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=min(workers, len(jobs))) as pool:
            results = list(pool.map(_run_one, jobs))
    runs = [r for r in results if isinstance(r, MetricsSeries)]
    failures = [r for r in results if isinstance(r, RunFailure)]
    for f in failures:
        log.error("run with seed %d failed: %s: %s", f.seed, f.kind, f.error)
    return BatchResult(runs, failures)


@dataclass
class AggregateStats:
    t: np.ndarray
    regret_mean: np.ndarray
    regret_p10: np.ndarray
    regret_p90: np.ndarray
    cost_mean: np.ndarray
    cost_p10: np.ndarray
    cost_p90: np.ndarray
    n_runs: int
    seeds: list[int]

    def rows(self):
        for i, t in enumerate(self.t):
            yield (int(t), self.regret_mean[i], self.regret_p10[i], self.regret_p90[i],
                   self.cost_mean[i], self.cost_p10[i], self.cost_p90[i])


def aggregate(series: list[MetricsSeries]) -> AggregateStats:
    """Mean and empirical 10th / 90th percentiles per checkpoint (an 80% band).

    Runs are sorted by seed first so the result does not depend on how they
    were scheduled.
    """
    if not series:
        raise ValueError("cannot aggregate an empty list of runs")
    series = sorted(series, key=lambda s: s.seed)
    grid = series[0].t
    for s in series[1:]:
        if not np.array_equal(s.t, grid):
            raise ValueError("all runs must share the same checkpoint grid")
    R = np.vstack([s.regret for s in series])
    C = np.vstack([s.cost for s in series])
    rp10, rp90 = np.percentile(R, [10, 90], axis=0)
    cp10, cp90 = np.percentile(C, [10, 90], axis=0)
    return AggregateStats(grid.copy(), R.mean(axis=0), rp10, rp90, C.mean(axis=0), cp10, cp90,
                          len(series), [s.seed for s in series])


@dataclass
class ScatterPoint:
    instance_id: int
    final_regret: float
    final_cost: float


def sweep_instance(seed: int, index: int, num_clients: int, num_arms: int) -> BanditInstance:
    return random_instance(num_clients, num_arms, _generator(seed, INSTANCE_STREAM, index))


def sweep_run_seed(seed: int, index: int) -> int:
    return int(np.random.SeedSequence(seed, spawn_key=(SWEEP_RUN_STREAM, index)).generate_state(1, np.uint64)[0])


def sweep_random_instances(n_instances: int, num_clients: int, num_arms: int, strategies, policies,
                           horizon: int, seed: int = 0, workers: int | None = 1,
                           checkpoint_stride: int | None = None, backend: str | None = None
                           ) -> dict[str, list[ScatterPoint]]:
    """Run every policy once on each of ``n_instances`` uniform random instances.

    Instance i and its run seed depend only on (seed, i), so all policies see
    the same instances and the same environment draws.
    """
    if n_instances < 1:
        raise ValueError("need at least one instance")
    stride = checkpoint_stride or horizon
    out = {}
    for policy in policies:
        jobs = []
        for i in range(n_instances):
            cfg = RunConfig(sweep_instance(seed, i, num_clients, num_arms), strategies, policy, horizon,
                            sweep_run_seed(seed, i), stride, instance_source=f"random:{seed}:{i}")
            jobs.append((cfg, backend))
        n_workers = default_workers() if workers is None else max(1, int(workers))
        if n_workers == 1:
            results = [_run_one(j) for j in jobs]
        else:
            with ProcessPoolExecutor(max_workers=min(n_workers, len(jobs))) as pool:
                results = list(pool.map(_run_one, jobs))
        points = []
        for i, r in enumerate(results):
            if isinstance(r, RunFailure):
                log.error("sweep instance %d (%s) failed: %s", i, policy, r.error)
                continue
            points.append(ScatterPoint(i, r.final_regret, r.final_cost))
        out[parse_policy(policy).label()] = points
    return out


# ---- artifact I/O ----------------------------------------------------------

def _num(x) -> str:
    return repr(float(x))


def write_run_csv(series: MetricsSeries, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(RUN_COLUMNS)
        for t, r, c in zip(series.t, series.regret, series.cost):
            w.writerow((int(t), _num(r), _num(c)))


def write_summary_json(series: MetricsSeries, path) -> None:
    Path(path).write_text(json.dumps(series.summary(), indent=2, sort_keys=True) + "\n")


def write_aggregate_csv(stats: AggregateStats, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(AGGREGATE_COLUMNS)
        for row in stats.rows():
            w.writerow((row[0],) + tuple(_num(v) for v in row[1:]))


def write_scatter_csv(points: list[ScatterPoint], path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SCATTER_COLUMNS)
        for p in points:
            w.writerow((p.instance_id, _num(p.final_regret), _num(p.final_cost)))


class SchemaError(ValueError):
    """A CSV does not have the columns its kind requires."""


def read_csv(path, columns) -> dict[str, np.ndarray]:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise SchemaError(f"{path}: empty file") from None
        missing = [c for c in columns if c not in header]
        if missing:
            raise SchemaError(f"{path}: missing column {missing[0]!r} (have {', '.join(header)})")
        idx = [header.index(c) for c in columns]
        rows = []
        for lineno, row in enumerate(reader, start=2):
            try:
                rows.append([float(row[i]) for i in idx])
            except (ValueError, IndexError):
                bad = columns[0] if not row else next(
                    (c for c, i in zip(columns, idx) if i >= len(row) or not _isfloat(row[i])), columns[0])
                raise SchemaError(f"{path}:{lineno}: bad value in column {bad!r}") from None
    data = np.array(rows, dtype=float).reshape(-1, len(columns))
    return {c: data[:, i] for i, c in enumerate(columns)}


def _isfloat(s: str) -> bool:
    try:
        float(s)
    except ValueError:
        return False
    return True
