"""JSON experiment configs."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from importlib import resources
from pathlib import Path

import jsonschema
import numpy as np

from .clients import parse_strategy
from .environment import BanditInstance, fixed_instance, random_instance
from .harness import DEFAULT_SEEDS, DEFAULT_STRIDE, RunConfig
from .servers import parse_policy

DEFAULT_POLICIES = ("tal:g1=1,g2=0", "twl:g1=1,g2=0", "ng", "na")


class ConfigError(ValueError):
    """Invalid experiment configuration; the message names the line or field."""


def load_schema() -> dict:
    return json.loads(resources.files(__package__).joinpath("config_schema.json").read_text())


@dataclass
class ExperimentConfig:
    T: int
    instance: object = "fixed"
    strategies: object = "ucb1"
    policies: list[str] = field(default_factory=lambda: list(DEFAULT_POLICIES))
    seed: int = 0
    seeds: int = DEFAULT_SEEDS
    checkpoint_stride: int = DEFAULT_STRIDE
    workers: int | None = None
    out: str = "results"
    plots: bool = True
    tie_break: str = "random"
    realized_regret: bool = False
    base_dir: Path = field(default=Path("."), repr=False)

    def to_json(self) -> dict:
        d = asdict(self)
        d.pop("base_dir")
        return d

    def build_instance(self) -> tuple[BanditInstance, str]:
        spec = self.instance
        try:
            if spec == "fixed":
                return fixed_instance(), "fixed"
            if "random" in spec:
                r = spec["random"]
                seed = r.get("seed", self.seed)
                rng = np.random.Generator(np.random.PCG64(seed))
                return random_instance(r["M"], r["K"], rng), f"random:{seed}"
            if "file" in spec:
                path = Path(spec["file"])
                if not path.is_absolute():
                    path = self.base_dir / path
                return BanditInstance.load(path), f"file:{spec['file']}"
            return BanditInstance.from_json(spec), "inline"
        except (OSError, ValueError, KeyError) as exc:
            raise ConfigError(f"field 'instance': {exc}") from None

    def run_configs(self) -> list[RunConfig]:
        """One template per policy; seeds are filled in by the batch runner."""
        instance, source = self.build_instance()
        strategies = self.strategies
        if isinstance(strategies, str):
            strategies = [strategies] * instance.num_clients
        if len(strategies) != instance.num_clients:
            raise ConfigError(
                f"field 'strategies': {len(strategies)} entries but the instance has M={instance.num_clients} clients")
        for i, s in enumerate(strategies):
            try:
                parse_strategy(s)
            except ValueError as exc:
                raise ConfigError(f"field 'strategies[{i}]': {exc}") from None
        out = []
        for i, p in enumerate(self.policies):
            try:
                parse_policy(p)
            except ValueError as exc:
                raise ConfigError(f"field 'policies[{i}]': {exc}") from None
            try:
                out.append(RunConfig(instance, strategies, p, self.T, self.seed, self.checkpoint_stride,
                                     self.tie_break, self.realized_regret, instance_source=source))
            except ValueError as exc:
                raise ConfigError(str(exc)) from None
        return out

    def seed_list(self) -> list[int]:
        return [self.seed + i for i in range(self.seeds)]


def parse_config(text: str, base_dir: Path = Path(".")) -> ExperimentConfig:
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
    validator = jsonschema.Draft202012Validator(load_schema())
    errors = sorted(validator.iter_errors(obj), key=lambda e: [str(p) for p in e.absolute_path])
    if errors:
        err = errors[0]
        where = ".".join(str(p) for p in err.absolute_path) or "<root>"
        raise ConfigError(f"field '{where}': {err.message}")
    cfg = ExperimentConfig(base_dir=base_dir, **obj)
    cfg.run_configs()  # semantic checks
    return cfg


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    return parse_config(text, path.parent)
