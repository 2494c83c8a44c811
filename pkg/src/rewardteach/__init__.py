"""Federated bandit simulator with a reward-teaching server."""

from .environment import (
    BanditInstance,
    GlobalSummary,
    fixed_instance,
    global_summary,
    random_instance,
)
from .harness import MetricsSeries, RunConfig, aggregate, run_batch, run_episode
from .backend import BACKEND

__all__ = [
    "BACKEND",
    "BanditInstance",
    "GlobalSummary",
    "MetricsSeries",
    "RunConfig",
    "aggregate",
    "fixed_instance",
    "global_summary",
    "random_instance",
    "run_batch",
    "run_episode",
]

__version__ = "0.1.0"
