"""Episode-loop backend selection.

The compiled kernel is used when it imports; otherwise the pure-Python loop.
Set ``REWARDTEACH_BACKEND=python`` to force the fallback.
"""

from __future__ import annotations

import logging
import os

import numpy as np
from scipy.special import ndtri

from . import _pyloop
from .clients import parse_strategy
from .environment import TRUNCATED_GAUSSIAN
from .servers import EpochSchedule, NGServer

log = logging.getLogger(__name__)

try:
    from . import _kernel
except ImportError as exc:  # pragma: no cover - depends on the build
    _kernel = None
    log.debug("compiled kernel unavailable: %s", exc)

COMPILED = "compiled"
PYTHON = "python"


def _select() -> str:
    wanted = os.environ.get("REWARDTEACH_BACKEND", "").strip().lower()
    if wanted == PYTHON or _kernel is None:
        return PYTHON
    return COMPILED


BACKEND = _select()


def available() -> list[str]:
    return [PYTHON] + ([COMPILED] if _kernel is not None else [])


def _kernel_simulate(instance, strategies, policy, horizon, stride, streams, *, tie_break="random",
                     realized=False, record=False):
    M, K = instance.num_clients, instance.num_arms
    truncated = instance.reward_kind == TRUNCATED_GAUSSIAN

    def draws(rng):
        # bulk draw == the same sequence of per-step rng.random() calls
        u = rng.random((horizon, M))
        return ndtri(u) if truncated else u

    parsed = [parse_strategy(s) for s in strategies]
    codes = np.array([_kernel.STRATEGY_CODES[kind] for kind, _ in parsed], dtype=np.int64)
    eps_c = np.array([c for _, c in parsed], dtype=np.float64)
    nu = np.ascontiguousarray(instance.global_means, dtype=np.float64)
    gap = nu.max() - nu

    ng_target = -1
    if policy.kind == "ng":
        ng_target = NGServer(K, M, streams["server"], policy.target).target
    if policy.kind in ("tal", "twl"):
        sched = EpochSchedule(horizon, K, M)
        f, F = sched.f, sched.F
    else:
        f = F = (horizon + 1,)

    return _kernel.simulate(
        np.ascontiguousarray(instance.local_means),
        nu,
        gap,
        truncated,
        float(instance.stddev),
        draws(streams["environment"]),
        codes,
        eps_c,
        tie_break == "lowest",
        list(streams["clients"]),
        _kernel.POLICY_CODES[policy.kind],
        float(policy.gamma1),
        float(policy.gamma2),
        ng_target,
        np.array(f, dtype=np.int64),
        np.array(F, dtype=np.int64),
        draws(streams["global"]) if policy.kind == "na" else None,
        draws(streams["regret"]) if realized else None,
        int(horizon),
        int(stride),
        bool(record),
    )


def simulate(*args, backend: str | None = None, **kwargs):
    """Dispatch one episode to the selected (or explicitly named) backend."""
    backend = backend or BACKEND
    if backend == COMPILED:
        if _kernel is None:
            raise RuntimeError("compiled kernel is not built")
        return _kernel_simulate(*args, **kwargs)
    if backend == PYTHON:
        return _pyloop.simulate(*args, **kwargs)
    raise ValueError(f"unknown backend {backend!r}")
