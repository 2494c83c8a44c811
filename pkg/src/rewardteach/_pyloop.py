"""Pure-Python episode loop built from the strategy and server classes.

This is the fallback backend and the reference the compiled kernel is
checked against.
"""

from __future__ import annotations

import numpy as np

from .clients import make_client, reveal
from .environment import reward_from_uniform, sample_local_reward
from .servers import LEARNING, TALServer, make_server


def simulate(instance, strategies, policy, horizon, stride, streams, *, tie_break="random",
             realized=False, record=False):
    """Run one episode. ``streams`` maps labels to ``numpy.random.Generator``.

    Returns the same dict layout as the compiled kernel.
    """
    M, K = instance.num_clients, instance.num_arms
    nu = instance.global_means
    gap = (nu.max() - nu).tolist()
    nu_best = float(nu.max())
    clients = [make_client(s, K, tie_break) for s in strategies]
    client_rngs = streams["clients"]
    env_rng = streams["environment"]
    y_rng = streams["regret"] if realized else None
    server = make_server(policy, instance, horizon, streams["server"] if policy.kind == "ng" else streams["global"])
    is_tal = isinstance(server, TALServer)

    checkpoints, regrets, costs = [], [], []
    client_regret = [0.0] * M
    client_cost = [0.0] * M
    regret = cost = realized_regret = 0.0
    spread_max = spread_violations = clips = 0
    if record:
        rec_arms = np.zeros((horizon, M), dtype=np.int64)
        rec_raw = np.zeros((horizon, M))
        rec_sigma = np.zeros((horizon, M))

    for t in range(1, horizon + 1):
        arms = [c.choose(t, client_rngs[m]) for m, c in enumerate(clients)]
        raw = [sample_local_reward(instance, m, k, env_rng) for m, k in enumerate(arms)]
        sigma = server.adjust(t, arms, raw)
        learning = is_tal and server.phase == LEARNING
        for m, c in enumerate(clients):
            adj, clipped = reveal(raw[m], sigma[m])
            clips += clipped
            c.observe(arms[m], adj, client_rngs[m])
        if learning:
            for c in clients:
                spread = max(c.counts) - min(c.counts)
                spread_max = max(spread_max, spread)
                spread_violations += spread > 1

        reg_inc = cost_inc = 0.0
        for m in range(M):
            reg_inc += gap[arms[m]]
            cost_inc += abs(sigma[m])
            client_regret[m] += gap[arms[m]]
            client_cost[m] += abs(sigma[m])
        regret += reg_inc
        cost += cost_inc
        if y_rng is not None:
            y_inc = 0.0
            for m in range(M):
                y = reward_from_uniform(nu[arms[m]], y_rng.random(), instance.reward_kind, instance.stddev)
                y_inc += nu_best - y
            realized_regret += y_inc
        if record:
            rec_arms[t - 1] = arms
            rec_raw[t - 1] = raw
            rec_sigma[t - 1] = sigma
        if t % stride == 0 or t == horizon:
            checkpoints.append(t)
            regrets.append(regret)
            costs.append(cost)

    return {
        "checkpoint_t": np.array(checkpoints, dtype=np.int64),
        "regret": np.array(regrets),
        "cost": np.array(costs),
        "client_regret": np.array(client_regret),
        "client_cost": np.array(client_cost),
        "realized_regret": realized_regret if realized else None,
        "server": server.metadata(),
        "learning_spread_max": int(spread_max),
        "learning_spread_violations": int(spread_violations),
        "roundoff_clips": int(clips),
        "actions": rec_arms if record else None,
        "raw": rec_raw if record else None,
        "sigma": rec_sigma if record else None,
        "client_counts": np.array([c.counts for c in clients], dtype=np.int64),
    }
