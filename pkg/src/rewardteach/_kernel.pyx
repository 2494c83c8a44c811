# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled episode loop.

Mirrors ``rewardteach._pyloop.simulate`` operation for operation: same
floating-point expression order, same draws from the same numpy bit
generators (``next_double`` and ``random_beta``), so both backends emit
bit-identical results for a given seed.
"""

from cpython.pycapsule cimport PyCapsule_GetPointer
from libc.math cimport log, sqrt, fabs, ldexp, INFINITY
from libc.stdlib cimport malloc, free
from numpy.random cimport bitgen_t
from numpy.random.c_distributions cimport random_beta

import numpy as np

from .clients import RangeViolation, ROUNDOFF_TOL

cdef enum:
    MAX_ARMS = 4096

# strategy codes
cdef enum:
    S_UCB1 = 0
    S_EPS = 1
    S_TS = 2

# policy codes
cdef enum:
    P_NONE = 0
    P_TAL = 1
    P_TWL = 2
    P_NG = 3
    P_NA = 4

STRATEGY_CODES = {"ucb1": S_UCB1, "eps_greedy": S_EPS, "ts": S_TS}
POLICY_CODES = {"none": P_NONE, "tal": P_TAL, "twl": P_TWL, "ng": P_NG, "na": P_NA}


cdef inline bitgen_t* _bitgen(object gen) except NULL:
    return <bitgen_t*> PyCapsule_GetPointer(gen.bit_generator.capsule, "BitGenerator")


cdef inline double _uniform(bitgen_t* bg) noexcept nogil:
    return bg.next_double(bg.state)


cdef inline long _uniform_index(bitgen_t* bg, long n) noexcept nogil:
    cdef long j = <long>(_uniform(bg) * <double>n)
    if j > n - 1:
        j = n - 1
    return j


cdef inline double _reward(double mean, double u, bint tg, double stddev) noexcept nogil:
    # u is a uniform for Bernoulli, a standard normal quantile for truncated Gaussian
    cdef double v
    if not tg:
        return 1.0 if u < mean else 0.0
    v = mean + stddev * u
    if v < 0.0:
        return 0.0
    if v > 1.0:
        return 1.0
    return v


def simulate(
    const double[:, ::1] means,
    const double[::1] nu,
    const double[::1] gap,
    bint truncated,
    double stddev,
    const double[:, ::1] env_draws,
    const long[::1] strategy,
    const double[::1] eps_c,
    bint tie_lowest,
    list client_rngs,
    int policy,
    double gamma1,
    double gamma2,
    long ng_target,
    const long[::1] f_sched,
    const long[::1] F_sched,
    object na_draws,
    object y_draws,
    long horizon,
    long stride,
    bint record,
):
    cdef Py_ssize_t M = means.shape[0]
    cdef Py_ssize_t K = means.shape[1]
    cdef Py_ssize_t E = f_sched.shape[0]
    cdef Py_ssize_t m, k, j, e
    cdef long t, n, nt, need, arm, spread, cmin, cmax
    cdef double adj, v, best, bonus, eps, tot, radius
    cdef double reg_inc, cost_inc, y_inc, nu_best
    cdef double regret = 0.0, cost = 0.0, realized = 0.0
    cdef bint learning, ok, single
    cdef long ties[MAX_ARMS]

    if K > MAX_ARMS:
        raise ValueError(f"at most {MAX_ARMS} arms supported by the compiled kernel")
    if env_draws.shape[0] < horizon or env_draws.shape[1] != M:
        raise ValueError("environment draws must have shape (T, M)")

    cdef const double[:, ::1] na_v
    cdef const double[:, ::1] y_v
    cdef bint has_na = na_draws is not None
    cdef bint has_y = y_draws is not None
    if has_na:
        na_v = na_draws
    if has_y:
        y_v = y_draws

    cdef bitgen_t** bgs = <bitgen_t**> malloc(M * sizeof(bitgen_t*))
    if bgs == NULL:
        raise MemoryError()

    # client state
    counts_np = np.zeros((M, K), dtype=np.int64)
    sums_np = np.zeros((M, K), dtype=np.float64)
    alpha_np = np.ones((M, K), dtype=np.float64)
    beta_np = np.ones((M, K), dtype=np.float64)
    cdef long[:, ::1] counts = counts_np
    cdef double[:, ::1] sums = sums_np
    cdef double[:, ::1] alpha = alpha_np
    cdef double[:, ::1] beta = beta_np

    # server state
    scount_np = np.zeros((K, M), dtype=np.int64)
    cursor_np = np.zeros((K, M), dtype=np.int64)
    wsum_np = np.zeros((K, M, E), dtype=np.float64)
    active_np = np.ones(K, dtype=np.int64)
    ucb_np = np.zeros(K, dtype=np.float64)
    lcb_np = np.zeros(K, dtype=np.float64)
    cdef long[:, ::1] scount = scount_np
    cdef long[:, ::1] cursor = cursor_np
    cdef double[:, :, ::1] wsum = wsum_np
    cdef long[::1] active = active_np
    cdef double[::1] ucb = ucb_np
    cdef double[::1] lcb = lcb_np
    cdef long n_active = K
    cdef long psi = 1
    cdef long target = -1
    cdef long switch_step = -1
    cdef bint teaching = False
    epoch_log = []
    eliminated = {}

    # per-step scratch
    arms_np = np.zeros(M, dtype=np.int64)
    raw_np = np.zeros(M, dtype=np.float64)
    sigma_np = np.zeros(M, dtype=np.float64)
    cdef long[::1] arms = arms_np
    cdef double[::1] raw = raw_np
    cdef double[::1] sigma = sigma_np

    # metrics
    n_ck = horizon // stride + (1 if horizon % stride else 0)
    ck_t_np = np.zeros(n_ck, dtype=np.int64)
    ck_r_np = np.zeros(n_ck, dtype=np.float64)
    ck_c_np = np.zeros(n_ck, dtype=np.float64)
    cdef long[::1] ck_t = ck_t_np
    cdef double[::1] ck_r = ck_r_np
    cdef double[::1] ck_c = ck_c_np
    cdef Py_ssize_t ck = 0
    client_regret_np = np.zeros(M, dtype=np.float64)
    client_cost_np = np.zeros(M, dtype=np.float64)
    cdef double[::1] client_regret = client_regret_np
    cdef double[::1] client_cost = client_cost_np
    cdef long spread_max = 0, spread_violations = 0, clips = 0

    cdef long[:, ::1] rec_arms
    cdef double[:, ::1] rec_raw
    cdef double[:, ::1] rec_sigma
    rec_arms_np = rec_raw_np = rec_sigma_np = None
    if record:
        rec_arms_np = np.zeros((horizon, M), dtype=np.int64)
        rec_raw_np = np.zeros((horizon, M), dtype=np.float64)
        rec_sigma_np = np.zeros((horizon, M), dtype=np.float64)
        rec_arms = rec_arms_np
        rec_raw = rec_raw_np
        rec_sigma = rec_sigma_np

    nu_best = -INFINITY
    for k in range(K):
        if nu[k] > nu_best:
            nu_best = nu[k]

    try:
        for m in range(M):
            bgs[m] = _bitgen(client_rngs[m])

        for t in range(1, horizon + 1):
            # (1) clients choose
            for m in range(M):
                arm = -1
                if strategy[m] == S_TS:
                    best = -INFINITY
                    for k in range(K):
                        v = random_beta(bgs[m], alpha[m, k], beta[m, k])
                        if v > best:
                            best = v
                            arm = k
                else:
                    if strategy[m] == S_EPS:
                        eps = eps_c[m] * <double>K / <double>t
                        if eps > 1.0:
                            eps = 1.0
                        if _uniform(bgs[m]) < eps:
                            arm = _uniform_index(bgs[m], K)
                    else:
                        for k in range(K):
                            if counts[m, k] == 0:
                                arm = k
                                break
                    if arm < 0:
                        if strategy[m] == S_UCB1:
                            bonus = 2.0 * log(<double>t)
                        best = -INFINITY
                        nt = 0
                        for k in range(K):
                            if strategy[m] == S_UCB1:
                                v = sums[m, k] / <double>counts[m, k] + sqrt(bonus / <double>counts[m, k])
                            elif counts[m, k] > 0:
                                v = sums[m, k] / <double>counts[m, k]
                            else:
                                v = 0.0
                            if v > best:
                                best = v
                                ties[0] = k
                                nt = 1
                            elif v == best:
                                ties[nt] = k
                                nt += 1
                        if nt == 1 or tie_lowest:
                            arm = ties[0]
                        else:
                            arm = ties[_uniform_index(bgs[m], nt)]
                arms[m] = arm

            # (2) environment
            for m in range(M):
                raw[m] = _reward(means[m, arms[m]], env_draws[t - 1, m], truncated, stddev)

            # (3) server: ingest, epoch update, adjustment
            if policy == P_TAL or policy == P_TWL:
                for m in range(M):
                    k = arms[m]
                    n = scount[k, m] + 1
                    scount[k, m] = n
                    if active[k]:
                        e = cursor[k, m]
                        if n > F_sched[e]:
                            e += 1
                            cursor[k, m] = e
                        wsum[k, m, e] += raw[m]

            if policy == P_TAL:
                if not teaching and psi <= E:
                    need = F_sched[psi - 1]
                    ok = True
                    for k in range(K):
                        for m in range(M):
                            if scount[k, m] < need:
                                ok = False
                                break
                        if not ok:
                            break
                    if ok:
                        radius = ldexp(1.0, <int>(-psi - 2))
                        for k in range(K):
                            tot = 0.0
                            for m in range(M):
                                tot += wsum[k, m, psi - 1] / <double>f_sched[psi - 1]
                            tot = tot / <double>M
                            ucb[k] = tot + radius
                            lcb[k] = tot - radius
                        epoch_log.append((t, psi))
                        for j in range(K):
                            ok = True
                            for k in range(K):
                                if k != j and not (lcb[j] >= ucb[k]):
                                    ok = False
                                    break
                            if ok:
                                target = j
                                teaching = True
                                switch_step = t
                                break
                        if not teaching:
                            psi += 1
                learning = not teaching
                for m in range(M):
                    if learning:
                        sigma[m] = gamma1 - raw[m]
                    elif arms[m] == target:
                        sigma[m] = 0.0
                    else:
                        sigma[m] = gamma2 - raw[m]
            elif policy == P_TWL:
                if n_active > 1 and psi <= E:
                    need = F_sched[psi - 1]
                    ok = True
                    for k in range(K):
                        if not active[k]:
                            continue
                        for m in range(M):
                            if scount[k, m] < need:
                                ok = False
                                break
                        if not ok:
                            break
                    if ok:
                        radius = ldexp(1.0, <int>(-psi - 2))
                        for k in range(K):
                            if not active[k]:
                                continue
                            tot = 0.0
                            for m in range(M):
                                tot += wsum[k, m, psi - 1] / <double>f_sched[psi - 1]
                            tot = tot / <double>M
                            ucb[k] = tot + radius
                            lcb[k] = tot - radius
                        epoch_log.append((t, psi))
                        nt = 0
                        for j in range(K):
                            if not active[j]:
                                continue
                            ok = True
                            for k in range(K):
                                if active[k] and not (ucb[j] >= lcb[k]):
                                    ok = False
                                    break
                            if not ok:
                                ties[nt] = j
                                nt += 1
                        for j in range(nt):
                            active[ties[j]] = 0
                            eliminated[ties[j]] = (psi, t)
                        n_active -= nt
                        psi += 1
                single = n_active == 1
                for m in range(M):
                    if not active[arms[m]]:
                        sigma[m] = gamma2 - raw[m]
                    elif single:
                        sigma[m] = 0.0
                    else:
                        sigma[m] = gamma1 - raw[m]
            elif policy == P_NG:
                for m in range(M):
                    sigma[m] = 0.0 if arms[m] == ng_target else -raw[m]
            elif policy == P_NA:
                for m in range(M):
                    sigma[m] = _reward(nu[arms[m]], na_v[t - 1, m], truncated, stddev) - raw[m]
            else:
                for m in range(M):
                    sigma[m] = 0.0

            # (4) clients observe the revealed reward
            for m in range(M):
                k = arms[m]
                adj = raw[m] + sigma[m]
                if adj < 0.0 or adj > 1.0:
                    if adj >= -ROUNDOFF_TOL and adj <= 1.0 + ROUNDOFF_TOL:
                        adj = 0.0 if adj < 0.0 else 1.0
                        clips += 1
                    else:
                        raise RangeViolation(
                            f"adjusted reward {adj!r} outside [0, 1] at step {t}, client {m}, "
                            f"arm {k}: raw={raw[m]!r}, sigma={sigma[m]!r}"
                        )
                counts[m, k] += 1
                sums[m, k] += adj
                if strategy[m] == S_TS:
                    if _uniform(bgs[m]) < adj:
                        alpha[m, k] += 1.0
                    else:
                        beta[m, k] += 1.0

            if policy == P_TAL and learning:
                for m in range(M):
                    cmin = counts[m, 0]
                    cmax = cmin
                    for k in range(1, K):
                        if counts[m, k] < cmin:
                            cmin = counts[m, k]
                        if counts[m, k] > cmax:
                            cmax = counts[m, k]
                    spread = cmax - cmin
                    if spread > spread_max:
                        spread_max = spread
                    if spread > 1:
                        spread_violations += 1

            # (5) metrics
            reg_inc = 0.0
            cost_inc = 0.0
            for m in range(M):
                reg_inc += gap[arms[m]]
                cost_inc += fabs(sigma[m])
                client_regret[m] += gap[arms[m]]
                client_cost[m] += fabs(sigma[m])
            regret += reg_inc
            cost += cost_inc
            if has_y:
                y_inc = 0.0
                for m in range(M):
                    y_inc += nu_best - _reward(nu[arms[m]], y_v[t - 1, m], truncated, stddev)
                realized += y_inc
            if record:
                for m in range(M):
                    rec_arms[t - 1, m] = arms[m]
                    rec_raw[t - 1, m] = raw[m]
                    rec_sigma[t - 1, m] = sigma[m]
            if t % stride == 0 or t == horizon:
                ck_t[ck] = t
                ck_r[ck] = regret
                ck_c[ck] = cost
                ck += 1
    finally:
        free(bgs)

    server = {}
    if policy == P_TAL:
        server = {
            "phase": "teaching" if teaching else "learning",
            "target": None if target < 0 else int(target),
            "switch_step": None if switch_step < 0 else int(switch_step),
            "epochs": epoch_log,
        }
    elif policy == P_TWL:
        server = {
            "active": [int(i) for i in np.flatnonzero(active_np)],
            "eliminated": {int(arm_id): list(when) for arm_id, when in sorted(eliminated.items())},
            "epochs": epoch_log,
        }
    elif policy == P_NG:
        server = {"target": int(ng_target)}

    return {
        "checkpoint_t": ck_t_np,
        "regret": ck_r_np,
        "cost": ck_c_np,
        "client_regret": client_regret_np,
        "client_cost": client_cost_np,
        "realized_regret": realized if has_y else None,
        "server": server,
        "learning_spread_max": int(spread_max),
        "learning_spread_violations": int(spread_violations),
        "roundoff_clips": int(clips),
        "actions": rec_arms_np,
        "raw": rec_raw_np,
        "sigma": rec_sigma_np,
        "client_counts": counts_np,
    }
