"""Compare the compiled episode kernel with the pure-Python loop.

    python3 benchmarks/bench_kernel.py [--T 50000] [--repeat 3]

Reports steps per second for each backend and checks the outputs match.
"""

import argparse
import time

import numpy as np

from rewardteach import backend
from rewardteach.environment import fixed_instance
from rewardteach.harness import RunConfig, run_episode

CASES = [("ucb1", "tal:g1=1,g2=0"), ("ucb1", "twl:g1=1,g2=0"), ("ucb1", "na"),
         ("eps_greedy:c=1", "tal:g1=0,g2=0"), ("ts", "twl:g1=1,g2=0")]


def best_time(config, which, repeat):
    times, out = [], None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = run_episode(config, which)
        times.append(time.perf_counter() - t0)
    return min(times), out


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--T", type=int, default=50_000)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    if backend.COMPILED not in backend.available():
        raise SystemExit("compiled kernel is not built; run `pip install --no-build-isolation -e .`")

    steps = args.T * fixed_instance().num_clients
    print(f"{'strategy':<16}{'policy':<16}{'python steps/s':>16}{'compiled steps/s':>18}{'speedup':>9}  equal")
    for strategy, policy in CASES:
        cfg = RunConfig(fixed_instance(), strategy, policy, args.T, seed=0)
        tp, a = best_time(cfg, backend.PYTHON, 1)
        tc, b = best_time(cfg, backend.COMPILED, args.repeat)
        same = np.array_equal(a.regret, b.regret) and np.array_equal(a.cost, b.cost)
        print(f"{strategy:<16}{policy:<16}{steps / tp:>16,.0f}{steps / tc:>18,.0f}{tp / tc:>8.1f}x  {same}")


if __name__ == "__main__":
    main()
