#!/usr/bin/env python3
"""Mean cost over the exact optimum for several strategies on small random instances."""

import argparse

import numpy as np

from markovgame.harness import ExperimentConfig, compare_strategies
from markovgame.scenarios import GenParams

DEFAULT = ["index", "doubling-unit", "doubling-metric", "sequential"]


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--instances", type=int, default=20)
    ap.add_argument("--trials", type=int, default=2000)
    ap.add_argument("--chains", type=int, default=3)
    ap.add_argument("--states", type=int, default=4)
    ap.add_argument("--metric", choices=("unit", "random"), default="unit")
    ap.add_argument("--k", type=int, default=1)
    ap.add_argument("--strategies", nargs="+", default=DEFAULT)
    ap.add_argument("--profile", choices=("experiment", "paper"), default="experiment")
    a = ap.parse_args()

    ratios = {s: [] for s in a.strategies}
    for seed in range(a.instances):
        gen = GenParams(n_chains=a.chains, max_states=a.states, metric=a.metric, K=a.k)
        cmp = compare_strategies([ExperimentConfig(strategy=s, trials=a.trials, seed=seed,
                                                   gen=gen, gen_seed=seed, profile=a.profile)
                                  for s in a.strategies])
        for row in cmp.rows:
            ratios[row["strategy"]].append(row["ratio"])

    print(f"{'strategy':<16} {'median':>8} {'p90':>8} {'max':>8}")
    for s, r in ratios.items():
        r = np.array(r)
        print(f"{s:<16} {np.median(r):>8.3f} {np.quantile(r, 0.9):>8.3f} {r.max():>8.3f}")


if __name__ == "__main__":
    main()
