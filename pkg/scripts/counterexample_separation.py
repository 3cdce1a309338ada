#!/usr/bin/env python3
"""Index play against the sequential second-kind tour on the counterexample, across eps."""

import argparse

from markovgame.harness import ExperimentConfig, compare_strategies


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--eps", type=float, nargs="+", default=[0.2, 0.1, 0.05])
    ap.add_argument("--n", type=int, default=None,
                    help="chains per kind (default: 200, or 600 below eps 0.1)")
    ap.add_argument("--trials", type=int, default=2000)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--workers", type=int, default=1)
    a = ap.parse_args()

    print(f"{'eps':>6} {'index':>10} {'sequential':>11} {'ratio':>7}")
    for eps in a.eps:
        n = a.n or (200 if eps >= 0.1 else 600)
        cfgs = [ExperimentConfig(strategy=s, trials=a.trials, seed=a.seed,
                                 scenario="dtw_counterexample",
                                 scenario_params={"eps": eps, "n": n},
                                 run_oracle=False, workers=a.workers)
                for s in ("index", "sequential")]
        index, seq = compare_strategies(cfgs).rows
        print(f"{eps:>6g} {index['mean_total']:>10.3f} {seq['mean_total']:>11.3f} "
              f"{index['mean_total'] / seq['mean_total']:>7.2f}")


if __name__ == "__main__":
    main()
