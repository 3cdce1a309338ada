#!/usr/bin/env python3
"""Oracle indifference checks and the index-inconsistency witness for two-point mixtures."""

import argparse
import json

from markovgame.oracle import action_value, banks_sundaram_witness, solve_optimal
from markovgame.scenarios import banks_sundaram


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--x", type=float, default=0.8)
    ap.add_argument("--y", type=float, default=0.4)
    ap.add_argument("--c", type=float, default=0.01)
    a = ap.parse_args()

    for variant in ("mu", "v"):
        inst = banks_sundaram(a.x, a.c, variant=variant)
        st = inst.meta["start"]
        res = solve_optimal(inst, 1, st)
        play = action_value(inst, 1, st, ("play", st), result=res)
        switch = action_value(inst, 1, st, ("switch", 1 - st), result=res)
        print(f"{variant:>3}: a={inst.meta['a']:.6f}  optimum={res.optimal_expected_cost:.6f}  "
              f"play={play:.6f}  switch={switch:.6f}")
    print(json.dumps(banks_sundaram_witness(a.x, a.y, a.c), indent=1))


if __name__ == "__main__":
    main()
