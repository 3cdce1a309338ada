"""Command-line entry point: ``markovgame <subcommand> ...``."""

from __future__ import annotations

import argparse
import json
import sys

from .grades import DEFAULT_TOL, compute_grade_table, selection_cost_pmf
from .harness import (STRATEGIES, ExperimentConfig, UsageError, compare_strategies,
                      run_experiment, write_report)
from .oracle import ORACLE_STATE_CAP, InfeasibleError, OracleTooLarge, solve_optimal
from .scenarios import SCENARIOS, GenParams, gen_random_instance, scenario
from .systems import ValidationError, parse_instance, write_instance


def _emit(obj, out: str | None = None) -> None:
    text = json.dumps(obj, indent=1, sort_keys=True)
    if out:
        with open(out, "w") as fh:
            fh.write(text + "\n")
    else:
        print(text)


def _params(pairs: list[str]) -> dict:
    """Parse ``key=value`` pairs; values are read as JSON when possible."""
    out = {}
    for p in pairs or []:
        if "=" not in p:
            raise UsageError(f"expected key=value, got {p!r}")
        k, v = p.split("=", 1)
        try:
            out[k] = json.loads(v)
        except json.JSONDecodeError:
            out[k] = v
    return out


def _start(text: str | None) -> int | None:
    if text is None or text == "root":
        return None
    return int(text)


def cmd_validate(a) -> int:
    inst = parse_instance(a.file)
    print(f"ok: {inst.n} chains, K={inst.reward_target}")
    return 0


def cmd_grade(a) -> int:
    inst = parse_instance(a.file)
    rows = []
    for i, chain in enumerate(inst.chains):
        table = compute_grade_table(chain, a.switch_cost, a.tol)
        for u, name in enumerate(chain.states):
            rows.append({"chain": i, "state": name, "grade": float(table.grade[u]),
                         "dummy_grade": None if u == chain.t else float(table.dummy_grade[u])})
    _emit({"switch_cost": a.switch_cost, "grades": rows})
    return 0


def cmd_pmf(a) -> int:
    inst = parse_instance(a.file)
    out = []
    for i, (chain, pos) in enumerate(zip(inst.chains, inst.chain_positions)):
        pmf = selection_cost_pmf(chain.with_start(pos), a.tol)
        out.append({"chain": i, "support": pmf.support.tolist(), "mass": pmf.mass.tolist(),
                    "mean": pmf.mean()})
    _emit(out)
    return 0


def _config(a, strategy: str) -> ExperimentConfig:
    src = {}
    if a.instance:
        src["instance_path"] = a.instance
    elif a.scenario:
        src["scenario"] = a.scenario
        src["scenario_params"] = _params(a.param)
    else:
        src["gen"] = GenParams(n_chains=a.n_chains, max_states=a.max_states, metric=a.metric,
                               K=a.k or 1)
        src["gen_seed"] = a.gen_seed
    return ExperimentConfig(
        strategy=strategy, trials=a.trials, seed=a.seed, K=a.k, start=_start(a.start),
        profile=a.profile, beta=a.beta, c=a.c, alpha=a.alpha, budget=a.budget,
        switch_cost=a.switch_cost, tol=a.tol, run_oracle=not a.no_oracle,
        workers=a.workers, **src)


def cmd_simulate(a) -> int:
    report = run_experiment(_config(a, a.strategy))
    if a.out:
        run = write_report(report, a.out)
        print(f"run {run} appended to {a.out}", file=sys.stderr)
    summary = report.footer()
    if a.digests:
        summary["trials"] = report.trials
    _emit(summary)
    return 0


def cmd_compare(a) -> int:
    cmp = compare_strategies([_config(a, s) for s in a.strategies])
    if a.json:
        _emit(cmp.to_dict())
    else:
        print(cmp.table())
    return 0


def cmd_oracle(a) -> int:
    inst = parse_instance(a.file)
    res = solve_optimal(inst, a.k, _start(a.start), tol=a.tol, cap=a.cap)
    out = res.to_dict()
    if a.policy:
        out["policy"] = res.policy_table(inst)
    _emit(out)
    return 0


def cmd_scenario(a) -> int:
    inst = scenario(a.name, **_params(a.param))
    write_instance(inst, a.out)
    print(f"wrote {a.out}")
    return 0


def cmd_gen(a) -> int:
    p = GenParams(n_chains=a.n_chains, max_states=a.max_states, cost_lo=a.cost_lo,
                  cost_hi=a.cost_hi, metric=a.metric, K=a.k)
    write_instance(gen_random_instance(p, a.seed), a.out)
    print(f"wrote {a.out}")
    return 0


def _add_experiment_args(p: argparse.ArgumentParser) -> None:
    src = p.add_mutually_exclusive_group()
    src.add_argument("--instance", help="instance JSON file")
    src.add_argument("--scenario", choices=SCENARIOS)
    p.add_argument("--param", action="append", metavar="KEY=VALUE",
                   help="scenario parameter (repeatable)")
    p.add_argument("--n-chains", type=int, default=3)
    p.add_argument("--max-states", type=int, default=4)
    p.add_argument("--metric", choices=("unit", "random"), default="unit")
    p.add_argument("--gen-seed", type=int, default=0)
    p.add_argument("--trials", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--k", type=int, default=None)
    p.add_argument("--start", default=None, help="'root' or a chain id")
    p.add_argument("--profile", choices=("experiment", "paper"), default="experiment")
    p.add_argument("--beta", type=float, default=None)
    p.add_argument("--c", type=float, default=None)
    p.add_argument("--alpha", type=float, default=1.0)
    p.add_argument("--budget", type=float, default=1.0)
    p.add_argument("--switch-cost", type=float, default=1.0)
    p.add_argument("--tol", type=float, default=DEFAULT_TOL)
    p.add_argument("--no-oracle", action="store_true")
    p.add_argument("--workers", type=int, default=1)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="markovgame", description=__doc__)
    sub = ap.add_subparsers(dest="cmd", required=True)

    p = sub.add_parser("validate", help="check an instance file")
    p.add_argument("file")
    p.set_defaults(fn=cmd_validate)

    p = sub.add_parser("grade", help="grades and dummy grades of every state")
    p.add_argument("file")
    p.add_argument("--switch-cost", type=float, default=1.0)
    p.add_argument("--tol", type=float, default=DEFAULT_TOL)
    p.set_defaults(fn=cmd_grade)

    p = sub.add_parser("pmf", help="selection-cost distribution of every chain")
    p.add_argument("file")
    p.add_argument("--tol", type=float, default=DEFAULT_TOL)
    p.set_defaults(fn=cmd_pmf)

    p = sub.add_parser("simulate", help="seeded multi-trial run of one strategy")
    p.add_argument("--strategy", choices=sorted(STRATEGIES), default="index")
    p.add_argument("--out", help="append the JSONL report here")
    p.add_argument("--digests", action="store_true", help="print per-trial digests too")
    _add_experiment_args(p)
    p.set_defaults(fn=cmd_simulate)

    p = sub.add_parser("compare", help="several strategies on one instance")
    p.add_argument("strategies", nargs="*", choices=sorted(STRATEGIES), metavar="STRATEGY")
    p.add_argument("--json", action="store_true")
    _add_experiment_args(p)
    p.set_defaults(fn=cmd_compare)

    p = sub.add_parser("oracle", help="exact optimal expected cost")
    p.add_argument("file")
    p.add_argument("--k", type=int, default=None)
    p.add_argument("--start", default=None, help="'root' or a chain id")
    p.add_argument("--tol", type=float, default=1e-10)
    p.add_argument("--cap", type=int, default=ORACLE_STATE_CAP)
    p.add_argument("--policy", action="store_true", help="include the policy table")
    p.set_defaults(fn=cmd_oracle)

    p = sub.add_parser("scenario", help="write a built-in instance")
    p.add_argument("name", choices=SCENARIOS)
    p.add_argument("param", nargs="*", metavar="KEY=VALUE")
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_scenario)

    p = sub.add_parser("gen", help="write a seeded random instance")
    p.add_argument("--n-chains", type=int, default=3)
    p.add_argument("--max-states", type=int, default=4)
    p.add_argument("--cost-lo", type=float, default=0.1)
    p.add_argument("--cost-hi", type=float, default=2.0)
    p.add_argument("--metric", choices=("unit", "random"), default="unit")
    p.add_argument("--k", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_gen)
    return ap


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except ValidationError as exc:
        for v in exc.violations:
            print(f"invalid: {v}", file=sys.stderr)
        return 1
    except (UsageError, InfeasibleError, OracleTooLarge, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
