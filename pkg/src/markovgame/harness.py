"""Seeded multi-trial experiments, oracle comparison and JSONL reports."""

from __future__ import annotations

import json
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Callable, Sequence

import jsonschema
import numpy as np

from . import __version__
from .doubling import DoublingParams, run_doubling
from .grades import DEFAULT_TOL
from .metric import run_budget_mg_metric, run_fair_greedy
from .oracle import ORACLE_STATE_CAP, OracleTooLarge, joint_state_bound, solve_optimal
from .scenarios import GenParams, gen_random_instance, scenario
from .strategies import StrategyOutcome, run_budget_mg_unit, run_index_strategy, run_sequential
from .systems import MetricInstance, RandomSource, parse_instance

QUANTILES = (0.05, 0.25, 0.5, 0.75, 0.95)
COST_FIELDS = ("total", "movement", "switching")


class UsageError(ValueError):
    pass


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything needed to reproduce an experiment.

    Exactly one instance source is used, checked in the order
    ``instance_path``, ``scenario``, ``gen``. ``start`` of ``None`` falls back
    to ``meta["start"]`` of the instance, else the root.
    """

    strategy: str = "index"
    trials: int = 100
    seed: int = 0
    instance_path: str | None = None
    scenario: str | None = None
    scenario_params: dict = field(default_factory=dict)
    gen: GenParams | None = None
    gen_seed: int = 0
    K: int | None = None
    start: int | None = None
    profile: str = "experiment"
    beta: float | None = None
    c: float | None = None
    alpha: float = 1.0
    budget: float = 1.0  # B for the single-phase budgeted strategies
    switch_cost: float = 1.0
    tol: float = DEFAULT_TOL
    max_phases: int = 200
    safety_cap: float = 1e12
    run_oracle: bool = True
    oracle_cap: int = ORACLE_STATE_CAP
    workers: int = 1

    def __post_init__(self):
        if self.strategy not in STRATEGIES:
            raise UsageError(f"unknown strategy {self.strategy!r}; "
                             f"choose from {', '.join(STRATEGIES)}")
        if self.trials < 1:
            raise UsageError("trials must be at least 1")
        if self.beta is not None and not 1 < self.beta < 2:
            raise UsageError("beta must lie in (1, 2)")
        for name in ("c", "alpha", "budget", "tol"):
            v = getattr(self, name)
            if v is not None and v <= 0:
                raise UsageError(f"{name} must be positive")
        if self.profile not in ("experiment", "paper"):
            raise UsageError(f"unknown profile {self.profile!r}")

    def doubling_params(self) -> DoublingParams:
        over = {"alpha": self.alpha, "max_phases": self.max_phases,
                "switch_cost": self.switch_cost}
        if self.beta is not None:
            over["beta"] = self.beta
        if self.c is not None:
            over["c"] = self.c
        return DoublingParams.profile(self.profile, **over)

    def echo(self) -> dict:
        d = asdict(self)
        d["workers"] = None  # execution detail, not part of the result
        return d


def load_instance(cfg: ExperimentConfig) -> MetricInstance:
    if cfg.instance_path is not None:
        inst = parse_instance(cfg.instance_path)
    elif cfg.scenario is not None:
        inst = scenario(cfg.scenario, **cfg.scenario_params)
    elif cfg.gen is not None:
        inst = gen_random_instance(cfg.gen, cfg.gen_seed)
    else:
        raise UsageError("no instance source given")
    if cfg.K is not None:
        inst = replace(inst, reward_target=cfg.K)
    return inst


def resolve_start(cfg: ExperimentConfig, inst: MetricInstance) -> int | None:
    if cfg.start is not None:
        return cfg.start
    return (inst.meta or {}).get("start")


# --- strategies -----------------------------------------------------------

def _index(inst, cfg, rng, start):
    return run_index_strategy(inst, rng, cfg.safety_cap, cfg.switch_cost, start, cfg.tol)


def _doubling(variant):
    def run(inst, cfg, rng, start):
        if start is not None:
            raise UsageError("doubling strategies start at the root")
        return run_doubling(inst, inst.reward_target, variant, cfg.doubling_params(), rng,
                            tol=cfg.tol)
    return run


def _budget_unit(inst, cfg, rng, start):
    _, k, out = run_budget_mg_unit(inst, inst.reward_target, cfg.budget, rng, start,
                                   cfg.switch_cost, tol=cfg.tol)
    out.truncated = k > 0
    return out


def _budget_metric(inst, cfg, rng, start):
    _, k, out = run_budget_mg_metric(inst, inst.reward_target, cfg.budget, cfg.alpha,
                                     rng=rng, location=start, tol=cfg.tol)
    out.truncated = k > 0
    return out


def _fair_greedy(inst, cfg, rng, start):
    chains = [c.with_start(p) for c, p, a in
              zip(inst.chains, inst.chain_positions, inst.available) if a]
    rewards, _, movement = run_fair_greedy(chains, inst.reward_target, cfg.budget, rng,
                                           cfg.tol)
    out = StrategyOutcome(rewards_collected=rewards, movement_cost=movement)
    out.truncated = rewards < inst.reward_target
    return out


def _sequential(inst, cfg, rng, start):
    meta = inst.meta or {}
    order = meta.get("sequential_order", range(inst.n))
    give_up = meta.get("give_up_grade", math.inf)
    return run_sequential(inst, order, rng, give_up, start, cfg.tol)


STRATEGIES: dict[str, Callable] = {
    "index": _index,
    "doubling-unit": _doubling("unit"),
    "doubling-metric": _doubling("metric"),
    "budget-unit": _budget_unit,
    "budget-metric": _budget_metric,
    "fair-greedy": _fair_greedy,
    "sequential": _sequential,
}


def run_trial(inst: MetricInstance, cfg: ExperimentConfig, trial: int) -> dict:
    rng = RandomSource(cfg.seed, trial)
    out = STRATEGIES[cfg.strategy](inst, cfg, rng, resolve_start(cfg, inst))
    return {"trial": trial, **out.digest()}


def _run_chunk(args) -> list[dict]:
    inst, cfg, trials = args
    return [run_trial(inst, cfg, t) for t in trials]


# --- aggregation ----------------------------------------------------------

def aggregate(digests: Sequence[dict], K: int) -> dict:
    agg: dict = {"trials": len(digests)}
    for name in COST_FIELDS:
        x = np.array([d[name] for d in digests], dtype=float)
        se = float(x.std(ddof=1) / math.sqrt(len(x))) if len(x) > 1 else 0.0
        agg[name] = {
            "mean": float(x.mean()),
            "stderr": se,
            "quantiles": {str(q): float(v) for q, v in zip(QUANTILES, np.quantile(x, QUANTILES))},
        }
    ok = [d["rewards"] >= K and not d["truncated"] for d in digests]
    agg["success_rate"] = float(np.mean(ok))
    return agg


@dataclass
class Report:
    config: dict
    trials: list[dict]
    aggregates: dict
    oracle: dict | None
    oracle_status: str  # "ok" | "skipped" | "disabled"
    ratio: float | None
    version: str = __version__

    def footer(self) -> dict:
        return {"type": "aggregate", "config": self.config, "aggregates": self.aggregates,
                "oracle": self.oracle, "oracle_status": self.oracle_status,
                "ratio": self.ratio, "version": self.version}

    def body(self) -> str:
        """Everything except run id and timestamp, as canonical JSON lines."""
        lines = [json.dumps({"type": "trial", **d}, sort_keys=True) for d in self.trials]
        lines.append(json.dumps(self.footer(), sort_keys=True))
        return "\n".join(lines) + "\n"


def oracle_value(inst: MetricInstance, start: int | None, cap: int,
                 tol: float = 1e-10) -> tuple[dict | None, str]:
    if joint_state_bound(inst) > cap:
        return None, "skipped"
    try:
        res = solve_optimal(inst, inst.reward_target, start, tol=tol, cap=cap)
    except OracleTooLarge:
        return None, "skipped"
    return res.to_dict(), "ok"


def _ratio(mean: float, oracle: dict | None) -> float | None:
    if oracle is None:
        return None
    v = oracle["value"]
    if v > 0:
        return mean / v
    return 1.0 if mean == 0 else math.inf


def run_experiment(cfg: ExperimentConfig, instance: MetricInstance | None = None,
                   oracle: tuple[dict | None, str] | None = None) -> Report:
    """Run ``cfg.trials`` seeded trials; trial i always draws from stream i."""
    inst = load_instance(cfg) if instance is None else instance
    idx = list(range(cfg.trials))
    if cfg.workers > 1 and cfg.trials > 1:
        chunks = [idx[w::cfg.workers] for w in range(cfg.workers)]
        with ProcessPoolExecutor(cfg.workers) as pool:
            parts = pool.map(_run_chunk, [(inst, cfg, ch) for ch in chunks])
            digests = sorted((d for part in parts for d in part), key=lambda d: d["trial"])
    else:
        digests = _run_chunk((inst, cfg, idx))
    agg = aggregate(digests, inst.reward_target)
    if oracle is None:
        oracle = (oracle_value(inst, resolve_start(cfg, inst), cfg.oracle_cap)
                  if cfg.run_oracle else (None, "disabled"))
    value, status = oracle
    return Report(cfg.echo(), digests, agg, value, status,
                  _ratio(agg["total"]["mean"], value))


# --- persistence ----------------------------------------------------------

TRIAL_SCHEMA = {
    "type": "object",
    "required": ["run", "type", "trial", "rewards", "movement", "switching", "total",
                 "steps", "switches", "phases", "truncated"],
    "properties": {
        "run": {"type": "integer", "minimum": 1},
        "type": {"const": "trial"},
        "trial": {"type": "integer", "minimum": 0},
        "rewards": {"type": "integer", "minimum": 0},
        "movement": {"type": "number", "minimum": 0},
        "switching": {"type": "number", "minimum": 0},
        "total": {"type": "number", "minimum": 0},
        "steps": {"type": "integer", "minimum": 0},
        "switches": {"type": "integer", "minimum": 0},
        "phases": {"type": "integer", "minimum": 0},
        "truncated": {"type": "boolean"},
    },
}

_STAT = {
    "type": "object",
    "required": ["mean", "stderr", "quantiles"],
    "properties": {"mean": {"type": "number"}, "stderr": {"type": "number", "minimum": 0},
                   "quantiles": {"type": "object"}},
}

FOOTER_SCHEMA = {
    "type": "object",
    "required": ["run", "type", "config", "aggregates", "oracle", "oracle_status",
                 "ratio", "version", "timestamp"],
    "properties": {
        "run": {"type": "integer", "minimum": 1},
        "type": {"const": "aggregate"},
        "config": {"type": "object"},
        "aggregates": {
            "type": "object",
            "required": ["trials", "success_rate", *COST_FIELDS],
            "properties": {"trials": {"type": "integer", "minimum": 1},
                           "success_rate": {"type": "number", "minimum": 0, "maximum": 1},
                           **{k: _STAT for k in COST_FIELDS}},
        },
        "oracle": {"type": ["object", "null"]},
        "oracle_status": {"enum": ["ok", "skipped", "disabled"]},
        "ratio": {"type": ["number", "null"]},
        "version": {"type": "string"},
        "timestamp": {"type": "string"},
    },
}


def _next_run_id(path: Path) -> int:
    if not path.exists():
        return 1
    runs = [json.loads(line)["run"] for line in path.read_text().splitlines() if line.strip()]
    return max(runs, default=0) + 1


def write_report(report: Report, path: str | Path) -> int:
    """Append the report to a JSONL file under a fresh run id; returns that id."""
    path = Path(path)
    run = _next_run_id(path)
    with path.open("a") as fh:
        for d in report.trials:
            fh.write(json.dumps({"run": run, "type": "trial", **d}, sort_keys=True) + "\n")
        footer = {"run": run, **report.footer(),
                  "timestamp": time.strftime("%Y-%m-%dT%H:%M:%S%z")}
        fh.write(json.dumps(footer, sort_keys=True) + "\n")
    return run


def read_report(path: str | Path, run: int | None = None) -> list[dict]:
    """Records of one run (the latest by default), schema-checked."""
    records = [json.loads(line) for line in Path(path).read_text().splitlines() if line.strip()]
    if not records:
        raise ValueError("empty report file")
    run = max(r["run"] for r in records) if run is None else run
    out = [r for r in records if r["run"] == run]
    for r in out:
        jsonschema.validate(r, TRIAL_SCHEMA if r["type"] == "trial" else FOOTER_SCHEMA)
    return out


# --- comparison -----------------------------------------------------------

@dataclass
class Comparison:
    rows: list[dict]
    reports: list[Report]
    oracle: dict | None
    oracle_status: str

    def to_dict(self) -> dict:
        return {"rows": self.rows, "oracle": self.oracle, "oracle_status": self.oracle_status}

    def table(self) -> str:
        head = f"{'strategy':<16} {'success':>8} {'mean':>12} {'stderr':>10} {'ratio':>8}"
        lines = [head]
        for r in self.rows:
            ratio = "-" if r["ratio"] is None else f"{r['ratio']:.3f}"
            lines.append(f"{r['strategy']:<16} {r['success_rate']:>8.3f} {r['mean_total']:>12.4f}"
                         f" {r['stderr_total']:>10.4f} {ratio:>8}")
        return "\n".join(lines)


def compare_strategies(configs: Sequence[ExperimentConfig],
                       instance: MetricInstance | None = None) -> Comparison:
    """Run several strategies on one shared instance; one row each."""
    if len(configs) < 2:
        raise UsageError("comparison needs at least two configs")
    inst = load_instance(configs[0]) if instance is None else instance
    first = configs[0]
    oracle = (oracle_value(inst, resolve_start(first, inst), first.oracle_cap)
              if first.run_oracle else (None, "disabled"))
    reports = [run_experiment(cfg, inst, oracle) for cfg in configs]
    rows = [{
        "strategy": cfg.strategy,
        "success_rate": rep.aggregates["success_rate"],
        "mean_total": rep.aggregates["total"]["mean"],
        "stderr_total": rep.aggregates["total"]["stderr"],
        "mean_movement": rep.aggregates["movement"]["mean"],
        "mean_switching": rep.aggregates["switching"]["mean"],
        "ratio": rep.ratio,
    } for cfg, rep in zip(configs, reports)]
    return Comparison(rows, reports, *oracle)
