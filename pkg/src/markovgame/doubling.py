"""Phase loop with geometrically growing budgets around a budgeted subroutine."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

from .grades import DEFAULT_TOL
from .metric import OrderingSolver, default_ordering, run_budget_mg_metric
from .strategies import StrategyOutcome, run_budget_mg_unit
from .systems import MetricInstance, RandomSource, SwitchEvent

# subroutine(instance, k, B, rng, location) -> (instance, k, outcome)
Subroutine = Callable[..., tuple[MetricInstance, int, StrategyOutcome]]

THEORY_C = 50000.0


@dataclass(frozen=True)
class DoublingParams:
    beta: float = 1.5
    c: float = 1.0
    alpha: float = 1.0
    max_phases: int = 200
    switch_cost: float = 1.0

    @classmethod
    def profile(cls, name: str, **overrides) -> "DoublingParams":
        base = {"experiment": cls(), "paper": cls(c=THEORY_C)}[name]
        return cls(**{**base.__dict__, **overrides})


def run_doubling(instance: MetricInstance, K: int, variant: str = "unit",
                 params: DoublingParams = DoublingParams(), rng: RandomSource | None = None,
                 subroutine: Subroutine | None = None,
                 solver: OrderingSolver = default_ordering,
                 tol: float = DEFAULT_TOL) -> StrategyOutcome:
    """Call the budgeted subroutine with budget ``c * beta**i`` in phase i until k <= 0.

    The unit variant resumes next phase where the last one stopped, keeping that
    chain active. The metric variant walks back to the root between phases.
    """
    if not 1 < params.beta < 2:
        raise ValueError("beta must lie in (1, 2)")
    if params.c <= 0:
        raise ValueError("c must be positive")
    if variant not in ("unit", "metric"):
        raise ValueError(f"unknown variant {variant!r}")
    rng = rng if rng is not None else RandomSource(0)
    if subroutine is None:
        if variant == "unit":
            def subroutine(inst, k, B, rng, location):
                return run_budget_mg_unit(inst, k, B, rng, location,
                                          switch_cost=params.switch_cost, tol=tol)
        else:
            def subroutine(inst, k, B, rng, location):
                return run_budget_mg_metric(inst, k, B, params.alpha, solver, rng,
                                            location, tol=tol)

    total = StrategyOutcome()
    k, location, inst = K, None, instance
    for phase in range(1, params.max_phases + 1):
        B = params.c * params.beta**phase
        inst, k, out = subroutine(inst, k, B, rng, location)
        total.absorb(out)
        total.phase_log.append((phase, B, k))
        location = out.final_location
        if k <= 0:
            break
        if variant == "metric" and location is not None:
            back = StrategyOutcome()
            d = inst.dist(location, None)
            back.trajectory.switches.append(SwitchEvent(location, None, d))
            back.switching_cost = d
            total.absorb(back)
            location = None
    else:
        total.truncated = True
    total.final_location = location
    return total
