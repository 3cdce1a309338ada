"""Stochastic k-TSP reduction: order statistics, thresholds, orderings, budgeted play."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Protocol, Sequence

import numpy as np

from .grades import (DEFAULT_TOL, LEVEL_TOL, SelectionCostPMF, compute_grade_table,
                     merge_levels, selection_cost_pmf)
from .strategies import Game, StrategyOutcome
from .systems import MarkovSystem, MetricInstance, RandomSource, step

THRESHOLD_QUANTILE = 0.3
PREFIX_FACTOR = 10.0
CHAIN_MOVE_FACTOR = 100.0


class ThresholdUnreachable(ValueError):
    pass


@dataclass(frozen=True)
class ThresholdSelection:
    sorted_grades: tuple[float, ...]
    chosen_index: int
    gamma_j: float
    gamma_j_plus_1: float


class OrderingSolver(Protocol):
    """Non-adaptive tour: a permutation of the candidate chains fixed before any play."""

    def __call__(self, instance: MetricInstance, pmfs: dict[int, SelectionCostPMF],
                 K: int, location: int | None = None) -> list[int]: ...


def chain_pmfs(instance: MetricInstance, tol: float = DEFAULT_TOL) -> dict[int, SelectionCostPMF]:
    """Selection-cost law of every available chain from its current position."""
    out = {}
    for i, (chain, pos, ok) in enumerate(zip(instance.chains, instance.chain_positions,
                                              instance.available)):
        if ok:
            grades = compute_grade_table(chain, 1.0, tol).grade
            out[i] = selection_cost_pmf(chain.with_start(pos), tol, grades=grades)
    return out


def poisson_binomial_tail(probs: Sequence[float], K: int) -> float:
    """Pr[at least K successes] for independent Bernoulli(p_i)."""
    dist = np.zeros(len(probs) + 1)
    dist[0] = 1.0
    for p in probs:
        dist[1:] = dist[1:] * (1 - p) + dist[:-1] * p
        dist[0] *= 1 - p
    return float(min(1.0, max(0.0, dist[K:].sum())))


def order_statistic_cdf(pmfs: Sequence[SelectionCostPMF], K: int, x: float) -> float:
    """Pr[K-th smallest of the independent selection costs <= x]."""
    if not 1 <= K <= len(pmfs):
        raise ValueError(f"K={K} out of range for {len(pmfs)} chains")
    return poisson_binomial_tail([p.cdf(x) for p in pmfs], K)


def select_threshold(pmfs: Sequence[SelectionCostPMF], grades: Sequence[np.ndarray],
                     K: int, quantile: float = THRESHOLD_QUANTILE) -> ThresholdSelection:
    """Find consecutive grade levels straddling the ``quantile`` of the K-th order statistic.

    ``grades`` holds the grade vector of each prefix chain; levels closer than
    the merge tolerance count as one.
    """
    if K > len(pmfs):
        raise ValueError(f"K={K} exceeds prefix size {len(pmfs)}")
    levels, _ = merge_levels(np.concatenate([np.asarray(g) for g in grades]))
    probs = [order_statistic_cdf(pmfs, K, g) for g in levels]
    for q, pr in enumerate(probs):
        if pr >= quantile:
            if q == 0:
                return ThresholdSelection(tuple(levels), 0, 0.0, float(levels[0]))
            return ThresholdSelection(tuple(levels), q, float(levels[q - 1]), float(levels[q]))
    raise ThresholdUnreachable("threshold unreachable")


def default_ordering(instance: MetricInstance, pmfs: dict[int, SelectionCostPMF],
                     K: int, location: int | None = None) -> list[int]:
    """Greedy tour: next is the unvisited chain minimising distance + median selection cost."""
    left = sorted(pmfs)
    medians = {i: pmfs[i].median() for i in left}
    order: list[int] = []
    cur = location
    while left:
        best = min(left, key=lambda i: (instance.dist(cur, i) + medians[i], i))
        order.append(best)
        left.remove(best)
        cur = best
    return order


def longest_prefix(instance: MetricInstance, order: Sequence[int], limit: float,
                   location: int | None = None) -> list[int]:
    """Longest prefix whose hop distances (first hop from ``location`` included) fit in ``limit``."""
    prefix, spent, cur = [], 0.0, location
    for i in order:
        d = instance.dist(cur, i)
        if spent + d > limit:
            break
        spent += d
        prefix.append(i)
        cur = i
    return prefix


def run_budget_mg_metric(instance: MetricInstance, K: int, B: float, alpha: float = 1.0,
                         solver: OrderingSolver = default_ordering,
                         rng: RandomSource | None = None, location: int | None = None,
                         tol: float = DEFAULT_TOL
                         ) -> tuple[MetricInstance, int, StrategyOutcome]:
    """One budgeted pass: order chains, cut a prefix, visit it once with a grade threshold.

    A chain is left when its next move would push its own movement above
    ``100 alpha B`` or when its current grade exceeds ``gamma_{j+1}``.
    """
    if B <= 0 or alpha <= 0:
        raise ValueError("B and alpha must be positive")
    rng = rng if rng is not None else RandomSource(0)
    game = Game(instance, rng, location)
    pmfs = chain_pmfs(instance, tol)
    if not pmfs or K <= 0:
        return instance, K, game.out
    order = list(solver(instance, pmfs, K, location))
    prefix = longest_prefix(instance, order, PREFIX_FACTOR * alpha * B, location)
    if not prefix or K > len(prefix):
        return instance, K, game.out
    tables = {i: compute_grade_table(instance.chains[i], 1.0, tol) for i in prefix}
    sel = select_threshold([pmfs[i] for i in prefix], [tables[i].grade for i in prefix], K)
    cap = CHAIN_MOVE_FACTOR * alpha * B
    limit = sel.gamma_j_plus_1 + LEVEL_TOL
    for i in prefix:
        if K <= 0:
            break
        game.switch(i)
        spent = 0.0
        grade = tables[i].grade
        while game.avail[i]:
            c = game.next_cost(i)
            if spent + c > cap or grade[game.pos[i]] > limit:
                break
            spent += c
            if game.play():
                K -= 1
    return game.result(), K, game.out


def run_fair_greedy(chains: Sequence[MarkovSystem], K: int, fair_budget: float,
                    rng: RandomSource, tol: float = DEFAULT_TOL) -> tuple[int, float, float]:
    """Reference play of the fair game: always advance the globally lowest-grade chain.

    A finished chain is charged its prevailing cost. Play halts at ``K``
    rewards, or when the chosen chain's prospective prevailing cost would push
    the fair total past ``fair_budget``.
    """
    if fair_budget <= 0:
        raise ValueError("fair_budget must be positive")
    grades = [compute_grade_table(c, 1.0, tol).grade for c in chains]
    pos = [c.s for c in chains]
    prevailing = [float(g[p]) for g, p in zip(grades, pos)]
    done = [p == c.t for p, c in zip(pos, chains)]
    rewards, fair, movement = 0, 0.0, 0.0
    while rewards < K:
        live = [i for i in range(len(chains)) if not done[i]]
        if not live:
            break
        i = min(live, key=lambda j: (grades[j][pos[j]], j))
        if fair + max(prevailing[i], grades[i][pos[i]]) > fair_budget:
            break
        v, c = step(chains[i], pos[i], rng)
        movement += c
        pos[i] = v
        prevailing[i] = max(prevailing[i], float(grades[i][v]))
        if v == chains[i].t:
            done[i] = True
            rewards += 1
            fair += prevailing[i]
    return rewards, fair, movement
