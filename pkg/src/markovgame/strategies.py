"""Playable strategies: the dummy-grade index rule and its budgeted variant."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .grades import DEFAULT_TOL, GradeTable, compute_grade_table
from .systems import (MetricInstance, RandomSource, Segment, SwitchEvent,
                      Trajectory, step)


@dataclass
class StrategyOutcome:
    rewards_collected: int = 0
    movement_cost: float = 0.0
    switching_cost: float = 0.0
    trajectory: Trajectory = field(default_factory=Trajectory)
    phase_log: list[tuple[int, float, int]] = field(default_factory=list)
    truncated: bool = False
    final_location: int | None = None
    index_log: list[float] = field(default_factory=list)

    @property
    def total_cost(self) -> float:
        return self.movement_cost + self.switching_cost

    def absorb(self, other: "StrategyOutcome") -> None:
        """Append a later stretch of play (e.g. one doubling phase) to this record."""
        self.rewards_collected += other.rewards_collected
        self.movement_cost += other.movement_cost
        self.switching_cost += other.switching_cost
        self.trajectory.segments.extend(other.trajectory.segments)
        self.trajectory.switches.extend(other.trajectory.switches)
        self.index_log.extend(other.index_log)
        self.truncated = self.truncated or other.truncated
        self.final_location = other.final_location

    def digest(self) -> dict:
        return {
            "rewards": self.rewards_collected,
            "movement": self.movement_cost,
            "switching": self.switching_cost,
            "total": self.total_cost,
            "steps": sum(len(s.costs) for s in self.trajectory.segments),
            "switches": len(self.trajectory.switches),
            "phases": len(self.phase_log),
            "truncated": self.truncated,
        }


class Game:
    """Mutable play state over an immutable instance: positions, location, costs."""

    def __init__(self, instance: MetricInstance, rng: RandomSource,
                 location: int | None = None):
        self.instance = instance
        self.rng = rng
        self.pos = list(instance.chain_positions)
        self.avail = list(instance.available)
        self.loc = location
        self.out = StrategyOutcome(final_location=location)
        self._seg: Segment | None = None

    def switch(self, j: int | None) -> float:
        d = self.instance.dist(self.loc, j)
        self.out.trajectory.switches.append(SwitchEvent(self.loc, j, d))
        self.out.switching_cost += d
        self.loc = j
        self.out.final_location = j
        self._seg = None
        return d

    def play(self) -> bool:
        """Advance the chain at the current location; True when it hits its target."""
        i = self.loc
        if i is None:
            raise RuntimeError("cannot play at the root")
        chain = self.instance.chains[i]
        u = self.pos[i]
        if self._seg is None:
            self._seg = self.out.trajectory.open_segment(i, u)
        v, c = step(chain, u, self.rng)
        self._seg.states.append(v)
        self._seg.costs.append(c)
        self.out.movement_cost += c
        self.pos[i] = v
        if v == chain.t:
            self.avail[i] = False
            self.out.rewards_collected += 1
            return True
        return False

    def next_cost(self, i: int) -> float:
        return float(self.instance.chains[i].move_cost[self.pos[i]])

    def result(self) -> MetricInstance:
        return self.instance.evolve(self.pos, self.avail)


def grade_tables(instance: MetricInstance, switch_cost: float = 1.0,
                 tol: float = DEFAULT_TOL) -> list[GradeTable]:
    return [compute_grade_table(c, switch_cost, tol) for c in instance.chains]


def current_index(chain, position, active: bool, table: GradeTable) -> float:
    """Grade of the current state if the chain is active, its dummy grade otherwise."""
    u = chain.idx(position)
    if u == chain.t:
        raise ValueError("chain finished")
    return float(table.grade[u] if active else table.dummy_grade[u])


class _IndexBoard:
    """Per-chain index values kept in a numpy array so argmin is cheap."""

    def __init__(self, game: Game, tables: list[GradeTable]):
        self.game = game
        self.tables = tables
        self.values = np.full(game.instance.n, np.inf)
        for i in range(game.instance.n):
            self.refresh(i)

    def refresh(self, i: int) -> None:
        g = self.game
        if not g.avail[i]:
            self.values[i] = np.inf
        elif g.loc == i:
            self.values[i] = self.tables[i].grade[g.pos[i]]
        else:
            self.values[i] = self.tables[i].dummy_grade[g.pos[i]]

    def best(self) -> int | None:
        i = int(np.argmin(self.values))  # first minimum: lowest chain id wins ties
        return None if np.isinf(self.values[i]) else i


def run_index_strategy(instance: MetricInstance, rng: RandomSource,
                       safety_cap: float = 1e12, switch_cost: float = 1.0,
                       location: int | None = None,
                       tol: float = DEFAULT_TOL) -> StrategyOutcome:
    """Always play the chain with the smallest index until enough rewards are in.

    ``switch_cost`` prices the dummy states behind the inactive index; the
    switches themselves are charged at the instance's true distances.
    """
    game = Game(instance, rng, location)
    board = _IndexBoard(game, grade_tables(instance, switch_cost, tol))
    need = instance.reward_target
    while game.out.rewards_collected < need:
        if game.out.total_cost > safety_cap:
            game.out.truncated = True
            break
        i = board.best()
        if i is None:
            break
        if i != game.loc:
            prev = game.loc
            game.out.index_log.append(float(board.values[i]))
            game.switch(i)
            if prev is not None:
                board.refresh(prev)
        game.play()
        board.refresh(i)
    return game.out


def run_budget_mg_unit(instance: MetricInstance, k: int, B: float, rng: RandomSource,
                       location: int | None = None, switch_cost: float = 1.0,
                       stop_at_zero: bool = True, tol: float = DEFAULT_TOL
                       ) -> tuple[MetricInstance, int, StrategyOutcome]:
    """Greedy minimum-index play under separate movement and switching budgets of 2^7 B.

    A move (switch plus one step) is taken only if neither running total would
    exceed its budget; otherwise the phase halts. With ``stop_at_zero=False``
    play continues past the k-th reward while budget and chains remain.
    """
    if B <= 0:
        raise ValueError("B must be positive")
    budget = 2.0**7 * B
    game = Game(instance, rng, location)
    board = _IndexBoard(game, grade_tables(instance, switch_cost, tol))
    while any(game.avail) and (k > 0 or not stop_at_zero):
        i = board.best()
        if i is None:
            break
        sw = instance.dist(game.loc, i) if i != game.loc else 0.0
        mv = game.next_cost(i)
        if game.out.movement_cost + mv > budget or game.out.switching_cost + sw > budget:
            break
        if i != game.loc:
            prev = game.loc
            game.out.index_log.append(float(board.values[i]))
            game.switch(i)
            if prev is not None:
                board.refresh(prev)
        if game.play():
            k -= 1
        board.refresh(i)
    return game.result(), k, game.out


def run_sequential(instance: MetricInstance, order, rng: RandomSource,
                   give_up_grade: float = np.inf, location: int | None = None,
                   tol: float = DEFAULT_TOL) -> StrategyOutcome:
    """Visit chains once each in ``order``; leave a chain when its grade exceeds ``give_up_grade``."""
    game = Game(instance, rng, location)
    tables = grade_tables(instance, 1.0, tol)
    need = instance.reward_target
    for i in order:
        if game.out.rewards_collected >= need:
            break
        if not game.avail[i]:
            continue
        game.switch(i)
        while game.avail[i] and tables[i].grade[game.pos[i]] <= give_up_grade:
            game.play()
    return game.out
