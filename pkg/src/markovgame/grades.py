"""Stopping values, grades, prevailing costs and the selection-cost law."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .systems import (MarkovSystem, RandomSource, build_dummy_system,
                      dummy_index_map, sample_to_target)

DEFAULT_TOL = 1e-9
LEVEL_TOL = 1e-9
_PLAY_EPS = 1e-13


class SingularSystemError(np.linalg.LinAlgError):
    pass


@dataclass(frozen=True, eq=False)
class StoppingSolution:
    profit_level: float
    values: np.ndarray
    quit_set: frozenset[int]

    def value(self, system: MarkovSystem, state) -> float:
        return float(self.values[system.idx(state)])


@dataclass(frozen=True, eq=False)
class GradeTable:
    grade: np.ndarray
    dummy_grade: np.ndarray  # nan at the target
    switch_cost_used: float


@dataclass(frozen=True)
class PrevailingRecord:
    prevailing: tuple[float, ...]
    epoch_starts: tuple[int, ...]

    @property
    def n_epochs(self) -> int:
        return len(self.epoch_starts)


@dataclass(frozen=True, eq=False)
class SelectionCostPMF:
    support: np.ndarray
    mass: np.ndarray

    def cdf(self, x: float) -> float:
        return float(self.mass[self.support <= x + LEVEL_TOL].sum())

    def mean(self) -> float:
        return float(self.support @ self.mass)

    def median(self) -> float:
        cum = np.cumsum(self.mass)
        return float(self.support[np.searchsorted(cum, 0.5 - 1e-12)])

    def sample(self, gen: np.random.Generator, size: int) -> np.ndarray:
        return gen.choice(self.support, size=size, p=self.mass / self.mass.sum())

    def as_dict(self) -> dict[float, float]:
        return {float(s): float(m) for s, m in zip(self.support, self.mass)}


def _solve(A: np.ndarray, b: np.ndarray) -> np.ndarray:
    try:
        return np.linalg.solve(A, b)
    except np.linalg.LinAlgError as exc:
        raise SingularSystemError("singular linear system") from exc


def _evaluate_policy(P, C, t, play, g):
    """Values when playing on ``play`` (bool mask, target excluded) and quitting elsewhere."""
    V = np.zeros(len(C))
    V[t] = g
    S = np.nonzero(play)[0]
    if S.size:
        A = np.eye(S.size) - P[np.ix_(S, S)]
        b = -C[S] + P[S, t] * g
        V[S] = _solve(A, b)
    return V


def _optimal_stopping(system: MarkovSystem, g: float) -> tuple[np.ndarray, np.ndarray]:
    P, C, t = system.transition, system.move_cost, system.t
    n = system.n
    nontarget = np.ones(n, dtype=bool)
    nontarget[t] = False
    eps = _PLAY_EPS * max(1.0, abs(g), float(C.max(initial=0.0)))
    play = np.zeros(n, dtype=bool)
    V = _evaluate_policy(P, C, t, play, g)
    for _ in range(4 * n + 10):
        q = -C + P @ V
        # switch only on strict improvement, so the iteration cannot cycle on ties
        new_play = np.where(play, q >= -eps, q > eps) & nontarget
        if np.array_equal(new_play, play):
            break
        play = new_play
        V = _evaluate_policy(P, C, t, play, g)
    # ties go to quitting: a played state worth exactly zero can quit for free
    tie = play & (np.abs(V) <= eps)
    if tie.any():
        play = play & ~tie
        V = _evaluate_policy(P, C, t, play, g)
    V[~play & nontarget] = 0.0
    return V, play


def stopping_value(system: MarkovSystem, start=None, profit_level: float = 0.0) -> StoppingSolution:
    """Solve ``V(v) = max(0, -C_v + sum_w P[v,w] V(w))`` with ``V(target) = g``.

    Policy iteration over quit sets with exact linear solves. ``start`` is
    accepted for symmetry with the single-chain game; the solution covers all
    states.
    """
    if profit_level < 0:
        raise ValueError("profit_level must be nonnegative")
    if start is not None:
        system.idx(start)
    V, play = _optimal_stopping(system, float(profit_level))
    quit_set = frozenset(int(v) for v in np.nonzero(~play)[0] if v != system.t)
    return StoppingSolution(float(profit_level), V, quit_set)


def never_quit_costs(system: MarkovSystem) -> np.ndarray:
    P, C, t = system.transition, system.move_cost, system.t
    N = np.array([v for v in range(system.n) if v != t], dtype=int)
    E = np.zeros(system.n)
    if N.size:
        E[N] = _solve(np.eye(N.size) - P[np.ix_(N, N)], C[N])
    return E


def never_quit_cost(system: MarkovSystem, start=None) -> float:
    u = system.s if start is None else system.idx(start)
    return float(never_quit_costs(system)[u])


def _value_at(system: MarkovSystem, u: int, g: float) -> float:
    V, _ = _optimal_stopping(system, g)
    return float(V[u])


def _stop_rule_ratio(system: MarkovSystem, u: int, play: np.ndarray) -> float | None:
    """Expected cost / success probability of: play ``u``, then continue on ``play``."""
    P, C, t = system.transition, system.move_cost, system.t
    mask = play.copy()
    mask[u] = True
    mask[t] = False
    S = np.nonzero(mask)[0]
    A = np.eye(S.size) - P[np.ix_(S, S)]
    try:
        reach = np.linalg.solve(A, P[S, t])
        cost = np.linalg.solve(A, C[S])
    except np.linalg.LinAlgError:
        return None
    k = int(np.searchsorted(S, u))
    if reach[k] <= 0:
        return None
    return float(cost[k] / reach[k])


def compute_grade(system: MarkovSystem, state=None, tol: float = DEFAULT_TOL) -> float:
    """Largest profit level at which quitting immediately is still optimal.

    Bisection on ``[0, never_quit_cost(state)]`` against the policy-iteration
    solver, then one exact polish: the continuation region found just above
    the grade defines a stopping rule whose cost/success ratio is the grade.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    u = system.s if state is None else system.idx(state)
    if u == system.t:
        return 0.0
    hi = never_quit_costs(system)[u]
    if hi <= 0:
        return 0.0
    lo = 0.0

    def profitable(g):
        return _value_at(system, u, g) > tol * max(1.0, g)

    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if profitable(mid):
            hi = mid
        else:
            lo = mid
    est = 0.5 * (lo + hi)
    _, play = _optimal_stopping(system, hi)
    ratio = _stop_rule_ratio(system, u, play)
    if ratio is not None and -tol <= ratio <= hi + tol and not profitable(max(ratio, 0.0)):
        return max(ratio, 0.0)
    return est


def compute_grades(system: MarkovSystem, tol: float = DEFAULT_TOL) -> np.ndarray:
    return np.array([compute_grade(system, u, tol) for u in range(system.n)])


_TABLE_CACHE: dict[tuple, GradeTable] = {}


def compute_grade_table(system: MarkovSystem, switch_cost: float = 1.0,
                        tol: float = DEFAULT_TOL) -> GradeTable:
    """Grades of every state plus dummy grades at ``switch_cost``.

    Results are memoised on the chain's content, so identical chains in one
    instance share a table.
    """
    if switch_cost < 0:
        raise ValueError("switch_cost must be nonnegative")
    key = (system.key, float(switch_cost), float(tol))
    hit = _TABLE_CACHE.get(key)
    if hit is not None:
        return hit
    grade = compute_grades(system, tol)
    aug = build_dummy_system(system, switch_cost)
    dummy = np.full(system.n, np.nan)
    for u, du in dummy_index_map(system).items():
        dummy[u] = compute_grade(aug, du, tol)
    grade.flags.writeable = False
    dummy.flags.writeable = False
    table = GradeTable(grade, dummy, float(switch_cost))
    _TABLE_CACHE[key] = table
    return table


def prevailing_and_epochs(segment, table: GradeTable) -> PrevailingRecord:
    """Running maximum of grades along a path, and where each epoch starts."""
    prevailing: list[float] = []
    starts: list[int] = []
    cur = -np.inf
    for i, u in enumerate(segment):
        g = float(table.grade[u])
        if g > cur:
            cur = g
            starts.append(i)
        prevailing.append(cur)
    return PrevailingRecord(tuple(prevailing), tuple(starts))


def merge_levels(values, tol: float = LEVEL_TOL) -> tuple[np.ndarray, np.ndarray]:
    """Group sorted values closer than ``tol``; returns (level values, level id per input)."""
    values = np.asarray(values, dtype=float)
    order = np.argsort(values, kind="stable")
    ids = np.empty(len(values), dtype=int)
    levels: list[float] = []
    prev = None
    for i in order:
        v = values[i]
        if prev is None or v - prev > tol:
            levels.append(v)
        else:
            levels[-1] = v  # cluster represented by its largest member
        ids[i] = len(levels) - 1
        prev = v
    return np.array(levels), ids


def selection_cost_pmf(system: MarkovSystem, tol: float = DEFAULT_TOL,
                       grades: np.ndarray | None = None) -> SelectionCostPMF:
    """Exact law of the prevailing cost paid by a never-quitting player.

    For each grade level the CDF is the probability of reaching the target
    while only visiting states at or below that level.
    """
    if grades is None:
        grades = compute_grade_table(system, 1.0, tol).grade
    P, t, s = system.transition, system.t, system.s
    levels, ids = merge_levels(grades)
    cdf = np.zeros(len(levels))
    for i in range(len(levels)):
        if s == t:
            cdf[i] = 1.0
            continue
        adm = (ids <= i)
        adm[t] = False
        if not adm[s]:
            continue
        A_idx = np.nonzero(adm)[0]
        A = np.eye(A_idx.size) - P[np.ix_(A_idx, A_idx)]
        x = _solve(A, P[A_idx, t])
        cdf[i] = x[np.searchsorted(A_idx, s)]
    mass = np.diff(np.concatenate([[0.0], cdf]))
    mass[mass < 0] = 0.0
    keep = mass > 1e-14
    return SelectionCostPMF(levels[keep], mass[keep])


def simulate_teasing(system: MarkovSystem, rng: RandomSource,
                     table: GradeTable | None = None,
                     step_cap: int = 10**7) -> tuple[float, float]:
    """Never-quitting run of the teasing game: (final prevailing cost, movement cost)."""
    if table is None:
        table = compute_grade_table(system)
    seg, cost = sample_to_target(system, system.s, rng, step_cap)
    return float(table.grade[seg.states].max()), cost


def sample_prevailing_costs(system: MarkovSystem, rng: RandomSource, size: int,
                            table: GradeTable | None = None,
                            step_cap: int = 10**6) -> np.ndarray:
    """``size`` independent draws of the final prevailing cost, walked in lockstep."""
    if table is None:
        table = compute_grade_table(system)
    grade, cum, t = table.grade, system.cumulative, system.t
    pos = np.full(size, system.s)
    best = np.full(size, grade[system.s])
    live = np.nonzero(pos != t)[0]
    steps = 0
    while live.size:
        steps += 1
        if steps > step_cap:
            raise RuntimeError(f"step cap {step_cap} exceeded")
        r = rng.gen.random(live.size)
        nxt = (cum[pos[live]] <= r[:, None]).sum(axis=1)
        pos[live] = nxt
        best[live] = np.maximum(best[live], grade[nxt])
        live = live[nxt != t]
    return best
