"""Exact optimal play on small instances via the joint Markov decision process."""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .systems import MetricInstance, RandomSource

ORACLE_STATE_CAP = 2_000_000
ROOT = -1


class OracleTooLarge(RuntimeError):
    pass


class InfeasibleError(ValueError):
    pass


@dataclass(frozen=True)
class JointState:
    positions: tuple[int, ...]
    location: int  # ROOT or chain id
    rewards_remaining: int


Action = tuple[str, int]  # ("play", i) or ("switch", j)


@dataclass
class OracleResult:
    optimal_expected_cost: float
    policy: dict[JointState, Action]
    state_count: int
    residual: float
    start: JointState
    values: dict[JointState, float] = field(repr=False, default_factory=dict)
    iterations: int = 0

    def to_dict(self) -> dict:
        return {"value": self.optimal_expected_cost, "state_count": self.state_count,
                "residual": self.residual, "iterations": self.iterations}

    def policy_table(self, instance: MetricInstance) -> list[dict]:
        rows = []
        for js, (kind, i) in self.policy.items():
            rows.append({
                "positions": [c.states[p] for c, p in zip(instance.chains, js.positions)],
                "location": "root" if js.location == ROOT else js.location,
                "rewards_remaining": js.rewards_remaining,
                "action": kind, "chain": i,
            })
        return rows


def joint_state_bound(instance: MetricInstance) -> int:
    sizes = [c.n for c in instance.chains]
    return math.prod(sizes) * (instance.n + 1)


def start_state(instance: MetricInstance, K: int, start: int | None = None) -> JointState:
    loc = ROOT if start is None else int(start)
    if loc != ROOT and not 0 <= loc < instance.n:
        raise ValueError(f"bad start location {start}")
    return JointState(tuple(instance.chain_positions), loc, K)


def _playable(instance: MetricInstance, js: JointState, i: int) -> bool:
    return instance.available[i] and js.positions[i] != instance.chains[i].t


def _legal_actions(instance: MetricInstance, js: JointState):
    """Yield (action, immediate cost, [(prob, successor)]) for a non-terminal state."""
    loc = None if js.location == ROOT else js.location
    if loc is not None and _playable(instance, js, loc):
        chain = instance.chains[loc]
        u = js.positions[loc]
        succ = []
        for v in np.nonzero(chain.transition[u] > 0)[0]:
            pos = list(js.positions)
            pos[loc] = int(v)
            rem = js.rewards_remaining - (1 if v == chain.t else 0)
            succ.append((float(chain.transition[u, v]), JointState(tuple(pos), loc, rem)))
        yield ("play", loc), float(chain.move_cost[u]), succ
    for j in range(instance.n):
        if j != loc and _playable(instance, js, j):
            yield (("switch", j), instance.dist(loc, j),
                   [(1.0, JointState(js.positions, j, js.rewards_remaining))])


class _Model:
    """Reachable joint states with their action lists, in BFS order."""

    def __init__(self, instance: MetricInstance, root: JointState, cap: int):
        self.index: dict[JointState, int] = {root: 0}
        self.states: list[JointState] = [root]
        self.actions: list[list[tuple[Action, float, list[tuple[float, int]]]]] = []
        queue = deque([root])
        while queue:
            js = queue.popleft()
            acts = []
            if js.rewards_remaining > 0:
                for act, cost, succ in _legal_actions(instance, js):
                    out = []
                    for p, nxt in succ:
                        k = self.index.get(nxt)
                        if k is None:
                            if len(self.states) >= cap:
                                raise OracleTooLarge("instance too large for oracle")
                            k = len(self.states)
                            self.index[nxt] = k
                            self.states.append(nxt)
                            queue.append(nxt)
                        out.append((p, k))
                    acts.append((act, cost, out))
            self.actions.append(acts)


def _q(acts, V):
    return [cost + sum(p * V[k] for p, k in succ) for _, cost, succ in acts]


def solve_optimal(instance: MetricInstance, K: int | None = None, start: int | None = None,
                  tol: float = 1e-10, cap: int = ORACLE_STATE_CAP,
                  max_iter: int = 1_000_000) -> OracleResult:
    """Minimum expected total cost to collect K rewards, by Gauss-Seidel value iteration.

    ``start`` is ``None`` for the root or a chain id for "active on that chain".
    Iteration starts from zero and stops once a full sweep changes no value by
    ``tol`` or more.
    """
    K = instance.reward_target if K is None else K
    n_playable = sum(1 for c, p, a in zip(instance.chains, instance.chain_positions,
                                           instance.available) if a and p != c.t)
    if K > n_playable:
        raise InfeasibleError(f"K={K} exceeds the {n_playable} playable chains")
    root = start_state(instance, K, start)
    model = _Model(instance, root, cap)
    N = len(model.states)
    V = [0.0] * N
    order = [k for k in reversed(range(N)) if model.actions[k]]
    it = 0
    for it in range(1, max_iter + 1):
        delta = 0.0
        for k in order:
            best = min(_q(model.actions[k], V))
            d = abs(best - V[k])
            if d > delta:
                delta = d
            V[k] = best
        if delta < tol:
            break
    residual = 0.0
    policy: dict[JointState, Action] = {}
    for k in order:
        qs = _q(model.actions[k], V)
        b = int(np.argmin(qs))
        residual = max(residual, abs(qs[b] - V[k]))
        policy[model.states[k]] = model.actions[k][b][0]
    values = {js: V[k] for js, k in model.index.items()}
    return OracleResult(V[0], policy, N, residual, root, values, it)


def action_value(instance: MetricInstance, K: int | None, start: int | None,
                 first_action: Action, tol: float = 1e-10,
                 result: OracleResult | None = None) -> float:
    """Expected cost of taking ``first_action`` at the start, then playing optimally."""
    K = instance.reward_target if K is None else K
    if result is None:
        result = solve_optimal(instance, K, start, tol)
    for act, cost, succ in _legal_actions(instance, result.start):
        if act == tuple(first_action):
            return cost + sum(p * result.values[js] for p, js in succ)
    raise ValueError(f"illegal action {first_action} at start")


def simulate_policy(result: OracleResult, instance: MetricInstance, rng: RandomSource,
                    trials: int) -> tuple[float, float]:
    """Monte Carlo rollouts of the oracle policy: (mean total cost, standard error)."""
    costs = np.empty(trials)
    for n in range(trials):
        js, total = result.start, 0.0
        while js.rewards_remaining > 0:
            try:
                kind, i = result.policy[js]
            except KeyError:
                raise RuntimeError(f"unreachable state {js}") from None
            if kind == "switch":
                loc = None if js.location == ROOT else js.location
                total += instance.dist(loc, i)
                js = JointState(js.positions, i, js.rewards_remaining)
            else:
                chain = instance.chains[i]
                u = js.positions[i]
                total += float(chain.move_cost[u])
                v = int(np.searchsorted(chain.cumulative[u], rng.uniform(), side="right"))
                pos = list(js.positions)
                pos[i] = v
                js = JointState(tuple(pos), i,
                                js.rewards_remaining - (1 if v == chain.t else 0))
        costs[n] = total
    se = float(costs.std(ddof=1) / np.sqrt(trials)) if trials > 1 else 0.0
    return float(costs.mean()), se


def banks_sundaram_witness(x: float, y: float, c: float) -> dict:
    """Index values forced on two-point mixtures by a constant switch cost ``c``.

    Returns the closed forms and whether the active index of the x-mixture
    exceeds the inactive index of the y-mixture, which no consistent index
    can allow.
    """
    if not (0 < y <= x < 1):
        raise ValueError("need 0 < y <= x < 1")
    if c <= 0:
        raise ValueError("need c > 0")
    if 3 * c > 1 - x + 1e-12:
        raise ValueError("constraint 3c <= 1 - x violated")
    if 2 * x > 1 + 2 * y + 1e-12:
        raise ValueError("constraint 2x <= 1 + 2y violated")
    mu = (2 + x) * c / (1 - x)
    v = x * c / (1 - x)
    active = c / (1 - x)
    inactive = (2 + y) * c / (1 - y)
    return {
        "x": x, "y": y, "c": c,
        "mu": mu, "v": v,
        "active_index": active,
        "inactive_index": inactive,
        "contradiction": active > inactive,
    }
