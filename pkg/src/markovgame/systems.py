"""Markov systems, metric instances, trajectories and seeded sampling."""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from functools import cached_property
from pathlib import Path
from typing import Sequence

import numpy as np

ROW_TOL = 1e-12
METRIC_TOL = 1e-9

# Large finite stand-in for an infinite movement cost.
BIG_COST = 1e6


class ChainFinishedError(ValueError):
    """Raised when a chain sitting at its target is asked to move."""


class StepCapExceeded(RuntimeError):
    def __init__(self, message: str, states: list[int], costs: list[float]):
        super().__init__(message)
        self.states = states
        self.costs = costs


class ValidationError(ValueError):
    def __init__(self, violations: Sequence[str]):
        super().__init__("; ".join(violations))
        self.violations = list(violations)


@dataclass
class ValidationReport:
    violations: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def raise_if_bad(self) -> None:
        if self.violations:
            raise ValidationError(self.violations)


class RandomSource:
    """Seeded PCG64 stream addressed by ``(seed, stream)``.

    The same pair reproduces the same draws on every platform, so each trial of
    an experiment gets its own stream id.
    """

    def __init__(self, seed: int, stream: int = 0):
        self.seed = int(seed)
        self.stream = int(stream)
        ss = np.random.SeedSequence(entropy=self.seed, spawn_key=(self.stream,))
        self.gen = np.random.Generator(np.random.PCG64(ss))

    def spawn(self, stream: int) -> "RandomSource":
        return RandomSource(self.seed, stream)

    def uniform(self) -> float:
        return float(self.gen.random())

    def __repr__(self) -> str:
        return f"RandomSource(seed={self.seed}, stream={self.stream})"


@dataclass(frozen=True, eq=False)
class MarkovSystem:
    """A finite chain with per-state movement costs and an absorbing target.

    States are addressed either by their string id or by position in
    ``states``; the hot paths work on positions.
    """

    states: tuple[str, ...]
    transition: np.ndarray
    move_cost: np.ndarray
    start: str
    target: str
    labels: tuple[str, ...] | None = None

    def __post_init__(self):
        object.__setattr__(self, "states", tuple(str(s) for s in self.states))
        P = np.array(self.transition, dtype=float)
        C = np.array(self.move_cost, dtype=float)
        P.flags.writeable = False
        C.flags.writeable = False
        object.__setattr__(self, "transition", P)
        object.__setattr__(self, "move_cost", C)
        object.__setattr__(self, "start", str(self.start))
        object.__setattr__(self, "target", str(self.target))

    @property
    def n(self) -> int:
        return len(self.states)

    @cached_property
    def _index(self) -> dict[str, int]:
        return {s: i for i, s in enumerate(self.states)}

    def idx(self, state: str | int) -> int:
        if isinstance(state, (int, np.integer)):
            if not 0 <= state < self.n:
                raise KeyError(f"state index {state} out of range")
            return int(state)
        return self._index[state]

    @property
    def s(self) -> int:
        return self._index[self.start]

    @property
    def t(self) -> int:
        return self._index[self.target]

    @cached_property
    def cumulative(self) -> np.ndarray:
        cum = np.cumsum(self.transition, axis=1)
        cum[:, -1] = np.inf  # guards against rows summing to 1 - eps
        return cum

    @cached_property
    def key(self) -> bytes:
        """Structure fingerprint (start excluded), used to share grade tables."""
        parts = [repr(self.states).encode(), self.transition.tobytes(),
                 self.move_cost.tobytes(), self.target.encode()]
        return b"|".join(parts)

    def with_start(self, state: str | int) -> "MarkovSystem":
        return replace(self, start=self.states[self.idx(state)])


@dataclass(frozen=True, eq=False)
class MetricInstance:
    """Chains embedded in a finite metric with a root at index 0 of ``distances``."""

    chains: tuple[MarkovSystem, ...]
    distances: np.ndarray
    reward_target: int = 1
    chain_positions: tuple[int, ...] | None = None
    available: tuple[bool, ...] | None = None
    meta: dict | None = None

    def __post_init__(self):
        object.__setattr__(self, "chains", tuple(self.chains))
        D = np.array(self.distances, dtype=float)
        D.flags.writeable = False
        object.__setattr__(self, "distances", D)
        if self.chain_positions is None:
            pos = tuple(c.s for c in self.chains)
        else:
            pos = tuple(c.idx(p) for c, p in zip(self.chains, self.chain_positions))
        object.__setattr__(self, "chain_positions", pos)
        if self.available is None:
            avail = tuple(p != c.t for c, p in zip(self.chains, pos))
        else:
            avail = tuple(bool(a) for a in self.available)
        object.__setattr__(self, "available", avail)

    @property
    def n(self) -> int:
        return len(self.chains)

    def dist(self, a: int | None, b: int | None) -> float:
        """Distance between locations; ``None`` is the root, ints are chain ids."""
        ia = 0 if a is None else a + 1
        ib = 0 if b is None else b + 1
        return float(self.distances[ia, ib])

    def evolve(self, positions: Sequence[int], available: Sequence[bool]) -> "MetricInstance":
        return replace(self, chain_positions=tuple(positions), available=tuple(available))


@dataclass
class Segment:
    chain: int
    states: list[int]
    costs: list[float]


@dataclass
class SwitchEvent:
    src: int | None
    dst: int | None
    distance: float


@dataclass
class Trajectory:
    segments: list[Segment] = field(default_factory=list)
    switches: list[SwitchEvent] = field(default_factory=list)

    def movement_cost(self) -> float:
        return float(sum(sum(seg.costs) for seg in self.segments))

    def switching_cost(self) -> float:
        return float(sum(ev.distance for ev in self.switches))

    def open_segment(self, chain: int, state: int) -> Segment:
        seg = Segment(chain, [state], [])
        self.segments.append(seg)
        return seg


def validate_system(system: MarkovSystem) -> ValidationReport:
    rep = ValidationReport()
    P, C, names = system.transition, system.move_cost, system.states
    n = system.n
    if P.shape != (n, n):
        rep.violations.append(f"transition shape {P.shape} does not match {n} states")
        return rep
    if C.shape != (n,):
        rep.violations.append(f"move_cost length {C.shape} does not match {n} states")
        return rep
    for name in (system.start, system.target):
        if name not in system._index:
            rep.violations.append(f"unknown state {name}")
    if not rep.ok:
        return rep
    if not (np.all(np.isfinite(P)) and np.all(np.isfinite(C))):
        rep.violations.append("non-finite entry")
        return rep
    for i in range(n):
        if np.any(P[i] < 0):
            rep.violations.append(f"negative probability at {names[i]}")
        if abs(P[i].sum() - 1.0) > ROW_TOL:
            rep.violations.append(f"row not stochastic at {names[i]}")
        if C[i] < 0:
            rep.violations.append(f"negative move cost at {names[i]}")
    t = system.t
    if abs(P[t, t] - 1.0) > ROW_TOL:
        rep.violations.append("target not absorbing")
    if C[t] != 0:
        rep.violations.append("target move cost not zero")
    # backward reachability over positive-probability edges
    reach = np.zeros(n, dtype=bool)
    reach[t] = True
    frontier = [t]
    while frontier:
        v = frontier.pop()
        for u in np.nonzero(P[:, v] > 0)[0]:
            if not reach[u]:
                reach[u] = True
                frontier.append(int(u))
    for i in np.nonzero(~reach)[0]:
        rep.violations.append(f"target unreachable from {names[i]}")
    return rep


def validate_metric(instance: MetricInstance) -> ValidationReport:
    rep = ValidationReport()
    D = instance.distances
    m = instance.n + 1
    if D.shape != (m, m):
        rep.violations.append(f"distances shape {D.shape}, expected {(m, m)}")
        return rep
    if not np.all(np.isfinite(D)):
        rep.violations.append("non-finite distance")
        return rep
    if np.any(D < 0):
        rep.violations.append("negative distance")
    if np.any(np.abs(np.diag(D)) > METRIC_TOL):
        rep.violations.append("nonzero diagonal")
    if np.any(np.abs(D - D.T) > METRIC_TOL):
        rep.violations.append("asymmetric")
    # d[i,k] <= d[i,j] + d[j,k] for all triples
    for j in range(m):
        if np.any(D > D[:, j:j + 1] + D[j:j + 1, :] + METRIC_TOL):
            rep.violations.append("triangle inequality")
            break
    if not 1 <= instance.reward_target <= instance.n:
        rep.violations.append(
            f"reward_target {instance.reward_target} not in [1, {instance.n}]")
    return rep


def validate_instance(instance: MetricInstance) -> ValidationReport:
    rep = validate_metric(instance)
    for i, chain in enumerate(instance.chains):
        sub = validate_system(chain)
        rep.violations.extend(f"chain {i}: {v}" for v in sub.violations)
    return rep


def step(system: MarkovSystem, state: str | int, rng: RandomSource) -> tuple[int, float]:
    """Play one move from ``state``; the cost is charged at the state being played."""
    u = system.idx(state)
    if u == system.t:
        raise ChainFinishedError("target is absorbing")
    nxt = int(np.searchsorted(system.cumulative[u], rng.uniform(), side="right"))
    return nxt, float(system.move_cost[u])


def sample_to_target(system: MarkovSystem, start: str | int, rng: RandomSource,
                     step_cap: int = 10**7) -> tuple[Segment, float]:
    """Run a never-quitting player until absorption."""
    u = system.idx(start)
    states, costs = [u], []
    t = system.t
    cum, C = system.cumulative, system.move_cost
    gen = rng.gen
    while u != t:
        if len(costs) >= step_cap:
            raise StepCapExceeded(f"step cap {step_cap} exceeded", states, costs)
        costs.append(float(C[u]))
        u = int(np.searchsorted(cum[u], gen.random(), side="right"))
        states.append(u)
    return Segment(-1, states, costs), float(sum(costs))


def build_dummy_system(system: MarkovSystem, switch_cost: float) -> MarkovSystem:
    """Add a dummy predecessor ``u'`` with cost ``switch_cost`` for every non-target ``u``.

    Original states keep their positions; dummies are appended in state order.
    The new start is the dummy of the original start.
    """
    if switch_cost < 0:
        raise ValueError("switch_cost must be nonnegative")
    n, t = system.n, system.t
    originals = [u for u in range(n) if u != t]
    m = n + len(originals)
    P = np.zeros((m, m))
    P[:n, :n] = system.transition
    C = np.zeros(m)
    C[:n] = system.move_cost
    names = list(system.states)
    for k, u in enumerate(originals):
        P[n + k, u] = 1.0
        C[n + k] = switch_cost
        names.append(system.states[u] + "'")
    start = system.s
    new_start = names[n + originals.index(start)] if start != t else system.target
    return MarkovSystem(tuple(names), P, C, new_start, system.target)


def dummy_index_map(system: MarkovSystem) -> dict[int, int]:
    """Position of ``u'`` in ``build_dummy_system(system, .)`` for each non-target ``u``."""
    t = system.t
    originals = [u for u in range(system.n) if u != t]
    return {u: system.n + k for k, u in enumerate(originals)}


# --- instance files -------------------------------------------------------

def instance_to_dict(instance: MetricInstance) -> dict:
    chains = []
    for c in instance.chains:
        d = {
            "states": list(c.states),
            "transition": c.transition.tolist(),
            "move_cost": c.move_cost.tolist(),
            "start": c.start,
            "target": c.target,
        }
        if c.labels is not None:
            d["labels"] = list(c.labels)
        chains.append(d)
    out = {
        "chains": chains,
        "distances": instance.distances.tolist(),
        "reward_target": int(instance.reward_target),
    }
    default_pos = tuple(c.s for c in instance.chains)
    if instance.chain_positions != default_pos:
        out["chain_positions"] = [c.states[p] for c, p in
                                  zip(instance.chains, instance.chain_positions)]
    default_avail = tuple(p != c.t for c, p in zip(instance.chains, instance.chain_positions))
    if instance.available != default_avail:
        out["available"] = list(instance.available)
    if instance.meta:
        out["meta"] = instance.meta
    return out


def instance_from_dict(data: dict) -> MetricInstance:
    chains = tuple(
        MarkovSystem(tuple(c["states"]), np.array(c["transition"], dtype=float),
                     np.array(c["move_cost"], dtype=float), c["start"], c["target"],
                     tuple(c["labels"]) if c.get("labels") else None)
        for c in data["chains"])
    return MetricInstance(chains, np.array(data["distances"], dtype=float),
                          int(data.get("reward_target", 1)),
                          data.get("chain_positions"), data.get("available"),
                          data.get("meta"))


def serialize_instance(instance: MetricInstance) -> str:
    return json.dumps(instance_to_dict(instance), indent=1) + "\n"


def parse_instance_text(text: str) -> MetricInstance:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ValidationError([f"syntax error: {exc}"]) from exc
    try:
        inst = instance_from_dict(data)
    except (KeyError, TypeError, ValueError) as exc:
        raise ValidationError([f"malformed instance: {exc!r}"]) from exc
    validate_instance(inst).raise_if_bad()
    return inst


def parse_instance(path: str | Path) -> MetricInstance:
    return parse_instance_text(Path(path).read_text())


def write_instance(instance: MetricInstance, path: str | Path) -> None:
    Path(path).write_text(serialize_instance(instance))


# --- small constructors used throughout ----------------------------------

def delta_system(a: float) -> MarkovSystem:
    """``[delta_a]``: one move of cost ``a`` straight to the target."""
    P = np.array([[0.0, 1.0], [0.0, 1.0]])
    return MarkovSystem(("s", "t"), P, np.array([a, 0.0]), "s", "t")


def mixture_system(x: float, c: float) -> MarkovSystem:
    """``[x delta_1 + (1-x) delta_0]``: pay ``c`` at s, then cost 1 w.p. x or 0 w.p. 1-x."""
    states = ("s", "v0", "v1", "t")
    P = np.zeros((4, 4))
    P[0, 1], P[0, 2] = 1 - x, x
    P[1, 3] = P[2, 3] = P[3, 3] = 1.0
    return MarkovSystem(states, P, np.array([c, 0.0, 1.0, 0.0]), "s", "t")


def uniform_metric(n_chains: int, d: float = 1.0) -> np.ndarray:
    D = np.full((n_chains + 1, n_chains + 1), float(d))
    np.fill_diagonal(D, 0.0)
    return D
