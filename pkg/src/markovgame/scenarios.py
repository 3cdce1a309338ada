"""Built-in instances and a seeded random instance generator."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .systems import (BIG_COST, MarkovSystem, MetricInstance, RandomSource,
                      delta_system, mixture_system, uniform_metric, validate_instance)

SCENARIOS = ("banks_sundaram", "dtw_counterexample", "paper_micro")


@dataclass(frozen=True)
class GenParams:
    n_chains: int = 3
    max_states: int = 4
    cost_lo: float = 0.1
    cost_hi: float = 2.0
    metric: str = "unit"  # unit | random
    K: int = 1
    zero_cost_prob: float = 0.0


def metric_closure(weights: np.ndarray) -> np.ndarray:
    """All-pairs shortest paths over a symmetric weight matrix (inf = no edge).

    Plain Floyd-Warshall: scipy's dense graph input treats near-zero weights as
    missing edges, which breaks the geometric hop lengths of the counterexample.
    """
    D = np.array(weights, dtype=float)
    np.fill_diagonal(D, 0.0)
    for k in range(D.shape[0]):
        np.minimum(D, D[:, k:k + 1] + D[k:k + 1, :], out=D)
    return D


def _random_chain(gen: np.random.Generator, p: GenParams) -> MarkovSystem:
    m = int(gen.integers(2, p.max_states + 1))
    names = tuple(f"s{i}" for i in range(m - 1)) + ("t",)
    P = np.zeros((m, m))
    for i in range(m - 1):
        # one forward edge keeps the target reachable; extra edges may point anywhere
        fwd = int(gen.integers(i + 1, m))
        support = {fwd}
        for j in range(m):
            if gen.random() < 0.4:
                support.add(j)
        support = sorted(support)
        w = gen.dirichlet(np.ones(len(support)))
        w = 0.05 + 0.95 * w  # keep every listed edge away from zero
        P[i, support] = w / w.sum()
    P[m - 1, m - 1] = 1.0
    C = gen.uniform(p.cost_lo, p.cost_hi, size=m)
    if p.zero_cost_prob > 0:
        C[gen.random(m) < p.zero_cost_prob] = 0.0
    C[m - 1] = 0.0
    C = np.round(C, 6)
    return MarkovSystem(names, P, C, "s0", "t")


def gen_random_instance(params: GenParams = GenParams(), seed: int = 0) -> MetricInstance:
    """Deterministic in ``(params, seed)``; every output passes validation."""
    gen = RandomSource(seed).gen
    chains = tuple(_random_chain(gen, params) for _ in range(params.n_chains))
    n = params.n_chains
    if params.metric == "unit":
        D = uniform_metric(n)
    elif params.metric == "random":
        W = np.round(gen.uniform(0.1, 3.0, size=(n + 1, n + 1)), 6)
        D = metric_closure(np.minimum(W, W.T))
    else:
        raise ValueError(f"unknown metric type {params.metric!r}")
    inst = MetricInstance(chains, D, params.K)
    validate_instance(inst).raise_if_bad()
    return inst


def random_system(seed: int, max_states: int = 6, cost_lo: float = 0.0,
                  cost_hi: float = 2.0, zero_cost_prob: float = 0.0) -> MarkovSystem:
    gen = RandomSource(seed, 1).gen
    return _random_chain(gen, GenParams(max_states=max_states, cost_lo=cost_lo,
                                        cost_hi=cost_hi, zero_cost_prob=zero_cost_prob))


def counterexample_chain(success: float, big: float = BIG_COST) -> MarkovSystem:
    """Free first move to the target w.p. ``success``, else a trap state costing ``big``."""
    P = np.array([[0.0, 1 - success, success],
                  [0.0, 0.0, 1.0],
                  [0.0, 0.0, 1.0]])
    return MarkovSystem(("s", "x", "t"), P, np.array([0.0, big, 0.0]), "s", "t")


def dtw_counterexample(eps: float = 0.1, n: int = 200, big: float = BIG_COST) -> MetricInstance:
    """Finite truncation of the instance where the dummy-grade index rule is far from optimal.

    Chains ``0..n-1`` succeed w.p. ``eps`` and sit at mutual distance 1;
    chains ``n..2n-1`` succeed w.p. ``eps/2`` and lie on a path out of the
    root with hop lengths 1, 1/2, 1/4, ...
    """
    if not 0 < eps < 1:
        raise ValueError("eps must lie in (0, 1)")
    if n < 1:
        raise ValueError("n must be positive")
    first = counterexample_chain(eps, big)
    second = counterexample_chain(eps / 2, big)
    # hop j has length 2^-(j-1), so path node j sits at 2 - rest[j] from the root;
    # first-kind chains connect to it at that same distance. Path distances are
    # differences of ``rest`` so tiny hops keep full relative precision.
    rest = 2.0 ** -np.arange(n, dtype=float)
    root_to = 2.0 - rest
    m = 2 * n + 1
    D = np.ones((m, m))
    D[0, n + 1:] = D[n + 1:, 0] = root_to
    D[1:n + 1, n + 1:] = root_to
    D[n + 1:, 1:n + 1] = root_to[:, None]
    D[n + 1:, n + 1:] = np.abs(rest[:, None] - rest[None, :])
    np.fill_diagonal(D, 0.0)
    meta = {"scenario": "dtw_counterexample", "eps": eps, "n": n, "big": big,
            "sequential_order": list(range(n, 2 * n)), "give_up_grade": 1.0}
    return MetricInstance((first,) * n + (second,) * n, D, 1, meta=meta)


def banks_sundaram(x: float = 0.8, c: float = 0.01, y: float | None = None,
                   variant: str = "mu", a: float | None = None) -> MetricInstance:
    """Two-system game with every switch (root included) costing ``c``.

    ``mu``: delta chain at a = (2+x)c/(1-x) plus the x-mixture, play starts on the delta chain.
    ``v``: delta chain at a = xc/(1-x) plus the x-mixture, play starts on the mixture.
    ``mixtures``: x-mixture and y-mixture, play starts on the x-mixture.
    """
    if not 0 < x < 1 or c <= 0:
        raise ValueError("need 0 < x < 1 and c > 0")
    mix = mixture_system(x, c)
    if variant == "mu":
        a = (2 + x) * c / (1 - x) if a is None else a
        chains, start = (delta_system(a), mix), 0
    elif variant == "v":
        a = x * c / (1 - x) if a is None else a
        chains, start = (delta_system(a), mix), 1
    elif variant == "mixtures":
        if y is None or not 0 < y <= x:
            raise ValueError("mixtures variant needs 0 < y <= x")
        chains, start = (mix, mixture_system(y, c)), 0
    else:
        raise ValueError(f"unknown variant {variant!r}")
    meta = {"scenario": "banks_sundaram", "variant": variant, "x": x, "c": c,
            "start": start}
    if a is not None:
        meta["a"] = a
    if y is not None:
        meta["y"] = y
    return MetricInstance(chains, uniform_metric(2, c), 1, meta=meta)


def two_deltas() -> MetricInstance:
    """Two delta chains (costs 1 and 5) under the unit metric."""
    return MetricInstance((delta_system(1.0), delta_system(5.0)), uniform_metric(2), 1,
                          meta={"scenario": "paper_micro"})


def scenario(name: str, **params) -> MetricInstance:
    if name == "banks_sundaram":
        inst = banks_sundaram(**params)
    elif name == "dtw_counterexample":
        inst = dtw_counterexample(**params)
    elif name == "paper_micro":
        inst = two_deltas(**params)
    else:
        raise ValueError(f"unknown scenario {name!r}; choose from {', '.join(SCENARIOS)}")
    validate_instance(inst).raise_if_bad()
    return inst
