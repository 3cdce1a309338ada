import numpy as np
import pytest

from markovgame.harness import STRATEGIES, ExperimentConfig, run_experiment
from markovgame.oracle import (ROOT, InfeasibleError, OracleTooLarge, action_value,
                               banks_sundaram_witness, joint_state_bound, simulate_policy,
                               solve_optimal)
from markovgame.scenarios import GenParams, banks_sundaram, gen_random_instance, two_deltas
from markovgame.systems import MetricInstance, RandomSource, mixture_system, uniform_metric


def test_two_deltas():
    res = solve_optimal(two_deltas(), 1)
    assert res.optimal_expected_cost == pytest.approx(2.0)
    assert res.policy[res.start] == ("switch", 0)
    assert res.start.location == ROOT


def test_single_mixture_at_distance_one():
    inst = MetricInstance((mixture_system(0.8, 0.01),), uniform_metric(1))
    res = solve_optimal(inst, 1)
    assert res.optimal_expected_cost == pytest.approx(1.81, abs=1e-9)
    mean, se = simulate_policy(res, inst, RandomSource(0), 100_000)
    assert abs(mean - 1.81) <= 3 * se


def test_simulate_policy_is_deterministic():
    inst = MetricInstance((mixture_system(0.8, 0.01),), uniform_metric(1))
    res = solve_optimal(inst, 1)
    assert simulate_policy(res, inst, RandomSource(3), 500) == simulate_policy(
        res, inst, RandomSource(3), 500)
    assert simulate_policy(solve_optimal(two_deltas()), two_deltas(), RandomSource(0), 50) == (2.0, 0.0)


def test_errors():
    with pytest.raises(InfeasibleError):
        solve_optimal(two_deltas(), 3)
    with pytest.raises(OracleTooLarge):
        solve_optimal(gen_random_instance(GenParams(n_chains=3), 0), 1, cap=2)
    with pytest.raises(ValueError):
        action_value(two_deltas(), 1, None, ("play", 0))


def test_state_bound():
    assert joint_state_bound(two_deltas()) == 2 * 2 * 3


@pytest.mark.parametrize("x,c", [(0.8, 0.01), (0.4, 0.01), (0.5, 0.05), (0.6, 0.1), (0.2, 0.2)])
@pytest.mark.parametrize("variant", ["mu", "v"])
def test_indifference(x, c, variant):
    inst = banks_sundaram(x, c, variant=variant)
    start = inst.meta["start"]
    res = solve_optimal(inst, 1, start)
    play = action_value(inst, 1, start, ("play", start), result=res)
    switch = action_value(inst, 1, start, ("switch", 1 - start), result=res)
    assert abs(play - switch) <= 10 * 1e-10
    expected = inst.meta["a"] if variant == "mu" else c + inst.meta["a"]
    assert res.optimal_expected_cost == pytest.approx(expected, abs=1e-9)


def test_witness():
    w = banks_sundaram_witness(0.8, 0.4, 0.01)
    assert w["active_index"] == pytest.approx(1 / 20)
    assert w["inactive_index"] == pytest.approx(1 / 25)
    assert w["contradiction"]
    assert w["mu"] == pytest.approx(0.14) and w["v"] == pytest.approx(0.04)
    same = banks_sundaram_witness(0.8, 0.8, 0.01)
    assert not same["contradiction"]
    assert (same["active_index"], same["inactive_index"]) == pytest.approx((0.05, 0.14))


@pytest.mark.parametrize("x,y,c,msg", [(0.8, 0.4, 0.1, "3c"), (0.9, 0.1, 0.01, "2x")])
def test_witness_constraints(x, y, c, msg):
    with pytest.raises(ValueError, match=msg):
        banks_sundaram_witness(x, y, c)


@pytest.mark.parametrize("seed", range(8))
def test_monotone_in_k(seed):
    inst = gen_random_instance(GenParams(n_chains=3, max_states=3, metric="random"), seed)
    values = [solve_optimal(inst, K).optimal_expected_cost for K in (1, 2, 3)]
    assert values == sorted(values)


def test_residual_and_more_iterations():
    inst = gen_random_instance(GenParams(n_chains=3, max_states=4), 2)
    res = solve_optimal(inst, 2, tol=1e-10)
    assert res.residual <= 1e-10
    longer = solve_optimal(inst, 2, tol=1e-13)
    assert abs(longer.optimal_expected_cost - res.optimal_expected_cost) <= 1e-9


def test_zero_cost_cycles_converge():
    inst = gen_random_instance(GenParams(n_chains=2, max_states=4, zero_cost_prob=0.5), 5)
    res = solve_optimal(inst, 1)
    assert np.isfinite(res.optimal_expected_cost) and res.residual <= 1e-10


@pytest.mark.parametrize("strategy", sorted(set(STRATEGIES) - {"fair-greedy", "budget-unit",
                                                                "budget-metric"}))
@pytest.mark.parametrize("seed", range(4))
def test_oracle_is_a_lower_bound(strategy, seed):
    gen = GenParams(n_chains=3, max_states=4, metric="random", K=2)
    rep = run_experiment(ExperimentConfig(strategy=strategy, trials=3000, seed=seed, gen=gen,
                                          gen_seed=seed))
    total = rep.aggregates["total"]
    assert total["mean"] >= rep.oracle["value"] - 3 * total["stderr"] - 1e-12


def test_policy_table_is_complete():
    res = solve_optimal(two_deltas(), 2)
    rows = res.policy_table(two_deltas())
    assert len(rows) == len(res.policy)
    assert {r["action"] for r in rows} <= {"play", "switch"}
