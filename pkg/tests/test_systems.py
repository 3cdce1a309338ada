import json

import numpy as np
import pytest
from hypothesis import given, strategies as st

from markovgame.scenarios import GenParams, gen_random_instance, random_system
from markovgame.systems import (ChainFinishedError, MarkovSystem, MetricInstance,
                                RandomSource, StepCapExceeded, ValidationError,
                                build_dummy_system, delta_system, dummy_index_map,
                                mixture_system, parse_instance, parse_instance_text,
                                sample_to_target, serialize_instance, step,
                                uniform_metric, validate_instance, validate_metric,
                                validate_system)


def test_delta_and_mixture_are_valid():
    assert validate_system(delta_system(0.5)).ok
    assert validate_system(mixture_system(0.8, 0.01)).ok


def test_row_sum_violation_is_named():
    P = np.array([[0.5, 0.4], [0.0, 1.0]])
    rep = validate_system(MarkovSystem(("s", "t"), P, [1.0, 0.0], "s", "t"))
    assert "row not stochastic at s" in rep.violations


def test_non_absorbing_target():
    P = np.array([[0.0, 1.0], [1.0, 0.0]])
    rep = validate_system(MarkovSystem(("s", "t"), P, [1.0, 0.0], "s", "t"))
    assert "target not absorbing" in rep.violations


def test_unreachable_target():
    P = np.array([[1.0, 0.0, 0.0], [0.0, 0.0, 1.0], [0.0, 0.0, 1.0]])
    rep = validate_system(MarkovSystem(("s", "x", "t"), P, [1.0, 1.0, 0.0], "s", "t"))
    assert "target unreachable from s" in rep.violations
    assert not any("from x" in v for v in rep.violations)


def test_negative_cost_rejected():
    P = np.array([[0.0, 1.0], [0.0, 1.0]])
    rep = validate_system(MarkovSystem(("s", "t"), P, [-1.0, 0.0], "s", "t"))
    assert not rep.ok


def test_metric_checks():
    D = uniform_metric(2)
    inst = MetricInstance((delta_system(1), delta_system(2)), D)
    assert validate_metric(inst).ok
    bad = D.copy()
    bad[0, 1] = 5.0
    rep = validate_metric(MetricInstance(inst.chains, bad))
    assert "asymmetric" in rep.violations
    assert "triangle inequality" in rep.violations
    bad = D.copy()
    bad[1, 1] = 0.5
    assert "nonzero diagonal" in validate_metric(MetricInstance(inst.chains, bad)).violations
    assert not validate_metric(MetricInstance(inst.chains, D, reward_target=3)).ok


def test_step_charges_the_state_played():
    m = mixture_system(0.8, 0.01)
    v, c = step(m, "s", RandomSource(0))
    assert c == pytest.approx(0.01)
    assert m.states[v] in ("v0", "v1")
    with pytest.raises(ChainFinishedError):
        step(m, "t", RandomSource(0))


def test_step_frequencies():
    m = mixture_system(0.8, 0.01)
    rng = RandomSource(3)
    hits = sum(m.states[step(m, "s", rng)[0]] == "v1" for _ in range(20000))
    assert abs(hits / 20000 - 0.8) < 0.015


def test_random_source_streams():
    a = [RandomSource(5, 1).uniform() for _ in range(3)]
    assert a == [RandomSource(5, 1).uniform() for _ in range(3)]
    assert RandomSource(5, 1).uniform() != RandomSource(5, 2).uniform()


def test_sample_to_target_and_cap():
    seg, cost = sample_to_target(delta_system(2.0), "s", RandomSource(0))
    assert seg.states == [0, 1] and cost == 2.0
    P = np.array([[0.999, 0.001], [0.0, 1.0]])
    slow = MarkovSystem(("s", "t"), P, [1.0, 0.0], "s", "t")
    with pytest.raises(StepCapExceeded) as exc:
        sample_to_target(slow, "s", RandomSource(0), step_cap=5)
    assert len(exc.value.costs) == 5


def test_dummy_system_layout():
    m = mixture_system(0.8, 0.01)
    d = build_dummy_system(m, 0.5)
    assert d.n == m.n + 3
    assert d.start == "s'"
    idx = dummy_index_map(m)
    for u, du in idx.items():
        assert d.move_cost[du] == 0.5
        assert d.transition[du, u] == 1.0
    assert validate_system(d).ok


def test_bundled_file(data_dir):
    inst = parse_instance(data_dir / "two_delta.json")
    assert inst.n == 2 and inst.reward_target == 1


def test_asymmetric_file_rejected(data_dir):
    data = json.loads((data_dir / "two_delta.json").read_text())
    data["distances"][0][1] = 2.0
    with pytest.raises(ValidationError) as exc:
        parse_instance_text(json.dumps(data))
    assert "asymmetric" in exc.value.violations


def test_syntax_error():
    with pytest.raises(ValidationError):
        parse_instance_text("{not json")


@given(st.integers(0, 10_000), st.sampled_from(["unit", "random"]))
def test_round_trip(seed, metric):
    inst = gen_random_instance(GenParams(metric=metric), seed)
    text = serialize_instance(inst)
    again = parse_instance_text(text)
    assert serialize_instance(again) == text


def test_round_trip_keeps_positions():
    inst = gen_random_instance(GenParams(), 1)
    moved = inst.evolve([c.t for c in inst.chains[:1]] + list(inst.chain_positions[1:]),
                        [False] + list(inst.available[1:]))
    again = parse_instance_text(serialize_instance(moved))
    assert again.chain_positions == moved.chain_positions
    assert again.available == moved.available


@given(st.integers(0, 10_000))
def test_generated_instances_validate(seed):
    assert validate_instance(gen_random_instance(GenParams(metric="random"), seed)).ok
    assert validate_system(random_system(seed, zero_cost_prob=0.3)).ok


def test_generator_is_deterministic():
    p = GenParams(n_chains=3, max_states=4, metric="unit", K=1)
    assert serialize_instance(gen_random_instance(p, 7)) == serialize_instance(gen_random_instance(p, 7))
    assert serialize_instance(gen_random_instance(p, 7)) != serialize_instance(gen_random_instance(p, 8))
