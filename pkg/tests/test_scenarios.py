import numpy as np
import pytest

from markovgame.grades import compute_grade_table
from markovgame.scenarios import (SCENARIOS, banks_sundaram, dtw_counterexample,
                                  metric_closure, scenario)
from markovgame.systems import validate_instance


@pytest.mark.parametrize("name", SCENARIOS)
def test_scenarios_validate(name):
    assert validate_instance(scenario(name)).ok


def test_unknown_scenario():
    with pytest.raises(ValueError, match="unknown scenario"):
        scenario("nope")


def test_counterexample_layout():
    inst = dtw_counterexample(0.1, 5)
    assert inst.n == 10
    D = inst.distances
    assert np.all(D[0, 1:6] == 1) and D[1, 2] == 1
    np.testing.assert_allclose(D[0, 6:], [1, 1.5, 1.75, 1.875, 1.9375])
    # the sequential tour over the path costs less than 2
    hops = [D[0, 6]] + [D[6 + j, 7 + j] for j in range(4)]
    assert sum(hops) < 2
    tables = [compute_grade_table(c) for c in (inst.chains[0], inst.chains[5])]
    assert [t.dummy_grade[0] for t in tables] == pytest.approx([10, 20])


def test_counterexample_hops_stay_exact_for_long_paths():
    D = dtw_counterexample(0.1, 60).distances
    hops = np.array([D[61 + j, 62 + j] for j in range(59)])
    np.testing.assert_allclose(hops, 2.0 ** -np.arange(1, 60), rtol=1e-6)


@pytest.mark.parametrize("bad", [dict(eps=0), dict(eps=1.5), dict(n=0)])
def test_counterexample_rejects(bad):
    with pytest.raises(ValueError):
        dtw_counterexample(**bad)


def test_banks_sundaram_variants():
    mu = banks_sundaram(0.8, 0.01)
    assert mu.meta["a"] == pytest.approx(0.14) and mu.meta["start"] == 0
    v = banks_sundaram(0.8, 0.01, variant="v")
    assert v.meta["a"] == pytest.approx(0.04) and v.meta["start"] == 1
    both = banks_sundaram(0.8, 0.01, y=0.4, variant="mixtures")
    assert both.n == 2 and np.all(both.distances[~np.eye(3, dtype=bool)] == 0.01)
    with pytest.raises(ValueError):
        banks_sundaram(0.8, 0.01, variant="mixtures")
    with pytest.raises(ValueError):
        banks_sundaram(0.8, 0.01, variant="other")


def test_metric_closure_keeps_tiny_edges():
    W = np.full((3, 3), np.inf)
    W[0, 1] = W[1, 0] = 1e-12
    W[1, 2] = W[2, 1] = 1.0
    D = metric_closure(W)
    assert D[0, 1] == 1e-12 and D[0, 2] == pytest.approx(1.0 + 1e-12)
