import json

import numpy as np
import pytest
from jsonschema import validate

from markovgame.harness import (FOOTER_SCHEMA, STRATEGIES, TRIAL_SCHEMA, ExperimentConfig, UsageError,
                                aggregate, compare_strategies, load_instance, read_report,
                                run_experiment, write_report)
from markovgame.scenarios import GenParams


def test_config_validation():
    with pytest.raises(UsageError):
        ExperimentConfig(strategy="nope")
    with pytest.raises(UsageError):
        ExperimentConfig(trials=0)
    with pytest.raises(UsageError):
        ExperimentConfig(beta=2.5)
    with pytest.raises(UsageError):
        ExperimentConfig(alpha=-1)
    with pytest.raises(UsageError):
        load_instance(ExperimentConfig())


def test_index_on_two_deltas(data_dir):
    rep = run_experiment(ExperimentConfig(strategy="index", trials=100,
                                          instance_path=str(data_dir / "two_delta.json")))
    assert rep.aggregates["total"]["mean"] == 2.0
    assert rep.aggregates["total"]["stderr"] == 0.0
    assert rep.ratio == 1.0 and rep.oracle_status == "ok"
    assert rep.aggregates["success_rate"] == 1.0


def test_aggregates_recompute_from_digests():
    rep = run_experiment(ExperimentConfig(trials=300, gen=GenParams(K=2, metric="random"),
                                          gen_seed=3))
    again = aggregate(rep.trials, 2)
    for name in ("total", "movement", "switching"):
        assert again[name]["mean"] == pytest.approx(rep.aggregates[name]["mean"], abs=1e-12)
        assert again[name]["stderr"] == pytest.approx(rep.aggregates[name]["stderr"], abs=1e-12)
    assert rep.ratio == pytest.approx(rep.aggregates["total"]["mean"] / rep.oracle["value"])


def test_same_seed_same_body():
    cfg = ExperimentConfig(strategy="doubling-unit", trials=50, seed=11,
                           gen=GenParams(K=2, metric="random"), gen_seed=1)
    assert run_experiment(cfg).body() == run_experiment(cfg).body()
    other = ExperimentConfig(strategy="doubling-unit", trials=50, seed=12,
                             gen=GenParams(K=2, metric="random"), gen_seed=1)
    assert run_experiment(cfg).trials != run_experiment(other).trials


def test_workers_do_not_change_results():
    cfg = ExperimentConfig(trials=40, seed=2, gen=GenParams(K=2), gen_seed=4)
    pooled = ExperimentConfig(trials=40, seed=2, gen=GenParams(K=2), gen_seed=4, workers=3)
    assert run_experiment(cfg).body() == run_experiment(pooled).body()


def test_oracle_skipped_when_too_large():
    rep = run_experiment(ExperimentConfig(trials=5, gen=GenParams(), oracle_cap=3))
    assert rep.oracle is None and rep.ratio is None and rep.oracle_status == "skipped"
    off = run_experiment(ExperimentConfig(trials=5, gen=GenParams(), run_oracle=False))
    assert off.oracle_status == "disabled"


def test_report_file_appends_runs(tmp_path):
    path = tmp_path / "r.jsonl"
    cfg = ExperimentConfig(trials=7, scenario="paper_micro")
    assert write_report(run_experiment(cfg), path) == 1
    assert write_report(run_experiment(cfg), path) == 2
    records = [json.loads(line) for line in path.read_text().splitlines()]
    assert len(records) == 16
    for r in records:
        validate(r, TRIAL_SCHEMA if r["type"] == "trial" else FOOTER_SCHEMA)
    run2 = read_report(path)
    assert {r["run"] for r in run2} == {2}
    assert run2[-1]["type"] == "aggregate"
    first = [{k: v for k, v in r.items() if k not in ("run", "timestamp")} for r in read_report(path, 1)]
    second = [{k: v for k, v in r.items() if k not in ("run", "timestamp")} for r in run2]
    assert first == second


def test_every_strategy_runs():
    for name in STRATEGIES:
        rep = run_experiment(ExperimentConfig(strategy=name, trials=20, budget=50.0,
                                              gen=GenParams(K=2, metric="random"), gen_seed=6))
        assert rep.aggregates["trials"] == 20
        assert rep.aggregates["success_rate"] == 1.0


def test_doubling_rejects_active_start():
    with pytest.raises(UsageError):
        run_experiment(ExperimentConfig(strategy="doubling-unit", trials=1,
                                        scenario="banks_sundaram"))


def test_compare_two_deltas():
    cmp = compare_strategies([ExperimentConfig(strategy=s, trials=30, scenario="paper_micro")
                              for s in ("index", "doubling-unit")])
    assert [r["ratio"] for r in cmp.rows] == [1.0, 1.0]
    assert "index" in cmp.table()


def test_compare_counterexample():
    cfgs = [ExperimentConfig(strategy=s, trials=1000, scenario="dtw_counterexample",
                             run_oracle=False) for s in ("index", "sequential")]
    cmp = compare_strategies(cfgs)
    index, seq = cmp.rows
    assert index["mean_total"] >= 3 * seq["mean_total"]
    assert cmp.oracle_status == "disabled"


def test_compare_needs_two():
    with pytest.raises(UsageError):
        compare_strategies([])
    with pytest.raises(UsageError):
        compare_strategies([ExperimentConfig(scenario="paper_micro")])


def test_k_override():
    rep = run_experiment(ExperimentConfig(trials=3, scenario="paper_micro", K=2))
    assert rep.oracle["value"] == pytest.approx(8.0)
    assert np.allclose([d["total"] for d in rep.trials], 8.0)
