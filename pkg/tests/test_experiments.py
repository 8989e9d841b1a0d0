import json

import numpy as np
import pytest

from dupdel.experiments import (ConfigError, ExperimentSpec, mean_stderr, run_experiment,
                                tv_with_stderr)


def test_spec_round_trip(tmp_path):
    spec = ExperimentSpec("growth_law", 0.4, 1000, replicas=3, tolerances={"sigmas": 5})
    path = tmp_path / "spec.json"
    path.write_text(json.dumps(spec.to_dict()))
    back = ExperimentSpec.from_json(path)
    assert back == spec
    assert back.tolerances["sigmas"] == 5
    assert back.tolerances["ratio"] == 0.01  # defaults are merged in


@pytest.mark.parametrize("doc", [
    {"kind": "nope", "theta": 0.5, "horizon": 10},
    {"kind": "growth_law", "theta": 1.5, "horizon": 10},
    {"kind": "growth_law", "theta": 0.5, "horizon": -1},
    {"kind": "growth_law", "theta": 0.5, "horizon": 10, "replicas": 0},
    {"kind": "growth_law", "theta": 0.5, "horizon": 10, "version": 4},
    {"kind": "growth_law", "theta": 0.5, "horizon": 10, "tolerances": {"sigmas": 0}},
    {"kind": "growth_law", "theta": 0.5, "horizon": 10, "colour": "red"},
    {"kind": "growth_law", "theta": 0.5, "horizon": 10, "master_seed": -1},
])
def test_spec_validation(doc):
    with pytest.raises(ConfigError):
        ExperimentSpec.from_dict(doc)


def test_invalid_json(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text("{not json")
    with pytest.raises(ConfigError):
        ExperimentSpec.from_json(path)


def test_mean_stderr():
    assert mean_stderr([2.0, 4.0]) == (3.0, 1.0)
    m, s = mean_stderr([5.0])
    assert (m, s) == (5.0, 0.0)
    assert np.isnan(mean_stderr([])[0])


def test_tv_with_stderr():
    q = np.array([0.5, 0.5])
    tv, se = tv_with_stderr(np.array([0, 1] * 500), q)
    assert tv == pytest.approx(0.0)
    tv, _ = tv_with_stderr(np.zeros(100, dtype=int), q)
    assert tv == pytest.approx(0.5)


def test_growth_law_version1():
    res = run_experiment(ExperimentSpec("growth_law", 0.4, 50_000, replicas=4, master_seed=3))
    assert res.passed, res.verdicts
    assert any(v.metric.startswith("N_over_n") for v in res.verdicts)


def test_growth_law_version2_and_3():
    res = run_experiment(ExperimentSpec("growth_law", 0.6, 100_000, version=2, replicas=3,
                                        options={"drift_from": 1e4}))
    assert res.passed, res.verdicts
    res = run_experiment(ExperimentSpec("growth_law", 0.5, 6.0, version=3, replicas=3000))
    assert res.passed, res.verdicts
    assert "geometric_buckets" in res.tables


def test_degree_convergence_small():
    res = run_experiment(ExperimentSpec("degree_convergence", 0.3, 200_000, replicas=3))
    assert res.verdict("final_l1_pass_fraction").passed
    assert res.verdict("l1_trend").passed


def test_first_passage_experiment():
    res = run_experiment(ExperimentSpec("first_passage", 0.5, 1, replicas=20_000,
                                        options={"r_grid": [1, 2, 5, 50, 200], "mc_r": [2, 5]}))
    assert res.passed, res.verdicts
    rows = res.tables["first_passage"]
    assert [r["r"] for r in rows] == [1, 2, 5, 50, 200]


def test_fixed_vertex_experiments():
    res = run_experiment(ExperimentSpec("fixed_vertex_marginal", 0.5, 30.0, replicas=20_000))
    assert res.passed, res.verdicts
    res = run_experiment(ExperimentSpec("tv_decay", 0.5, 4.0, replicas=20_000, snapshots=[1.0, 2.0, 4.0]))
    assert res.verdict("tv_decreasing").passed


def test_max_degree_growth_subcritical():
    res = run_experiment(ExperimentSpec("max_degree_growth", 0.3, 100_000, replicas=3,
                                        options={"n_min": 1e4}))
    assert res.passed, res.verdicts


def test_workers_do_not_change_results():
    base = dict(kind="growth_law", theta=0.4, horizon=20_000, replicas=4, master_seed=8)
    one = run_experiment(ExperimentSpec(**base)).to_dict()
    two = run_experiment(ExperimentSpec(**base, workers=2)).to_dict()
    one["spec"].pop("workers")
    two["spec"].pop("workers")
    assert one == two


def test_result_json_serializable():
    res = run_experiment(ExperimentSpec("growth_law", 0.4, 1000, replicas=2))
    doc = json.loads(json.dumps(res.to_dict(), default=float))
    assert doc["schema_version"] == 1
    assert {"snapshot", "metric", "mean", "stderr", "count"} <= set(doc["aggregates"][0])
