from __future__ import annotations

import csv
import json
from dataclasses import replace

import pytest

from smcmdp.model import exact_reachability_value, from_document
from smcmdp.pipeline import (
    ADAPTIVE_NOTE,
    ConfigError,
    RunConfig,
    bundled_models,
    coverage_experiment,
    emit_figures,
    resolve_model,
    run_ablation,
    run_smc,
    solve_exact,
    transform_report,
)
from smcmdp.quotient import Transforms


def test_bundled_index():
    models = bundled_models()
    assert {"end_component", "exit_fragment", "ladder", "rare_coin", "mec_grid"} <= set(models)
    for name, entry in models.items():
        assert 0 < entry["epsilon"] < 1
        resolve_model(name)


def test_resolve_model_by_path(tmp_path):
    path = tmp_path / "m.json"
    path.write_text(json.dumps({"states": ["x"], "initial": "x", "target": ["x"], "actions": {"x": {"a": {"x": 1.0}}}}))
    assert resolve_model(str(path)).states == ("x",)
    with pytest.raises(FileNotFoundError):
        resolve_model(str(tmp_path / "missing.json"))


def test_config_validation():
    for bad in (dict(epsilon=0.0), dict(delta=1.0), dict(batch_size=0), dict(mode="white"),
                dict(mode="black"), dict(step_cap=0), dict(fixed_paths=-1)):
        with pytest.raises(ConfigError):
            RunConfig("end_component", **bad)
    with pytest.raises(ValueError):
        RunConfig("end_component", ci_method="bogus")
    with pytest.raises(ConfigError):
        RunConfig("end_component").without("bogus")
    cfg = RunConfig("end_component", epsilon=0.05)
    assert cfg.kappa == pytest.approx(0.005)
    assert cfg.without("cp").ci_method == "hoeffding"
    assert not cfg.without("scc-fragments").scc_fragments
    base = cfg.baseline()
    assert base.transforms == Transforms(False, False, False) and not base.small_support


def test_run_converges_and_contains_exact_value():
    r = run_smc(RunConfig("end_component", epsilon=0.1, seed=3))
    assert r.converged and r.gap <= 0.1
    lo, hi = r.bounds
    assert lo <= 0.7 <= hi
    doc = json.loads(r.dumps())
    assert doc["stopping"]["note"] == ADAPTIVE_NOTE
    assert doc["history"][-1]["paths"] == r.paths
    assert "wall_time" not in r.dumps()
    assert "wall_time" in run_smc(RunConfig("end_component", epsilon=0.1, seed=3), timing=True).dumps()


def test_initial_state_in_target_needs_no_paths():
    m = from_document({"states": ["g"], "initial": "g", "target": ["g"], "actions": {"g": {"a": {"g": 1.0}}}})
    r = run_smc(RunConfig("inline", epsilon=0.01), m=m)
    assert r.bounds == (1.0, 1.0) and r.converged


def test_fixed_paths_is_a_single_look():
    r = run_smc(RunConfig("exit_fragment", fixed_paths=2500, seed=4))
    assert r.paths == 2500
    assert json.loads(r.dumps())["stopping"]["mode"] == "fixed"


def test_exhausted_budget_is_reported():
    r = run_smc(RunConfig("end_component", epsilon=0.001, max_batches=2))
    assert not r.converged and r.paths == 2000


def test_ablation_of_a_model_without_fragments():
    doc = run_ablation(RunConfig("end_component", epsilon=0.1), ["end_component"], [0, 1], axes=["scc-fragments", "cp"])
    row = doc["models"]["end_component"]
    assert row["scc-fragments"]["ratio"] == pytest.approx(1.0)
    assert row["baseline"]["ratio"] >= 1.0
    assert doc["summary"]["cp"]["min"] is not None


def test_coverage_experiment_counts():
    doc = coverage_experiment(RunConfig("end_component", delta=0.1), trials=20, paths=500)
    assert doc["trials"] == 20 and doc["failed"] == 0
    assert doc["exact"] == pytest.approx(0.7)
    assert doc["contained"] >= 16


@pytest.mark.parametrize("name", ["end_component", "mec_grid"])
def test_black_mode_contains_exact_value(name):
    m = resolve_model(name)
    exact = exact_reachability_value(m)[m.initial]
    r = run_smc(RunConfig(name, epsilon=0.1, mode="black", p_min=0.1, seed=1))
    assert r.converged
    assert r.bounds[0] - 1e-9 <= exact <= r.bounds[1] + 1e-9


def test_solve_and_transform_reports():
    m = resolve_model("exit_fragment")
    assert solve_exact(m)["value"] == pytest.approx(5 / 7)
    rep = transform_report(m, Transforms())
    assert rep["transitions_transformed"] == 4
    assert len(rep["distributions"]) == 2


def test_emit_figures(tmp_path):
    paths = emit_figures(str(tmp_path), coverage_points=11)
    names = sorted(p.split("/")[-1] for p in paths)
    assert names == ["coverage_wilson.csv", "ratio_eps.csv", "ratio_grid.csv", "ratio_phat.csv"]
    rows = list(csv.DictReader(open(tmp_path / "ratio_eps.csv")))
    assert all(1.3 <= float(r["ratio"]) <= 1.8 for r in rows if float(r["epsilon"]) <= 0.1)
    cov = list(csv.DictReader(open(tmp_path / "coverage_wilson.csv")))
    assert len(cov) == 22 and set(cov[0]) == {"n", "delta", "p", "coverage"}


def test_runs_are_reproducible():
    cfg = RunConfig("mec_grid", epsilon=0.1, seed=9)
    assert run_smc(cfg).dumps() == run_smc(replace(cfg)).dumps()
