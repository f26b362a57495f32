from __future__ import annotations

import json

import pytest

from smcmdp.cli import EXIT_BUDGET, EXIT_INVALID, EXIT_OK, build_parser, main


def test_run_writes_json(tmp_path, capsys):
    out = tmp_path / "r.json"
    assert main(["run", "end_component", "--seed", "2", "-o", str(out)]) == EXIT_OK
    doc = json.loads(out.read_text())
    assert doc["converged"] and doc["config"]["epsilon"] == 0.1  # bundled default
    assert main(["run", "end_component", "--seed", "2"]) == EXIT_OK
    assert json.loads(capsys.readouterr().out) == doc


def test_exit_codes(tmp_path, capsys):
    assert main(["run", "end_component", "--epsilon", "0.001", "--max-batches", "1"]) == EXIT_BUDGET
    assert main(["run", "no-such-model"]) == EXIT_INVALID
    assert main(["run", "end_component", "--delta", "1.5"]) == EXIT_INVALID
    assert main(["run", "end_component", "--mode", "black"]) == EXIT_INVALID
    bad = tmp_path / "bad.json"
    bad.write_text('{"states": ["a"], "initial": "a", "target": [], "actions": {"a": {"x": {"a": 0.5}}}}')
    assert main(["run", str(bad)]) == EXIT_INVALID
    assert "sums to" in capsys.readouterr().err


def test_flags_reach_the_config(tmp_path):
    out = tmp_path / "r.json"
    main(["run", "exit_fragment", "--no-scc-fragments", "--ci-method", "hoeffding", "--fixed-paths", "300", "-o", str(out)])
    cfg = json.loads(out.read_text())["config"]
    assert cfg["scc_fragments"] is False and cfg["ci_method"] == "hoeffding" and cfg["fixed_paths"] == 300
    main(["run", "exit_fragment", "--baseline", "--fixed-paths", "300", "-o", str(out)])
    cfg = json.loads(out.read_text())["config"]
    assert not any(cfg[k] for k in ("small_support", "independence", "equivalence", "chains", "scc_fragments"))


def test_black_mode_run(tmp_path):
    out = tmp_path / "r.json"
    code = main(["run", "end_component", "--mode", "black", "--p-min", "0.1", "--seed", "1", "-o", str(out)])
    doc = json.loads(out.read_text())
    assert code == EXIT_OK and doc["converged"]
    assert doc["bounds"][0] <= 0.7 <= doc["bounds"][1]


def test_coverage_refuses_unsound_methods(capsys):
    assert main(["coverage", "end_component", "--ci-method", "wilson-cc", "--trials", "2"]) == EXIT_INVALID
    assert main(["coverage", "end_component", "--ci-method", "wilson-cc", "--trials", "2", "--paths", "200",
                 "--allow-unsound"]) == EXIT_OK
    doc = json.loads(capsys.readouterr().out)
    assert doc["sound_method"] is False and doc["trials"] == 2


def test_solve_transform_ablate_figures(tmp_path, capsys):
    assert main(["solve", "exit_fragment"]) == EXIT_OK
    assert json.loads(capsys.readouterr().out)["value"] == pytest.approx(5 / 7)
    assert main(["transform", "end_component"]) == EXIT_OK
    assert json.loads(capsys.readouterr().out)["transitions_transformed"] == 4
    assert main(["ablate", "--models", "end_component", "--seeds", "1", "--axes", "cp"]) == EXIT_OK
    assert "cp" in json.loads(capsys.readouterr().out)["summary"]
    assert main(["figures", "--out-dir", str(tmp_path), "--points", "5"]) == EXIT_OK
    assert len(capsys.readouterr().out.split()) == 4


def test_parser_rejects_unknown_method():
    with pytest.raises(SystemExit):
        build_parser().parse_args(["run", "end_component", "--ci-method", "nope"])
