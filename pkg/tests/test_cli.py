"""Registry, config validation, output artifacts, and exit codes."""

import json
import os

import pytest

from horoflow.cli import (EXIT_CONFIG, EXIT_OK, EXIT_TRUNCATION, EXPERIMENTS,
                          fmt, list_experiments, main, run, validate)
from horoflow.seeding import GENERATOR_NAME, trial_seed


def test_registry_is_complete_and_sorted():
    names = [row[0] for row in list_experiments()]
    assert names == sorted(EXPERIMENTS)
    assert len(names) == 12
    for name in ("hyperbolic-walk", "top-exponent", "oseledets-spectrum",
                 "filtration-probe", "operator-tau", "state-ratio",
                 "segal-sweep", "resnet-drift", "lipschitz-profile",
                 "max-stretch", "jacobian-cocycle", "metric-axioms"):
        assert name in EXPERIMENTS


def test_fmt_canonical_forms():
    assert fmt(True) == "1"
    assert fmt(3) == "3"
    assert fmt(0.1) == "0.10000000000000001"
    assert fmt("x") == "x"


def test_validate_diagnostics():
    assert validate({}) == ["experiment: missing"]
    assert validate({"experiment": "nope"}) == ["experiment: unknown name 'nope'"]
    diags = validate({"experiment": "top-exponent"})
    assert "seed: missing" in diags
    diags = validate({"experiment": "top-exponent", "seed": -1})
    assert any(d.startswith("seed:") for d in diags)
    diags = validate({"experiment": "top-exponent", "seed": 0, "n": 0})
    assert any(d.startswith("n:") for d in diags)
    assert validate({"experiment": "top-exponent", "seed": 0}) == []


def _tiny_config(tmp_path, **extra):
    cfg = {"experiment": "top-exponent", "seed": 1, "preset": "translation",
           "n": 50, "trials": 2, "output_dir": str(tmp_path)}
    cfg.update(extra)
    return cfg


def test_run_writes_csv_and_manifest(tmp_path):
    assert run(_tiny_config(tmp_path)) == EXIT_OK
    data = (tmp_path / "top-exponent-1.csv").read_text()
    lines = data.splitlines()
    assert lines[0] == "trial,per_trial,lambda_hat,std_error,tail_slope"
    assert len(lines) == 3
    manifest = json.loads((tmp_path / "top-exponent-1.manifest.json").read_text())
    assert manifest["generator"] == GENERATOR_NAME
    assert manifest["per_trial_seeds"] == [trial_seed(1, 0), trial_seed(1, 1)]
    assert manifest["truncations"] == 0
    assert manifest["data_file"] == "top-exponent-1.csv"


def test_run_writes_jsonl(tmp_path):
    assert run(_tiny_config(tmp_path, output_format="jsonl")) == EXIT_OK
    rows = [json.loads(line) for line in
            (tmp_path / "top-exponent-1.jsonl").read_text().splitlines()]
    assert len(rows) == 2
    assert rows[0]["trial"] == 0
    assert float(rows[0]["lambda_hat"]) == 1.0


def test_run_rejects_bad_config(tmp_path):
    assert run({"experiment": "nope", "seed": 0}) == EXIT_CONFIG
    assert run(_tiny_config(tmp_path, output_format="xml")) == EXIT_CONFIG


def test_run_truncation_exit_code(tmp_path):
    # a constant hyperbolic map expels every disk orbit past the boundary
    cfg = {"experiment": "top-exponent", "seed": 0, "preset": "disk_mobius",
           "mobius_a": 0.5, "n": 200, "trials": 3, "output_dir": str(tmp_path)}
    assert run(cfg) == EXIT_TRUNCATION


def test_run_is_deterministic(tmp_path):
    d1 = tmp_path / "a"
    d2 = tmp_path / "b"
    assert run(_tiny_config(d1, seed=9)) == EXIT_OK
    assert run(_tiny_config(d2, seed=9)) == EXIT_OK
    assert (d1 / "top-exponent-9.csv").read_bytes() == \
        (d2 / "top-exponent-9.csv").read_bytes()


def test_main_list_and_validate(tmp_path, capsys):
    assert main(["--list"]) == EXIT_OK
    out = capsys.readouterr().out
    assert "top-exponent" in out
    cfg_path = tmp_path / "cfg.json"
    cfg_path.write_text(json.dumps({"experiment": "top-exponent", "seed": 0}))
    assert main(["--config", str(cfg_path), "--validate-only"]) == EXIT_OK
    assert main(["--experiment", "nope", "--validate-only"]) == EXIT_CONFIG


def test_main_flags_override_config(tmp_path):
    cfg_path = tmp_path / "cfg.json"
    cfg_path.write_text(json.dumps(
        {"experiment": "top-exponent", "preset": "translation",
         "seed": 0, "n": 50, "trials": 1}))
    code = main(["--config", str(cfg_path), "--seed", "4",
                 "--out", str(tmp_path), "--format", "jsonl"])
    assert code == EXIT_OK
    assert (tmp_path / "top-exponent-4.jsonl").exists()


def test_main_reports_registry_on_unknown_experiment(tmp_path, capsys):
    assert main(["--experiment", "nope", "--seed", "0"]) == EXIT_CONFIG
    err = capsys.readouterr().err
    assert "registered experiments:" in err


def test_main_bad_config_file(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert main(["--config", str(bad)]) == EXIT_CONFIG
