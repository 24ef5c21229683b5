"""End-to-end CLI tests: config parsing, modes, exit codes, determinism."""

import json

import pytest

from gw2 import cli
from gw2.errors import ConfigError

BASE_SCENARIO = {
    "laws": {
        "offspring1": {"kind": "Bernoulli", "params": {"p": 0.5}},
        "offspring2": {"kind": "Bernoulli", "params": {"p": 0.3}},
        "immigration": {"kind": "Poisson", "params": {"lam": 1.0}},
        "initial0": {"kind": "Deterministic", "params": {"c": 1}},
        "initialm1": {"kind": "Deterministic", "params": {"c": 1}},
    },
    "horizon": 2,
    "master_seed": 5,
    "replicates": 5000,
    "thresholds": [1, 3, 9],
}


def write_config(tmp_path, doc, name="cfg.json"):
    path = tmp_path / name
    path.write_text(json.dumps(doc))
    return str(path)


# -- parsing ------------------------------------------------------------------

def test_empty_config_missing_scenario():
    with pytest.raises(ConfigError, match="missing scenario"):
        cli.parse_config("")


def test_unknown_top_level_key_rejected():
    doc = {"mode": "simulate", "output_dir": "x", "scenario": BASE_SCENARIO,
           "bogus": 1}
    with pytest.raises(ConfigError, match="bogus"):
        cli.parse_config(json.dumps(doc))


def test_negative_parameter_names_the_field():
    doc = {"mode": "simulate", "output_dir": "x",
           "scenario": {**BASE_SCENARIO,
                        "laws": {**BASE_SCENARIO["laws"],
                                 "immigration": {"kind": "DiscretePareto",
                                                 "params": {"alpha": -2.0}}}}}
    with pytest.raises(ConfigError, match="scenario.laws.immigration"):
        cli.parse_config(json.dumps(doc))


def test_defaults_applied():
    doc = {"mode": "simulate", "output_dir": "x",
           "scenario": {"laws": BASE_SCENARIO["laws"], "horizon": 2}}
    cfg = cli.parse_config(json.dumps(doc))
    assert cfg.scenario.replicates == 1_000_000
    assert cfg.scenario.thresholds == tuple(10.0 * 2 ** j for j in range(15))
    assert cfg.rveps_variant == "consistent"


def test_parse_round_trip():
    doc = {"mode": "simulate", "output_dir": "x", "scenario": BASE_SCENARIO}
    cfg = cli.parse_config(json.dumps(doc))
    again = cli.parse_config(json.dumps(
        {"mode": "simulate", "output_dir": "x", "scenario": cfg.scenario.to_dict()}))
    assert again.scenario == cfg.scenario
    assert again.scenario.digest() == cfg.scenario.digest()


def test_predict_requires_profile():
    doc = {"mode": "predict", "output_dir": "x", "scenario": BASE_SCENARIO}
    with pytest.raises(ConfigError, match="profile"):
        cli.parse_config(json.dumps(doc))


def test_horizon_cap_for_predictions():
    doc = {"mode": "predict", "output_dir": "x",
           "scenario": {**BASE_SCENARIO, "horizon": 25},
           "profile": {"heavy": ["immigration"], "index": 2.0,
                       "light_moment_order": 3.0}}
    with pytest.raises(ConfigError, match="horizon"):
        cli.parse_config(json.dumps(doc))


# -- end-to-end ---------------------------------------------------------------

def test_simulate_deterministic_zero(tmp_path):
    laws = {name: {"kind": "Deterministic", "params": {"c": 0}}
            for name in BASE_SCENARIO["laws"]}
    doc = {"mode": "simulate", "output_dir": str(tmp_path / "out"),
           "scenario": {"laws": laws, "horizon": 2, "replicates": 1000,
                        "thresholds": [0.5, 2.0]}}
    assert cli.main(["--config", write_config(tmp_path, doc)]) == 0
    lines = (tmp_path / "out" / "ensemble.csv").read_text().splitlines()
    assert lines[0] == "threshold,count,N"
    assert lines[1] == "0.5,0,1000"
    assert lines[2] == "2.0,0,1000"


def test_predict_hand_verified_coefficients(tmp_path):
    doc = {
        "mode": "predict", "output_dir": str(tmp_path / "out"),
        "scenario": {
            "laws": {
                "offspring1": {"kind": "Bernoulli", "params": {"p": 0.5}},
                "offspring2": {"kind": "Bernoulli", "params": {"p": 0.3}},
                "immigration": {"kind": "Deterministic", "params": {"c": 0}},
                "initial0": {"kind": "DiscretePareto", "params": {"alpha": 2.0}},
                "initialm1": {"kind": "DiscretePareto", "params": {"alpha": 2.0}},
            },
            "horizon": 1, "replicates": 1, "thresholds": [10],
        },
        "profile": {"heavy": ["initial0", "initialm1"], "index": 2.0,
                    "light_moment_order": 3.0},
    }
    assert cli.main(["--config", write_config(tmp_path, doc)]) == 0
    rows = (tmp_path / "out" / "prediction.csv").read_text().splitlines()[1:]
    coeffs = {parts[1]: float(parts[2]) for parts in (r.split(",") for r in rows)}
    assert coeffs["initial0"] == pytest.approx(0.25)
    assert coeffs["initialm1"] == pytest.approx(0.09)


def test_verify_identity_scenario_passes(tmp_path):
    # X_1 = immigration exactly (all other laws zero): prediction is the
    # immigration tail itself, so verification must PASS with exit 0
    doc = {
        "mode": "verify", "output_dir": str(tmp_path / "out"),
        "scenario": {
            "laws": {
                "offspring1": {"kind": "Deterministic", "params": {"c": 0}},
                "offspring2": {"kind": "Deterministic", "params": {"c": 0}},
                "immigration": {"kind": "DiscretePareto", "params": {"alpha": 2.0}},
                "initial0": {"kind": "Deterministic", "params": {"c": 0}},
                "initialm1": {"kind": "Deterministic", "params": {"c": 0}},
            },
            "horizon": 1, "master_seed": 7, "replicates": 200000,
            "thresholds": [4, 8, 16, 32],
        },
        "profile": {"heavy": ["immigration"], "index": 2.0,
                    "light_moment_order": 3.0},
    }
    assert cli.main(["--config", write_config(tmp_path, doc)]) == 0
    report = (tmp_path / "out" / "report.csv").read_text().splitlines()
    assert report[0] == "x,empirical,ci_lo,ci_hi,predicted,ratio,in_window"
    assert len(report) == 5


def test_verify_fail_exit_code(tmp_path):
    # same scenario but a tolerance nothing can meet
    doc = {
        "mode": "verify", "output_dir": str(tmp_path / "out"),
        "scenario": {
            "laws": {
                "offspring1": {"kind": "Deterministic", "params": {"c": 0}},
                "offspring2": {"kind": "Deterministic", "params": {"c": 0}},
                "immigration": {"kind": "DiscretePareto", "params": {"alpha": 2.0}},
                "initial0": {"kind": "Deterministic", "params": {"c": 0}},
                "initialm1": {"kind": "Deterministic", "params": {"c": 0}},
            },
            "horizon": 1, "master_seed": 7, "replicates": 50000,
            "thresholds": [4, 8, 16],
        },
        "profile": {"heavy": ["immigration"], "index": 2.0,
                    "light_moment_order": 3.0},
        "window": {"tolerance": 0.0},
    }
    assert cli.main(["--config", write_config(tmp_path, doc)]) == 2


def test_usage_error_exit_code(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert cli.main(["--config", str(bad)]) == 1
    assert cli.main(["--config", str(tmp_path / "missing.json")]) == 1


def test_check_appendix_mode(tmp_path):
    doc = {
        "mode": "check-appendix", "output_dir": str(tmp_path / "out"),
        "random_sum": {
            "count": {"kind": "DiscretePareto", "params": {"alpha": 2.5}},
            "summand": {"kind": "Poisson", "params": {"lam": 2.0}},
            "replicates": 500000,
            "thresholds": [10, 20, 40, 80],
            "propositions": ["heavy-count"],
            "master_seed": 5,
            "window": {"x_floor": 20.0},
        },
    }
    assert cli.main(["--config", write_config(tmp_path, doc)]) == 0
    assert (tmp_path / "out" / "report_heavy-count.csv").exists()


def test_byte_identical_outputs_across_workers(tmp_path):
    doc = {"mode": "simulate", "output_dir": None, "scenario": BASE_SCENARIO}
    outputs = []
    for workers, sub in [(1, "a"), (8, "b")]:
        doc["output_dir"] = str(tmp_path / sub)
        code = cli.main(["--config", write_config(tmp_path, doc, f"{sub}.json"),
                         "--workers", str(workers)])
        assert code == 0
        outputs.append((tmp_path / sub / "ensemble.csv").read_bytes())
    assert outputs[0] == outputs[1]


def test_seed_override_changes_output(tmp_path):
    doc = {"mode": "simulate", "output_dir": str(tmp_path / "a"),
           "scenario": BASE_SCENARIO}
    cfg_path = write_config(tmp_path, doc)
    assert cli.main(["--config", cfg_path]) == 0
    first = (tmp_path / "a" / "ensemble.csv").read_bytes()
    doc["output_dir"] = str(tmp_path / "b")
    cfg_path = write_config(tmp_path, doc, "cfg2.json")
    assert cli.main(["--config", cfg_path, "--seed", "99"]) == 0
    second = (tmp_path / "b" / "ensemble.csv").read_bytes()
    assert first != second
