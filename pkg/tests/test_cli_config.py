import json
from pathlib import Path

import pytest

from holonomy_lab.cli import SCHEMA_VERSION, main
from holonomy_lab.config import SEED_ENV, ConfigError, load_config, parse_config
from holonomy_lab.experiments import REGISTRY

CONFIGS = Path(__file__).resolve().parent.parent / "configs"


def test_every_experiment_has_a_config():
    assert {p.stem for p in CONFIGS.glob("*.yaml")} == set(REGISTRY)
    for p in CONFIGS.glob("*.yaml"):
        assert load_config(p, env={}).experiment == p.stem


@pytest.mark.parametrize(
    "raw",
    [
        {},
        {"experiment": "nope"},
        {"experiment": "pinching", "n": 2},
        {"experiment": "pinching", "tolerances": {"x": 0}},
        {"experiment": "pinching", "seed": -1},
        {"experiment": "pinching", "bogus": 1},
        {"experiment": "pinching", "space": {"kind": "flat"}},
        {"experiment": "pinching", "h": "small"},
        [1, 2],
    ],
)
def test_invalid_configs(raw):
    with pytest.raises(ConfigError):
        parse_config(raw, env={})


def test_seed_override():
    assert parse_config({"experiment": "pinching", "seed": 3}, env={}).seed == 3
    assert parse_config({"experiment": "pinching", "seed": 3}, env={SEED_ENV: "11"}).seed == 11
    with pytest.raises(ConfigError):
        parse_config({"experiment": "pinching"}, env={SEED_ENV: "abc"})


def _write(tmp_path, text):
    p = tmp_path / "cfg.yaml"
    p.write_text(text)
    return str(p)


def test_run_writes_versioned_report(tmp_path, monkeypatch):
    monkeypatch.delenv(SEED_ENV, raising=False)
    out = tmp_path / "out"
    code = main(["run", _write(tmp_path, "experiment: bracket-table\nparams:\n  n_values: [3, 4]\n"), "--out", str(out)])
    assert code == 0
    rep = json.loads((out / "report.json").read_text())
    assert rep["schema_version"] == SCHEMA_VERSION
    assert rep["passed"] is True
    for c in rep["criteria"]:
        assert set(c) >= {"name", "value", "tol", "pass", "anchor"}
    for t in rep["tables"].values():
        assert (out / t["file"]).exists()


def test_report_is_deterministic(tmp_path, monkeypatch):
    monkeypatch.delenv(SEED_ENV, raising=False)
    cfg = _write(tmp_path, "experiment: holonomy-group\nnum_loops: 6\nparams:\n  n_values: [3, 4]\n")
    reports = []
    for k, workers in enumerate((1, 2)):
        out = tmp_path / f"o{k}"
        assert main(["run", cfg, "--out", str(out), "--workers", str(workers)]) == 0
        rep = json.loads((out / "report.json").read_text())
        rep.pop("timing")
        reports.append(rep)
        csvs = sorted(p.read_bytes() for p in out.glob("*.csv"))
        reports.append(csvs)
    assert reports[0] == reports[2]
    assert reports[1] == reports[3]


def test_env_seed_reaches_report(tmp_path, monkeypatch):
    monkeypatch.setenv(SEED_ENV, "42")
    out = tmp_path / "o"
    assert main(["run", _write(tmp_path, "experiment: fixed-subspaces\nseed: 1\n"), "--out", str(out)]) == 0
    assert json.loads((out / "report.json").read_text())["seed"] == 42


def test_invalid_config_exit_code(tmp_path, capsys):
    assert main(["run", _write(tmp_path, "experiment: bracket-table\nn: 1\n")]) == 2
    err = json.loads(capsys.readouterr().err)
    assert err["error"]["exit_code"] == 2
    assert main(["run", str(tmp_path / "missing.yaml")]) == 2


def test_failing_criterion_exit_code(tmp_path, capsys):
    # an impossible tolerance turns a passing check into a reported failure
    cfg = _write(tmp_path, "experiment: line-bundle\ntolerances:\n  line_ratio: 1.0e-30\n")
    out = tmp_path / "o"
    assert main(["run", cfg, "--out", str(out)]) == 1
    err = json.loads(capsys.readouterr().err.strip().splitlines()[-1])
    assert err["error"]["failed"] == ["line-bundle-ratio-error"]
    assert json.loads((out / "report.json").read_text())["passed"] is False


def test_numeric_failure_gives_error_object(tmp_path, capsys):
    # loops far too large for the logarithm branch: a documented numerical failure
    cfg = _write(tmp_path, "experiment: curvature-morphism\nh: 1.5\nparams:\n  n_values: [3]\n")
    out = tmp_path / "o"
    assert main(["run", cfg, "--out", str(out)]) == 1
    err = json.loads(capsys.readouterr().err)
    assert err["error"]["type"] in ("LogBranchError", "ExtrapolationError")
    assert "error" in json.loads((out / "report.json").read_text())


def test_list_and_describe(capsys):
    assert main(["list"]) == 0
    text = capsys.readouterr().out
    assert "flat-control" in text and "negative control" in text
    assert main(["list", "--json"]) == 0
    listing = json.loads(capsys.readouterr().out)
    assert len(listing) == 13 and all(e["anchors"] for e in listing)
    assert sum(e["negative_control"] for e in listing) == 2
    assert main(["describe", "hyperbolic-holonomy", "--json"]) == 0
    assert "ex:hyp_geod_hol" in json.loads(capsys.readouterr().out)["anchors"]
    assert main(["describe", "pinching"]) == 0
    assert "expected" in capsys.readouterr().out
    assert main(["describe", "nope"]) == 2
