import json
import sys
from pathlib import Path

import numpy as np
import pytest

from weaklearn.cli import main
from weaklearn.commands import run_command
from weaklearn.utils.report import Report

CONFIG_DIR = Path(__file__).parents[2] / "config"

RUNS = {
    ("verify-theorem1", "atoms_xsq_relu.toml"): 0,
    ("verify-theorem1", "gaussian_logistic_adversarial_nn.toml"): 0,
    ("verify-theorem1", "independent_y.toml"): 2,
    ("verify-theorem2", "linear_3atoms.toml"): 0,
    ("verify-theorem2", "logistic_gaussian_even.toml"): 0,
    ("verify-theorem2", "onelayer_nn_as_subject.toml"): 2,
    ("fisher-audit", "fisher_logistic_gaussian.toml"): 0,
    ("fisher-audit", "fisher_onelayer_nn.toml"): 2,
    ("fisher-audit", "fisher_collinear_linear.toml"): 2,
    ("proposition-contrast", "proposition_contrast.toml"): 0,
}


def verdicts(report: Report) -> dict[str, bool]:
    return {v.name: v.passed for v in report.verdicts}


@pytest.mark.integration
@pytest.mark.parametrize(("command", "config_file"), list(RUNS), ids=lambda x: x)
def test_bundled_config_exit_codes(command: str, config_file: str):
    report = run_command(command, CONFIG_DIR / config_file)
    expected = RUNS[(command, config_file)]
    assert report.exit_code == expected, f"Verdicts: {verdicts(report)}"
    json.loads(report.to_json())


@pytest.mark.integration
def test_theorem1_on_atoms():
    report = run_command("verify-theorem1", CONFIG_DIR / "atoms_xsq_relu.toml")
    result = report.payloads["theorem1"]
    assert result["achieved_mse"] <= 1 / 6 + 1e-9
    assert report.payloads["stats"]["var_y"] == pytest.approx(2 / 9)
    assert set(report.tables) == {"scan", "k_schedule"}


@pytest.mark.integration
def test_theorem1_negative_control():
    report = run_command("verify-theorem1", CONFIG_DIR / "independent_y.toml")
    (verdict,) = report.verdicts
    assert verdict.name == "verify-theorem1"
    assert "weak learnability hypothesis fails" in verdict.detail
    assert np.isnan(verdict.gap)


@pytest.mark.integration
def test_theorem2_linear_atoms():
    report = run_command("verify-theorem2", CONFIG_DIR / "linear_3atoms.toml")
    assert all(verdicts(report).values())
    assert any("rank 2" in w for w in report.warnings), "Support of 3 atoms needs the rank fallback"
    target = report.payloads["target"]
    h = np.asarray(target["h_values"])
    np.testing.assert_allclose(np.abs(h), np.array([1.0, 2.0, 1.0]) / np.sqrt(2), atol=1e-12)
    assert report.payloads["stationarity_grad_norm"] <= 1e-8


@pytest.mark.integration
def test_theorem2_stops_at_failed_condition():
    report = run_command("verify-theorem2", CONFIG_DIR / "onelayer_nn_as_subject.toml")
    result = verdicts(report)
    assert not result["condition1_local_identifiability"]
    assert not result["theorem2"]
    assert "target" not in report.payloads
    assert "condition1_local_identifiability" in report.verdicts[-1].detail


@pytest.mark.integration
def test_fisher_audit_logistic():
    report = run_command("fisher-audit", CONFIG_DIR / "fisher_logistic_gaussian.toml")
    assert any("I/16" in w for w in report.warnings)
    matrix = np.asarray(report.payloads["fisher"]["matrix"])
    np.testing.assert_allclose(matrix, np.eye(2) / 16, atol=5e-3)


@pytest.mark.integration
def test_fisher_audit_collinear():
    report = run_command("fisher-audit", CONFIG_DIR / "fisher_collinear_linear.toml")
    result = verdicts(report)
    assert not result["condition1_local_identifiability"]
    assert not result["condition2_strong_identifiability"]
    probe = report.payloads["strong_identifiability"]
    assert probe["verdict"] == "counterexample-found"


@pytest.mark.integration
def test_proposition_contrast():
    report = run_command("proposition-contrast", CONFIG_DIR / "proposition_contrast.toml")
    table = report.tables["contrast"].set_index("model")
    assert not table.loc["logistic", "certified_gain"]
    assert table.loc["network", "certified_gain"]
    assert table.loc["one_layer_nn", "mse"] <= table.loc["network", "mse"] + 1e-9 * 0.25


@pytest.mark.integration
def test_reports_are_reproducible():
    path = CONFIG_DIR / "gaussian_logistic_adversarial_nn.toml"
    a, b = run_command("verify-theorem1", path), run_command("verify-theorem1", path)
    assert a.to_json() == b.to_json()
    c = run_command("verify-theorem1", path, seed_override=1)
    assert c.to_json() != a.to_json()
    assert verdicts(c) == verdicts(a)
    assert set(c.seeds.values()) == {1}


@pytest.mark.integration
def test_cli_writes_report(tmp_path: Path, monkeypatch: pytest.MonkeyPatch):
    out = tmp_path / "reports" / "atoms.json"
    config = str(CONFIG_DIR / "atoms_xsq_relu.toml")
    argv = ["weaklearn", "verify-theorem1", "--config", config, "--out", str(out)]
    monkeypatch.setattr(sys, "argv", argv + ["--log_dir", str(tmp_path / "logs")])
    with pytest.raises(SystemExit) as info:
        main()
    assert info.value.code == 0
    assert json.loads(out.read_text())["command"] == "verify-theorem1"
    assert (tmp_path / "reports" / "atoms_k_schedule.csv").exists()
    assert len(list((tmp_path / "logs").glob("verify-theorem1_*.log"))) == 1


@pytest.mark.integration
@pytest.mark.parametrize(
    ("args", "code"),
    [
        (["verify-theorem1", "--config", "independent_y.toml"], 2),
        (["verify-theorem1", "--config", "missing.toml"], 1),
        (["fisher-audit", "--config", "atoms_xsq_relu.toml"], 1),
        (["verify-theorem3", "--config", "atoms_xsq_relu.toml"], 1),
    ],
)
def test_cli_exit_codes(args: list[str], code: int, monkeypatch: pytest.MonkeyPatch):
    args = [str(CONFIG_DIR / a) if a.endswith(".toml") else a for a in args]
    monkeypatch.setattr(sys, "argv", ["weaklearn", *args, "--log_level", "WARNING"])
    with pytest.raises(SystemExit) as info:
        main()
    assert info.value.code == code
