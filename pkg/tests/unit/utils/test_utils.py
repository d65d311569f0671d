import json
import logging
from pathlib import Path

import numpy as np
import pandas as pd
import pytest
from ml_collections import ConfigDict

from weaklearn.errors import ConfigError, ConsistencyError
from weaklearn.models import Logistic, OneLayerNN
from weaklearn.population import AtomPopulation, MonteCarloPopulation
from weaklearn.utils.config import (
    build_architecture,
    build_dictionary,
    build_model,
    build_population,
    build_theta0,
    grid_box,
    resolve_config,
    seeds,
)
from weaklearn.utils.defaults import defaults
from weaklearn.utils.logging_setup import RunLogger, setup_logging
from weaklearn.utils.report import Report
from weaklearn.utils.utils import load_config

CONFIG_DIR = Path(__file__).parents[3] / "config"


def _raw(**sections) -> dict:
    raw = {
        "schema_version": 1,
        "population": {"kind": "atoms", "atoms": [-1.0, 0.0, 1.0], "cond_mean": 0.0},
    }
    raw.update(sections)
    return raw


@pytest.mark.unit
@pytest.mark.parametrize("path", sorted(CONFIG_DIR.glob("*.toml")), ids=lambda p: p.stem)
def test_bundled_configs_resolve(path: Path):
    config = load_config(path)
    assert isinstance(config, ConfigDict), f"Config file is not a ConfigDict: {type(config)}"
    resolved = resolve_config(config)
    assert resolved.schema_version == 1
    assert build_population(resolved.population).dim == 1


@pytest.mark.unit
def test_load_config_json(tmp_path: Path):
    path = tmp_path / "experiment.json"
    path.write_text(json.dumps(_raw()))
    assert load_config(path).population.kind == "atoms"


@pytest.mark.unit
def test_load_config_errors(tmp_path: Path):
    with pytest.raises(ConfigError, match="not found"):
        load_config(tmp_path / "missing.toml")
    yaml = tmp_path / "experiment.yaml"
    yaml.write_text("population: {}")
    with pytest.raises(ConfigError, match="expected one of"):
        load_config(yaml)
    broken = tmp_path / "broken.json"
    broken.write_text("{")
    with pytest.raises(ConfigError, match="cannot parse"):
        load_config(broken)


@pytest.mark.unit
def test_defaults():
    assert defaults.get("optimizer.restarts") == 16
    assert defaults.get("network.k_schedule")[-1] == 2.0**16
    assert defaults.get("audit.missing", 3) == 3
    assert "contrast" in defaults


@pytest.mark.unit
def test_resolve_config_merges_defaults():
    config = resolve_config(_raw(optimizer={"restarts": 4}))
    assert config.optimizer.restarts == 4
    assert config.optimizer.max_iters == defaults.get("optimizer.max_iters")
    with pytest.raises(AttributeError):
        config.optimizer.extra = 1


@pytest.mark.unit
@pytest.mark.parametrize(
    ("raw", "message"),
    [
        (_raw(foo={}), "foo: unknown key"),
        (_raw(optimizer={"restart": 2}), "optimizer.restart: unknown key"),
        (_raw(optimizer={"restarts": 0}), "optimizer.restarts: must be positive"),
        (_raw(optimizer={"restarts": 2.5}), "optimizer.restarts: expected an integer"),
        (_raw(optimizer={"trace": 1}), "optimizer.trace: expected true or false"),
        (_raw(contrast={"epsilon": 0.0}), "contrast.epsilon: must be positive"),
        (_raw(adversarial={"noise": "gaussian"}), "adversarial.noise"),
        (_raw(population={"seed": -1}), "population.seed"),
        (_raw(grid={"low": 1.0, "high": 0.0}), "grid.high"),
        (_raw(grid={"step": 0.3}), "grid.step: 0.3 does not divide"),
        ({"population": {}}, "schema_version"),
    ],
)
def test_resolve_config_rejects(raw: dict, message: str):
    with pytest.raises(ConfigError, match=message):
        resolve_config(raw)


@pytest.mark.unit
def test_seed_override():
    config = resolve_config(_raw(), seed_override=11, trace=True)
    assert set(seeds(config).values()) == {11}
    assert {"population", "halfspace", "audit", "optimizer"} <= set(seeds(config))
    assert config.optimizer.trace


@pytest.mark.unit
def test_build_population():
    config = resolve_config(_raw())
    pop = build_population(config.population)
    assert isinstance(pop, AtomPopulation) and pop.n_points == 3
    section = {
        "kind": "monte_carlo",
        "n_samples": 10_000,
        "cond_mean": {"name": "cosine_even_perturbation", "base": 0.5},
        "cond_var": {"name": "bernoulli"},
    }
    pop = build_population(resolve_config(_raw(population=section)).population)
    assert isinstance(pop, MonteCarloPopulation)
    np.testing.assert_allclose(pop.var_values, pop.mean_values * (1 - pop.mean_values))


@pytest.mark.unit
@pytest.mark.parametrize(
    ("section", "message"),
    [
        ({"kind": "mixture", "cond_mean": 0.0}, "population.kind"),
        ({"kind": "atoms", "cond_mean": 0.0}, "population.atoms: missing key"),
        ({"kind": "atoms", "atoms": [0.0, 1.0]}, "population.cond_mean: missing key"),
        (
            {"kind": "atoms", "atoms": [0.0, 1.0], "cond_mean": {"name": "constant", "foo": 1}},
            "population.cond_mean.foo: unknown key",
        ),
        ({"kind": "atoms", "atoms": [0.0, 0.0], "cond_mean": 0.0}, "population.atoms"),
        ({"kind": "monte_carlo", "cond_mean": [0.0, 1.0]}, "per-atom values"),
    ],
)
def test_build_population_errors(section: dict, message: str):
    config = resolve_config(_raw(population=section))
    with pytest.raises(ConfigError, match=message):
        build_population(config.population)


@pytest.mark.unit
def test_build_model_and_theta0():
    config = resolve_config(_raw(model={"kind": "logistic", "theta0": [0.0, 0.0]}))
    model = build_model(config.model, 1)
    assert isinstance(model, Logistic)
    np.testing.assert_array_equal(build_theta0(config.model, model), [0.0, 0.0])
    section = ConfigDict({"kind": "one_layer_nn", "input_dim": 0})
    assert isinstance(build_model(section, 1), OneLayerNN)
    bad = resolve_config(_raw(model={"kind": "logistic", "theta0": [0.0]}))
    with pytest.raises(ConfigError, match="model.theta0: expected 2 entries"):
        build_theta0(bad.model, model)
    with pytest.raises(ConfigError, match="model.kind"):
        build_model(resolve_config(_raw(model={"kind": "svm"})).model, 1)
    with pytest.raises(ConfigError, match="model.features"):
        build_model(resolve_config(_raw(model={"kind": "linear_features"})).model, 1)
    mlp = resolve_config(_raw(model={"kind": "mlp", "widths": [2, 3], "activation": "relu"}))
    with pytest.raises(ConfigError, match="model.widths"):
        build_model(mlp.model, 1)


@pytest.mark.unit
def test_build_architecture():
    config = resolve_config(_raw(network={"widths": [1, 2], "activation": "relu"}))
    assert build_architecture(config.network).widths == (1, 2)
    with pytest.raises(ConfigError, match="network.activation"):
        build_architecture(ConfigDict({"widths": [1, 2], "activation": "gelu"}))
    with pytest.raises(ConfigError, match="network.widths"):
        build_architecture(ConfigDict({"widths": [1, 0], "activation": "relu"}))


@pytest.mark.unit
def test_build_dictionary_and_grid():
    dictionary = [{"name": "polynomial", "coeffs": [0.0, 0.0, 1.0]}]
    config = resolve_config(
        _raw(
            model={"kind": "logistic", "theta0": [0.0, 0.0]},
            adversarial={"dictionary": dictionary},
            grid={"enabled": True, "step": 0.5},
        )
    )
    pop = build_population(config.population)
    functions = build_dictionary(config, pop)
    assert [f.name for f in functions] == ["polynomial"]
    box, step = grid_box(config, Logistic(1))
    assert box == [(-2.0, 2.0), (-2.0, 2.0)] and step == 0.5
    assert grid_box(resolve_config(_raw()), Logistic(1)) is None
    assert len(build_dictionary(resolve_config(_raw()), pop)) == 3


@pytest.mark.unit
def test_report_json_and_tables(tmp_path: Path):
    report = Report("fisher-audit", {"grid": {"step": 0.5}}, {"audit": 0})
    report.add_verdict("condition1", True, np.float64(0.25), np.inf, "ok")
    report.payloads["matrix"] = np.eye(2)
    report.payloads["missing"] = np.nan
    report.tables["scan"] = pd.DataFrame({"k": [1.0, 2.0], "mse": [0.1, 1 / 3]})
    written = report.write(tmp_path / "audit.json")
    assert [p.name for p in written] == ["audit.json", "audit_scan.csv"]
    data = json.loads((tmp_path / "audit.json").read_text())
    assert data["schema_version"] == 1
    assert data["exit_code"] == 0 and data["passed"]
    assert data["verdicts"][0]["tolerance"] == "inf"
    assert data["payloads"]["missing"] == "nan"
    assert data["payloads"]["matrix"] == [[1.0, 0.0], [0.0, 1.0]]
    table = pd.read_csv(tmp_path / "audit_scan.csv")
    assert table["mse"].iloc[1] == 1 / 3, "CSV floats round-trip exactly"
    assert report.to_json() == report.to_json()


@pytest.mark.unit
def test_report_exit_codes():
    report = Report("verify-theorem1", {}, {})
    assert report.exit_code == 2, "A report without verdicts does not pass"
    report.add_verdict("a", True, 1.0, 0.0)
    report.add_verdict("b", False, 0.0, 1.0)
    assert report.exit_code == 2


@pytest.mark.unit
def test_report_revalidate():
    report = Report("verify-theorem1", {}, {})
    report.revalidate("mse", 1 / 6, 1 / 6 + 1e-12)
    with pytest.raises(ConsistencyError, match="mse"):
        report.revalidate("mse", 1 / 6, 1 / 6 + 1e-6)


@pytest.mark.unit
def test_run_logger(caplog: pytest.LogCaptureFixture):
    report = Report("fisher-audit", {"description": "demo", "audit": {"seed": 0}}, {})
    verdict = report.add_verdict("condition1", False, 0.0, 1e-8, "singular")
    run_logger = RunLogger("fisher-audit")
    with caplog.at_level(logging.INFO, logger="weaklearn.run"):
        run_logger.log_config(report.config)
        run_logger.log_verdict(verdict)
        run_logger.log_summary(report)
    assert "Description: demo" in caplog.text
    assert "[audit] seed=0" in caplog.text
    assert "condition1: FAIL" in caplog.text
    assert "exit code 2" in caplog.text


@pytest.mark.unit
def test_setup_logging(tmp_path: Path):
    assert setup_logging("WARNING") is None
    log_file = setup_logging("INFO", tmp_path / "run_logs", "fisher-audit")
    assert log_file is not None and log_file.parent == tmp_path / "run_logs"
    assert log_file.name.startswith("fisher-audit_")
    logging.getLogger("weaklearn.test").info("hello")
    for handler in logging.getLogger().handlers:
        handler.flush()
    assert "hello" in log_file.read_text()
    setup_logging("WARNING")
