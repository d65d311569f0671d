"""Validation of experiment configs and construction of the objects they describe.

A raw config is merged over the package defaults, checked key by key and locked. Errors name the
offending key path, e.g. ``population.cond_mean.foo: unknown key``.
"""

from __future__ import annotations

import logging
import numbers
from typing import TYPE_CHECKING, Any

import numpy as np
from ml_collections import ConfigDict

from weaklearn.audit.adversarial import default_dictionary
from weaklearn.errors import ConfigError, ShapeError
from weaklearn.models.features import FeatureCatalog
from weaklearn.models.network import ACTIVATIONS, NetworkArchitecture
from weaklearn.models.zoo import MLP, LinearFeatures, Logistic, OneLayerNN
from weaklearn.population import AtomPopulation, MonteCarloPopulation, make_function
from weaklearn.population.catalog import NamedFunction, constant
from weaklearn.population.sampling import SAMPLERS
from weaklearn.utils.defaults import defaults

if TYPE_CHECKING:
    from collections.abc import Mapping

    from weaklearn.models.zoo import ModelHandle
    from weaklearn.population import Population

logger = logging.getLogger(__name__)

SCHEMA_VERSION = 1
TOP_LEVEL = {"description", "schema_version"}
# Keys accepted without a default value
OPTIONAL = {
    "population": {"kind", "atoms", "weights", "cond_mean", "cond_var"},
    "model": {"kind", "features", "widths", "activation", "theta0"},
    "network": {"widths", "activation"},
    "halfspace": {"n_directions"},
    "adversarial": {"dictionary"},
}
POPULATION_KINDS = ("atoms", "monte_carlo")
MODEL_KINDS = ("linear_features", "logistic", "one_layer_nn", "mlp")
POSITIVE = {
    "population": ("n_samples", "dim"),
    "halfspace": ("directions_per_dim", "thresholds_per_direction", "n_directions"),
    "audit": ("far_radius", "close_tol", "budget", "box_half_width", "max_iters"),
    "adversarial": ("epsilon", "dictionary_terms"),
    "optimizer": ("restarts", "max_iters", "tol", "init_scale"),
    "grid": ("step",),
    "contrast": ("epsilon", "frequency"),
}
INTEGER = {
    "population": ("n_samples", "dim", "seed"),
    "model": ("input_dim",),
    "halfspace": ("directions_per_dim", "thresholds_per_direction", "seed", "n_directions"),
    "audit": ("budget", "max_iters", "seed", "grid_density"),
    "adversarial": ("dictionary_terms",),
    "optimizer": ("restarts", "seed", "max_iters"),
}


def _is_number(value: Any) -> bool:
    return isinstance(value, numbers.Real) and not isinstance(value, bool)


def _check_types(merged: dict[str, Any], base: dict[str, Any]):
    for section, values in merged.items():
        if not isinstance(values, dict):
            continue
        for key, value in values.items():
            path = f"{section}.{key}"
            default = base.get(section, {}).get(key)
            if _is_number(default) and not _is_number(value):
                if not (section in ("adversarial", "contrast") and key == "noise"):
                    raise ConfigError(f"{path}: expected a number, got {value!r}")
            if isinstance(default, bool) and not isinstance(value, bool):
                raise ConfigError(f"{path}: expected true or false, got {value!r}")
            integral = _is_number(value) and float(value).is_integer()
            if key in INTEGER.get(section, ()) and not integral:
                raise ConfigError(f"{path}: expected an integer, got {value!r}")
            if key in POSITIVE.get(section, ()) and not value > 0:
                raise ConfigError(f"{path}: must be positive, got {value!r}")
            if key == "seed" and not 0 <= value < 2**64:
                raise ConfigError(f"{path}: seeds must be 64-bit non-negative integers")
    for section in ("adversarial", "contrast"):
        noise = merged[section]["noise"]
        if noise != "bernoulli" and not (_is_number(noise) and noise >= 0):
            raise ConfigError(f"{section}.noise: expected a variance >= 0 or 'bernoulli'")
    grid = merged["grid"]
    if grid["high"] < grid["low"]:
        raise ConfigError("grid.high: must not be below grid.low")
    intervals = (grid["high"] - grid["low"]) / grid["step"]
    if abs(intervals - round(intervals)) > 1e-9 * max(1.0, intervals):
        raise ConfigError(
            f"grid.step: {grid['step']!r} does not divide [{grid['low']}, {grid['high']}] evenly"
        )


def resolve_config(
    raw: Mapping[str, Any], seed_override: int | None = None, trace: bool = False
) -> ConfigDict:
    """Merge a raw config over the defaults and validate it.

    Args:
        raw: Config as loaded from file.
        seed_override: Replaces every seed of the config if given.
        trace: Keep optimizer traces in the report.

    Returns:
        The locked, validated config.
    """
    raw = raw.to_dict() if isinstance(raw, ConfigDict) else dict(raw)
    base = defaults.as_dict()
    merged = {key: value for key, value in base.items()}
    for key, value in raw.items():
        if key in TOP_LEVEL:
            merged[key] = value
            continue
        if key not in base or not isinstance(base[key], dict):
            raise ConfigError(f"{key}: unknown key")
        if not isinstance(value, dict):
            raise ConfigError(f"{key}: expected a table")
        allowed = set(base[key]) | OPTIONAL.get(key, set())
        if unknown := sorted(set(value) - allowed):
            raise ConfigError(f"{key}.{unknown[0]}: unknown key")
        merged[key] = base[key] | value
    if merged.get("schema_version") != SCHEMA_VERSION:
        raise ConfigError(f"schema_version: expected {SCHEMA_VERSION}")
    _check_types(merged, base)
    if seed_override is not None:
        if not 0 <= seed_override < 2**64:
            raise ConfigError("seed_override: seeds must be 64-bit non-negative integers")
        for section in merged.values():
            if isinstance(section, dict) and "seed" in section:
                section["seed"] = int(seed_override)
    merged["optimizer"]["trace"] = bool(trace) or merged["optimizer"]["trace"]
    config = ConfigDict(merged)
    config.lock()
    return config


def _function(spec: Any, path: str, mean: NamedFunction | None = None) -> Any:
    """Catalog function, scalar or per-atom values of a conditional moment."""
    if isinstance(spec, (dict, ConfigDict)):
        spec = spec.to_dict() if isinstance(spec, ConfigDict) else spec
        for key, value in spec.items():
            if key != "name" and not isinstance(value, (numbers.Real, list, tuple)):
                raise ConfigError(f"{path}.{key}: expected a number or a list")
        return make_function(spec, path, mean)
    if _is_number(spec):
        return constant(spec)
    if isinstance(spec, (list, tuple)) and all(_is_number(v) for v in spec):
        return [float(v) for v in spec]
    raise ConfigError(f"{path}: expected a function table, a number or a list of numbers")


def build_population(section: ConfigDict) -> Population:
    """Population described by the ``population`` section."""
    kind = section.get("kind")
    if kind not in POPULATION_KINDS:
        raise ConfigError(f"population.kind: expected one of {POPULATION_KINDS}, got {kind!r}")
    if "cond_mean" not in section:
        raise ConfigError("population.cond_mean: missing key")
    mean = _function(section.cond_mean, "population.cond_mean")
    if "cond_var" in section:
        named = mean if isinstance(mean, NamedFunction) else None
        var = _function(section.cond_var, "population.cond_var", named)
    else:
        var = constant(0.0)
    if kind == "atoms":
        if "atoms" not in section:
            raise ConfigError("population.atoms: missing key")
        try:
            return AtomPopulation(section.atoms, section.get("weights"), mean, var)
        except (ValueError, ShapeError) as e:
            raise ConfigError(f"population.atoms: {e}") from e
    if section.sampler not in SAMPLERS:
        raise ConfigError(f"population.sampler: expected one of {SAMPLERS}")
    if isinstance(mean, list) or isinstance(var, list):
        raise ConfigError("population.cond_mean: per-atom values need kind = 'atoms'")
    return MonteCarloPopulation(
        section.sampler,
        section.dim,
        section.seed,
        section.n_samples,
        mean,
        var,
        section.low,
        section.high,
    )


def build_architecture(section: ConfigDict, path: str = "network") -> NetworkArchitecture:
    """Network architecture of a ``network`` (or ``mlp`` model) section."""
    if "widths" not in section or "activation" not in section:
        raise ConfigError(f"{path}.widths: widths and activation are required")
    if section.activation not in ACTIVATIONS:
        raise ConfigError(f"{path}.activation: expected one of {ACTIVATIONS}")
    try:
        return NetworkArchitecture(tuple(section.widths), section.activation)
    except ShapeError as e:
        raise ConfigError(f"{path}.widths: {e}") from e


def build_model(section: ConfigDict, input_dim: int) -> ModelHandle:
    """Model described by the ``model`` section.

    Args:
        section: The ``model`` section.
        input_dim: Dimension of ``X``, used when ``model.input_dim`` is 0.
    """
    kind = section.get("kind")
    p = section.input_dim or input_dim
    if p != input_dim:
        raise ConfigError(f"model.input_dim: X is {input_dim}-dimensional, got {p}")
    match kind:
        case "linear_features":
            if "features" not in section:
                raise ConfigError("model.features: missing key")
            try:
                return LinearFeatures(FeatureCatalog.from_names(list(section.features)), p)
            except ShapeError as e:
                raise ConfigError(f"model.features: {e}") from e
        case "logistic":
            return Logistic(p)
        case "one_layer_nn":
            return OneLayerNN(p)
        case "mlp":
            arch = build_architecture(section, "model")
            if arch.input_dim != p:
                raise ConfigError(f"model.widths: first width must be {p}")
            return MLP(arch)
    raise ConfigError(f"model.kind: expected one of {MODEL_KINDS}, got {kind!r}")


def build_theta0(section: ConfigDict, model: ModelHandle) -> np.ndarray:
    """The reference parameter ``model.theta0``."""
    if "theta0" not in section:
        raise ConfigError("model.theta0: missing key")
    theta0 = np.asarray(section.theta0, dtype=np.float64)
    if theta0.shape != (model.param_dim,):
        raise ConfigError(f"model.theta0: expected {model.param_dim} entries, got {theta0.size}")
    return theta0


def build_dictionary(config: ConfigDict, pop: Population) -> list[NamedFunction]:
    """Complement candidates: ``adversarial.dictionary`` or the default dictionary."""
    if "dictionary" not in config.adversarial:
        return default_dictionary(pop, config.adversarial.dictionary_terms)
    return [
        _function(spec, f"adversarial.dictionary[{i}]")
        for i, spec in enumerate(config.adversarial.dictionary)
    ]


def grid_box(
    config: ConfigDict, model: ModelHandle
) -> tuple[list[tuple[float, float]], float] | None:
    """``(box, step)`` of the grid certificate, or None if disabled."""
    if not config.grid.enabled:
        return None
    box = [(config.grid.low, config.grid.high)] * model.param_dim
    return box, config.grid.step


def seeds(config: ConfigDict) -> dict[str, int]:
    """Every seed of the config by section."""
    return {
        name: int(section.seed)
        for name, section in config.items()
        if isinstance(section, ConfigDict) and "seed" in section
    }
