"""Parametric model families, feature catalogs and feedforward networks."""

from weaklearn.models.features import FeatureCatalog, parse_feature
from weaklearn.models.network import (
    ACTIVATIONS,
    TANH_FORM,
    NetworkArchitecture,
    NetworkParams,
    activate,
    forward,
    hidden_values,
    permute_hidden_units,
)
from weaklearn.models.zoo import (
    MLP,
    Logistic,
    LinearFeatures,
    ModelHandle,
    OneLayerNN,
    population_mse,
    population_mse_grad,
)

__all__ = [
    "ACTIVATIONS",
    "MLP",
    "TANH_FORM",
    "FeatureCatalog",
    "LinearFeatures",
    "Logistic",
    "ModelHandle",
    "NetworkArchitecture",
    "NetworkParams",
    "OneLayerNN",
    "activate",
    "forward",
    "hidden_values",
    "parse_feature",
    "permute_hidden_units",
    "population_mse",
    "population_mse_grad",
]
