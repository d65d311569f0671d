"""Populations and their expectations.

Populations describe ``(X, Y)`` by the law of ``X`` together with ``E[Y|X]`` and ``Var(Y|X)``.
Atom populations give exact expectations, Monte Carlo populations seeded sample means.
"""

from weaklearn.population.catalog import NamedFunction, make_function
from weaklearn.population.population import (
    AtomPopulation,
    MonteCarloPopulation,
    Population,
    PopulationStats,
    evaluate,
    expect,
    expect_with_se,
    gap_tolerance,
    l2_inner,
    mse_gap,
    paired_gap,
    require_nondegenerate,
    stats,
    weighted_mean,
    weighted_se,
)
from weaklearn.population.sampling import derive_rng

__all__ = [
    "AtomPopulation",
    "MonteCarloPopulation",
    "NamedFunction",
    "Population",
    "PopulationStats",
    "derive_rng",
    "evaluate",
    "expect",
    "expect_with_se",
    "gap_tolerance",
    "l2_inner",
    "make_function",
    "mse_gap",
    "paired_gap",
    "require_nondegenerate",
    "stats",
    "weighted_mean",
    "weighted_se",
]
