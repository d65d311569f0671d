import jax

jax.config.update("jax_enable_x64", True)
jax.config.update("jax_compilation_cache_dir", "/tmp/jax_cache")
jax.config.update("jax_persistent_cache_min_entry_size_bytes", -1)
jax.config.update("jax_persistent_cache_min_compile_time_secs", 0)

from pathlib import Path  # noqa: E402

import pytest  # noqa: E402

from weaklearn.population import AtomPopulation, MonteCarloPopulation  # noqa: E402
from weaklearn.population.catalog import (  # noqa: E402
    bernoulli_variance,
    cosine_even_perturbation,
    polynomial,
)

CONFIG_DIR = Path(__file__).parents[1] / "config"


@pytest.fixture
def atoms_xsq() -> AtomPopulation:
    """X uniform on {-1, 0, 1} with Y = X^2, so Var(Y) = 2/9."""
    return AtomPopulation([-1.0, 0.0, 1.0], None, polynomial([0.0, 0.0, 1.0]))


@pytest.fixture(scope="session")
def gaussian() -> MonteCarloPopulation:
    """Standard Gaussian X with 10^5 samples and Y = 0."""
    return MonteCarloPopulation("normal", 1, 0, 100_000)


@pytest.fixture(scope="session")
def gaussian_adversarial() -> MonteCarloPopulation:
    """Binary Y with P(Y = 1 | X) = 1/2 + 0.1 (cos X - exp(-1/2)) under Gaussian X."""
    mean = cosine_even_perturbation(0.5, 0.1, 1.0)
    return MonteCarloPopulation("normal", 1, 0, 100_000, mean, bernoulli_variance(mean))
