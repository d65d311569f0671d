from __future__ import annotations

import timeit
from pathlib import Path
from typing import TYPE_CHECKING

import numpy as np

if TYPE_CHECKING:
    from numpy.typing import NDArray

CONFIG_DIR = Path(__file__).parents[1] / "config"

load_config_code = """
import logging
from pathlib import Path

from weaklearn.utils.config import resolve_config
from weaklearn.utils.utils import load_config

logging.disable(logging.WARNING)
config = resolve_config(load_config(Path('{path}')))
"""

population_setup_code = """
from weaklearn.population import MonteCarloPopulation

pop = MonteCarloPopulation('normal', {dim}, 0, {n_samples}, lambda x: np.cos(x[:, 0]))
"""


def _repeat(stmt: str, setup: str, n_tests: int, number: int) -> NDArray[np.floating]:
    return np.array(timeit.repeat(stmt=stmt, setup=setup, number=number, repeat=n_tests))


def time_command(
    command: str, config: str, n_tests: int = 3, number: int = 1
) -> NDArray[np.floating]:
    setup = "from weaklearn.commands import run_command\n"
    stmt = f"run_command('{command}', '{CONFIG_DIR / config}')"
    return _repeat(stmt, setup, n_tests, number)


def time_halfspace(
    dim: int = 1, n_samples: int = 100_000, n_tests: int = 3, number: int = 1
) -> NDArray[np.floating]:
    setup = "import numpy as np\n" + population_setup_code.format(dim=dim, n_samples=n_samples)
    setup += "from weaklearn.construct import find_halfspace\n"
    stmt = f"find_halfspace(pop, n_directions={64 * dim})"
    return _repeat(stmt, setup, n_tests, number)


def time_fisher(
    config: str = "fisher_logistic_gaussian.toml", n_tests: int = 3, number: int = 10
) -> NDArray[np.floating]:
    setup = load_config_code.format(path=CONFIG_DIR / config)
    setup += """
from weaklearn.audit import fisher
from weaklearn.utils.config import build_model, build_population, build_theta0

pop = build_population(config.population)
model = build_model(config.model, pop.dim)
theta0 = build_theta0(config.model, model)
fisher(model, theta0, pop)
"""
    stmt = "fisher(model, theta0, pop)"
    return _repeat(stmt, setup, n_tests, number)
