from dataclasses import replace

import numpy as np
import pytest

from weaklearn.audit import (
    build_target,
    calibrate_epsilon,
    default_dictionary,
    gram_schmidt_complement,
    protected_functions,
    protected_rank,
    verify_stationarity,
)
from weaklearn.errors import CalibrationError, HypothesisError
from weaklearn.models import FeatureCatalog, LinearFeatures, Logistic, OneLayerNN
from weaklearn.models.zoo import population_mse
from weaklearn.optim import minimize_mse
from weaklearn.population import AtomPopulation, MonteCarloPopulation, l2_inner
from weaklearn.population.catalog import constant, cosine_even_perturbation


def _linear(names: list[str]) -> LinearFeatures:
    return LinearFeatures(FeatureCatalog.from_names(names), 1)


@pytest.fixture
def atoms3() -> AtomPopulation:
    return AtomPopulation([-1.0, 0.0, 1.0])


@pytest.mark.unit
def test_complement_on_three_atoms(atoms3: AtomPopulation):
    model = _linear(["1", "x"])
    protected = protected_functions(model, [0.0, 0.0])
    complement = gram_schmidt_complement(atoms3, protected, default_dictionary(atoms3))
    # h is proportional to x^2 - 2/3 with unit norm
    np.testing.assert_allclose(complement.values, np.array([1.0, -2.0, 1.0]) / np.sqrt(2))
    assert complement.protected_rank == 2, "The constant is protected twice"
    assert complement.dictionary_index == 0
    x = atoms3.points
    np.testing.assert_allclose(complement(x), complement.values, atol=1e-15)
    for b in protected:
        assert abs(l2_inner(atoms3, complement, b)) < 1e-12


@pytest.mark.unit
def test_complement_orthogonal_under_gaussian(gaussian: MonteCarloPopulation):
    model = Logistic(1)
    protected = protected_functions(model, [0.0, 0.0])
    complement = gram_schmidt_complement(gaussian, protected, default_dictionary(gaussian))
    assert l2_inner(gaussian, complement, complement) == pytest.approx(1.0)
    for b in protected:
        assert abs(l2_inner(gaussian, complement, b)) < 1e-9


@pytest.mark.unit
def test_no_complement_on_two_atoms():
    pop = AtomPopulation([0.0, 1.0])
    protected = protected_functions(_linear(["1", "x"]), [0.0, 0.0])
    with pytest.raises(HypothesisError, match="no orthogonal complement found"):
        gram_schmidt_complement(pop, protected, default_dictionary(pop))


@pytest.mark.unit
def test_default_dictionary(gaussian: MonteCarloPopulation, atoms3: AtomPopulation):
    assert len(default_dictionary(atoms3)) == 3
    names = [fn.name for fn in default_dictionary(gaussian, 2)]
    assert names == ["cosine_even_perturbation"] * 2 + ["clipped_hermite"] * 2
    uniform = MonteCarloPopulation("uniform", 2, 0, 10_000)
    assert len(default_dictionary(uniform, 3)) == 6


@pytest.mark.unit
def test_protected_rank(atoms3: AtomPopulation):
    assert protected_rank(_linear(["1", "x"]), [0.0, 0.0], atoms3) == 2
    assert protected_rank(_linear(["x", "2*x"]), [0.0, 0.0], atoms3) == 2


@pytest.mark.unit
def test_build_target_linear(atoms3: AtomPopulation):
    model = _linear(["1", "x"])
    target = build_target(model, [0.0, 0.0], atoms3, restarts=4)
    assert target.c == 0.0
    assert target.epsilon == 0.1, "theta0 is the global argmin without halving"
    assert target.h_norm == target.epsilon
    assert np.all(target.ortho_residuals <= 1e-9 * target.epsilon)
    assert verify_stationarity(model, [0.0, 0.0], target, atoms3) <= 1e-8
    record = target.calibration
    assert record.best_rival_mse >= record.reference_mse - 1e-10
    np.testing.assert_allclose(record.optimization.theta_hat, [0.0, 0.0], atol=1e-7)
    pop = target.population(atoms3)
    np.testing.assert_allclose(pop.mean_values, 0.1 * np.array([1.0, -2.0, 1.0]) / np.sqrt(2))
    info = target.to_dict(atoms3)
    assert len(info["h_values"]) == 3
    assert info["calibration"]["certificate"] == "empirical"


@pytest.mark.unit
def test_build_target_logistic_gaussian(gaussian: MonteCarloPopulation):
    model = Logistic(1)
    dictionary = [cosine_even_perturbation(0.0, 1.0, 1.0)]
    target = build_target(model, [0.0, 0.0], gaussian, dictionary, restarts=4, max_iters=500)
    assert target.c == pytest.approx(0.5)
    pop = target.population(gaussian)
    reference = population_mse(model, [0.0, 0.0], pop)
    rival = minimize_mse(model, pop, restarts=4, seed=1, max_iters=500)
    assert rival.mse >= reference - 1e-10
    assert np.linalg.norm(rival.theta_hat) < 1e-2


@pytest.mark.unit
def test_build_target_noise(atoms3: AtomPopulation):
    target = build_target(_linear(["1", "x"]), [0.0, 0.0], atoms3, noise=0.3, restarts=2)
    np.testing.assert_allclose(target.population(atoms3).var_values, 0.3)


@pytest.mark.unit
def test_build_target_rejections(atoms3: AtomPopulation, gaussian: MonteCarloPopulation):
    model = _linear(["1", "x"])
    with pytest.raises(HypothesisError, match="degenerate perturbation"):
        build_target(model, [0.0, 0.0], atoms3, epsilon_init=0.0)
    with pytest.raises(HypothesisError, match="not constant"):
        build_target(model, [0.0, 1.0], atoms3)
    with pytest.raises(HypothesisError, match="singular"):
        build_target(OneLayerNN(1), [0.0, 0.0, 0.5, 0.0], gaussian)
    with pytest.raises(HypothesisError, match="degenerate"):
        build_target(model, [0.0, 0.0], AtomPopulation([1.0]))
    with pytest.raises(HypothesisError, match="no orthogonal complement"):
        build_target(model, [0.0, 0.0], atoms3, [constant(1.0)])


@pytest.mark.unit
def test_calibrate_epsilon_with_grid(atoms3: AtomPopulation):
    model = _linear(["1", "x"])
    target = build_target(model, [0.0, 0.0], atoms3, epsilon_init=0.5, restarts=2)
    grid = ([(-1.0, 1.0), (-1.0, 1.0)], 0.05)
    record = calibrate_epsilon(model, [0.0, 0.0], target, atoms3, restarts=2, grid=grid)
    assert record.epsilon == 0.5
    assert len(record.history) == 1 and record.history[0]["passed"]
    assert record.grid is not None and record.grid.n_points == 41 * 41
    assert record.reference_mse == pytest.approx(0.25)
    assert record.best_rival_mse >= record.reference_mse - 1e-10


def _tilted(target, pop: AtomPopulation, size: float):
    """The target with ``size * x`` added to h, a protected direction of the linear model."""
    values = target.complement.values + size * pop.points[:, 0]
    return replace(target, complement=replace(target.complement, values=values), calibration=None)


@pytest.mark.unit
def test_stationarity_detects_tilted_complement(atoms3: AtomPopulation):
    model = _linear(["1", "x"])
    target = build_target(model, [0.0, 0.0], atoms3, restarts=2)
    tilted = _tilted(target, atoms3, 0.1)
    # grad = -2 * epsilon * E[h' (1, x)] = (0, -2 * 0.1 * 0.1 * 2/3)
    grad_norm = verify_stationarity(model, [0.0, 0.0], tilted, atoms3)
    assert grad_norm == pytest.approx(2 * 0.1 * 0.1 * 2 / 3)
    assert grad_norm > 1e-3


@pytest.mark.unit
def test_calibrate_epsilon_halves(atoms3: AtomPopulation):
    model = _linear(["1", "x"])
    target = _tilted(build_target(model, [0.0, 0.0], atoms3, restarts=2), atoms3, 0.1)
    # The best rival gains epsilon^2 / 150, below the margin once epsilon < 1.22e-4
    record = calibrate_epsilon(model, [0.0, 0.0], target, atoms3, restarts=2)
    assert record.epsilon == pytest.approx(0.1 / 2**10)
    assert len(record.history) == 11
    assert [entry["passed"] for entry in record.history] == [False] * 10 + [True]
    epsilons = [entry["epsilon"] for entry in record.history]
    np.testing.assert_allclose(np.diff(np.log2(epsilons)), -1.0)
    for entry in record.history[:-1]:
        assert entry["best_rival_mse"] < entry["reference_mse"] - 1e-10


@pytest.mark.unit
def test_calibrate_epsilon_gives_up(atoms3: AtomPopulation):
    model = _linear(["1", "x"])
    target = _tilted(build_target(model, [0.0, 0.0], atoms3, restarts=2), atoms3, 1e4)
    with pytest.raises(CalibrationError, match="calibration failed"):
        calibrate_epsilon(model, [0.0, 0.0], target, atoms3, restarts=2)
