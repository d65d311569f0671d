import numpy as np
import pytest

from weaklearn.errors import ConfigError, EvaluationError, HypothesisError, ShapeError
from weaklearn.population import (
    AtomPopulation,
    MonteCarloPopulation,
    derive_rng,
    expect,
    expect_with_se,
    l2_inner,
    make_function,
    mse_gap,
    paired_gap,
    require_nondegenerate,
    stats,
)
from weaklearn.population.catalog import (
    bernoulli_variance,
    constant,
    cosine_even_perturbation,
    indicator_halfspace,
    polynomial,
)


@pytest.mark.unit
def test_stats_atoms(atoms_xsq: AtomPopulation):
    s = stats(atoms_xsq)
    assert s.mean_y == pytest.approx(2 / 3, abs=1e-15)
    assert s.var_y == pytest.approx(2 / 9, abs=1e-15)
    assert s.expected_cond_var == 0.0
    assert s.weak_learnable, "Y = X^2 on three atoms is weakly learnable"
    assert s.se == 0.0


@pytest.mark.unit
def test_stats_constant_mean():
    pop = AtomPopulation([-1.0, 0.0, 1.0], None, 0.5, 0.25)
    s = stats(pop)
    assert s.var_y == pytest.approx(0.25)
    assert s.gap == pytest.approx(0.0, abs=1e-15)
    assert not s.weak_learnable, "Constant E[Y|X] must not be weakly learnable"


@pytest.mark.unit
def test_atom_validation():
    with pytest.raises(ValueError, match="sum to 1"):
        AtomPopulation([0.0, 1.0], [0.5, 0.6])
    with pytest.raises(ValueError, match="strictly positive"):
        AtomPopulation([0.0, 1.0], [1.0, 0.0])
    with pytest.raises(ValueError, match="distinct"):
        AtomPopulation([0.0, 0.0, 1.0])
    with pytest.raises(ShapeError):
        AtomPopulation([0.0, 1.0], None, [1.0, 2.0, 3.0])
    with pytest.raises(ValueError, match="non-negative"):
        AtomPopulation([0.0, 1.0], None, 0.0, -1.0)


@pytest.mark.unit
def test_from_weighted_points_merges_duplicates():
    pop = AtomPopulation.from_weighted_points(
        [0.0, 0.0, 1.0], [0.25, 0.25, 0.5], [0.0, 1.0, 2.0], 0.0
    )
    assert pop.n_points == 2
    np.testing.assert_allclose(pop.weights, [0.5, 0.5])
    np.testing.assert_allclose(pop.mean_values, [0.5, 2.0])
    # Mixture of two point masses at Y = 0 and Y = 1
    np.testing.assert_allclose(pop.var_values, [0.25, 0.0])


@pytest.mark.unit
def test_nonfinite_values_are_rejected():
    with pytest.raises(EvaluationError, match="non-finite"):
        AtomPopulation([0.0, 1.0], None, lambda x: 1.0 / x[:, 0])


@pytest.mark.unit
def test_degenerate_population():
    with pytest.raises(HypothesisError, match="degenerate"):
        require_nondegenerate(AtomPopulation([1.0]))


@pytest.mark.unit
def test_monte_carlo_is_reproducible():
    a = MonteCarloPopulation("normal", 2, 7, 1000)
    b = MonteCarloPopulation("normal", 2, 7, 1000)
    c = MonteCarloPopulation("normal", 2, 8, 1000)
    np.testing.assert_array_equal(a.points, b.points)
    assert not np.array_equal(a.points, c.points)
    assert a.points.shape == (1000, 2)


@pytest.mark.unit
def test_monte_carlo_uniform_box():
    pop = MonteCarloPopulation("uniform", 1, 0, 10_000, low=-2.0, high=3.0)
    assert pop.points.min() >= -2.0 and pop.points.max() < 3.0


@pytest.mark.unit
def test_derive_rng_streams():
    first = derive_rng(3, "restart-1").standard_normal(4)
    np.testing.assert_array_equal(first, derive_rng(3, "restart-1").standard_normal(4))
    assert not np.array_equal(first, derive_rng(3, "restart-2").standard_normal(4))


@pytest.mark.unit
def test_expectations(gaussian: MonteCarloPopulation, atoms_xsq: AtomPopulation):
    mean, se = expect_with_se(gaussian, lambda x: x[:, 0] ** 2)
    assert abs(mean - 1.0) < 5 * se, f"E[X^2] = {mean} +- {se}"
    assert expect(atoms_xsq, lambda x: x[:, 0] ** 4) == pytest.approx(2 / 3)
    assert expect_with_se(atoms_xsq, lambda x: x[:, 0])[1] == 0.0
    assert l2_inner(atoms_xsq, lambda x: x[:, 0], lambda x: x[:, 0] ** 3) == pytest.approx(2 / 3)


@pytest.mark.unit
def test_cosine_perturbation_is_centered(gaussian: MonteCarloPopulation):
    fn = cosine_even_perturbation(0.0, 1.0, 1.0)
    mean, se = expect_with_se(gaussian, fn)
    assert abs(mean) < 5 * se, f"E[cos X - exp(-1/2)] = {mean} +- {se}"
    np.testing.assert_allclose(fn(np.zeros((1, 1))), 1.0 - np.exp(-0.5))


@pytest.mark.unit
def test_mse_gap(atoms_xsq: AtomPopulation):
    perfect = atoms_xsq.mean_values
    gap, se = mse_gap(atoms_xsq, perfect)
    assert gap == pytest.approx(2 / 9) and se == 0.0
    gap, _ = paired_gap(atoms_xsq, 2 / 3, np.full(3, 2 / 3))
    assert gap == pytest.approx(0.0, abs=1e-15)


@pytest.mark.unit
def test_catalog():
    x = np.array([[-1.0], [0.5], [2.0]])
    np.testing.assert_allclose(polynomial([1.0, 0.0, 2.0])(x), [3.0, 1.5, 9.0])
    np.testing.assert_allclose(indicator_halfspace([1.0], 0.0, -1.0, 4.0)(x), [4.0, -1.0, -1.0])
    np.testing.assert_allclose(constant(2.5)(x), [2.5, 2.5, 2.5])
    mean = polynomial([0.25, 0.5])
    np.testing.assert_allclose(bernoulli_variance(mean)(x), [-0.25 * 1.25, 0.5 * 0.5, 1.25 * -0.25])


@pytest.mark.unit
def test_make_function():
    fn = make_function({"name": "polynomial", "coeffs": [0.0, 1.0]})
    assert fn.to_dict() == {"name": "polynomial", "coeffs": [0.0, 1.0], "coordinate": 0}
    with pytest.raises(ConfigError, match="cond_mean.name"):
        make_function({"name": "spline"}, "cond_mean")
    with pytest.raises(ConfigError, match="cond_mean.foo: unknown key"):
        make_function({"name": "constant", "foo": 1.0}, "cond_mean")
