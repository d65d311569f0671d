import numpy as np
import pytest
from scipy import integrate
from scipy.special import expit
from scipy.stats import norm

from weaklearn.construct import (
    build_indicator,
    build_relu_indicator,
    build_tanh_indicator,
    closed_form,
    indicator_error_schedule,
    l2_indicator_error,
    verify_theorem1,
)
from weaklearn.errors import HypothesisError, SearchError, ShapeError
from weaklearn.models import NetworkArchitecture, forward
from weaklearn.population import AtomPopulation, MonteCarloPopulation


@pytest.mark.unit
@pytest.mark.parametrize(
    ("widths", "activation", "passthrough"),
    [
        ((1, 1), "sigmoid", "resharpen"),
        ((2, 3, 2), "sigmoid", "resharpen"),
        ((2, 3, 2), "scaled_tanh", "identity"),
        ((1, 2), "relu", "resharpen"),
        ((2, 1, 3), "relu", "resharpen"),
        ((2, 4, 1, 1, 2), "relu", "resharpen"),
    ],
)
def test_construction_matches_closed_form(widths: tuple, activation: str, passthrough: str):
    arch = NetworkArchitecture(widths, activation)
    alpha = np.ones(widths[0]) / np.sqrt(widths[0])
    params = build_indicator(arch, alpha, 0.3, 2.0, -1.0, 8.0, passthrough)
    x = np.random.default_rng(0).standard_normal((200, widths[0]))
    z = x @ alpha - 0.3
    expected = closed_form(arch, z, 2.0, -1.0, 8.0, passthrough)
    np.testing.assert_allclose(forward(arch, params, x), expected, atol=1e-12)


@pytest.mark.unit
def test_relu_ramp_values():
    arch = NetworkArchitecture((1, 2), "relu")
    params = build_relu_indicator(arch, [1.0], 0.0, 3.0, 1.0, 4.0)
    x = np.array([[-1.0], [0.0], [0.125], [0.25], [2.0]])
    # amplitude * (1 - ramp(k z)) + offset
    np.testing.assert_allclose(forward(arch, params, x), [4.0, 4.0, 2.5, 1.0, 1.0])


@pytest.mark.unit
def test_sigmoid_single_layer_closed_form():
    arch = NetworkArchitecture((1, 1), "sigmoid")
    params = build_tanh_indicator(arch, [1.0], 0.5, 2.0, 1.0, 10.0)
    x = np.linspace(-2, 2, 9)[:, None]
    expected = 2.0 * (1 - expit(10.0 * (x[:, 0] - 0.5))) + 1.0
    np.testing.assert_allclose(forward(arch, params, x), expected, atol=1e-14)


@pytest.mark.unit
def test_construction_errors():
    with pytest.raises(HypothesisError, match="two last-layer units"):
        build_relu_indicator(NetworkArchitecture((1, 3, 1), "relu"), [1.0], 0.0, 1.0, 0.0, 1.0)
    with pytest.raises(ShapeError):
        build_tanh_indicator(NetworkArchitecture((1, 2), "relu"), [1.0], 0.0, 1.0, 0.0, 1.0)
    with pytest.raises(ShapeError):
        build_indicator(NetworkArchitecture((2, 2), "sigmoid"), [1.0], 0.0, 1.0, 0.0, 1.0)


def _gaussian_indicator_error(k: float) -> float:
    """L2 distance between 1 - sigmoid(k x) and 1{x <= 0} under a standard normal."""
    # Substituting u = k x keeps the sharp transition at unit scale
    below, _ = integrate.quad(lambda u: norm.pdf(u / k) * expit(u) ** 2 / k, -np.inf, 0)
    return float(np.sqrt(2 * below))


@pytest.mark.unit
def test_sigmoid_indicator_convergence(gaussian: MonteCarloPopulation):
    arch = NetworkArchitecture((1, 1), "sigmoid")
    schedule = [2.0**i for i in range(13)]
    table = indicator_error_schedule(gaussian, arch, [1.0], 0.0, 1.0, 0.0, schedule)
    errors, se = table["l2_error"].to_numpy(), table["se"].to_numpy()
    assert errors[-1] < 0.01, f"L2 error {errors[-1]} at k = 4096"
    assert np.all(errors[1:] <= errors[:-1] + 3 * se[1:]), "Error must shrink along the schedule"
    for k, error, error_se in zip(schedule[::4], errors[::4], se[::4]):
        oracle = _gaussian_indicator_error(k)
        assert abs(error - oracle) <= 4 * error_se + 1e-12, f"k = {k}: {error} vs {oracle}"


@pytest.mark.unit
def test_l2_indicator_error_on_atoms():
    pop = AtomPopulation([-1.0, 1.0])
    arch = NetworkArchitecture((1, 2), "relu")
    params = build_relu_indicator(arch, [1.0], 0.0, 1.0, 0.0, 1.0)
    assert l2_indicator_error(arch, params, pop, [1.0], 0.0, 1.0, 0.0) == 0.0


@pytest.mark.unit
def test_verify_theorem1_atoms(atoms_xsq: AtomPopulation):
    result = verify_theorem1(atoms_xsq, NetworkArchitecture((1, 2), "relu"))
    assert result.certified
    assert result.achieved_mse <= 1 / 6 + 1e-9
    assert result.achieved_mse < 2 / 9
    assert result.gap == pytest.approx(1 / 18)
    assert result.tolerance == pytest.approx(1e-9 * 2 / 9)
    assert result.k == 2.0, "At k = 1 the ramp has not saturated at x = 0"
    assert result.best_mse <= result.achieved_mse
    assert not result.warnings
    expected = ["k", "mse", "gap", "se", "tolerance", "certified", "predicted_mse"]
    assert list(result.table.columns) == expected


@pytest.mark.unit
def test_verify_theorem1_tanh_on_atoms_warns(atoms_xsq: AtomPopulation):
    result = verify_theorem1(atoms_xsq, NetworkArchitecture((1, 1), "sigmoid"))
    assert result.certified
    assert any("density" in w for w in result.warnings)


@pytest.mark.unit
def test_verify_theorem1_gaussian(gaussian_adversarial: MonteCarloPopulation):
    arch = NetworkArchitecture((1, 1), "sigmoid")
    result = verify_theorem1(gaussian_adversarial, arch, n_directions=8)
    assert result.certified
    assert result.gap > 3 * result.gap_se
    assert result.achieved_mse < result.var_y


@pytest.mark.unit
def test_verify_theorem1_failures(atoms_xsq: AtomPopulation):
    with pytest.raises(HypothesisError, match="two last-layer units"):
        verify_theorem1(atoms_xsq, NetworkArchitecture((1, 1), "relu"))
    independent = AtomPopulation([-1.0, 0.0, 1.0], None, 0.5, 0.25)
    with pytest.raises(HypothesisError, match="weak learnability hypothesis fails"):
        verify_theorem1(independent, NetworkArchitecture((1, 2), "relu"))
    with pytest.raises(SearchError, match="k schedule exhausted") as info:
        verify_theorem1(atoms_xsq, NetworkArchitecture((1, 2), "relu"), k_schedule=[1e-6])
    assert len(info.value.table) == 1
    with pytest.raises(ShapeError):
        verify_theorem1(atoms_xsq, NetworkArchitecture((2, 2), "relu"))


@pytest.mark.unit
def test_verify_theorem1_reports_first_certified_k(gaussian_adversarial: MonteCarloPopulation):
    arch = NetworkArchitecture((1, 1), "sigmoid")
    result = verify_theorem1(gaussian_adversarial, arch, n_directions=8)
    table = result.table.set_index("k")
    assert not table.loc[table.index < result.k, "certified"].any()
    assert table.loc[result.k, "certified"]
    assert result.achieved_mse == pytest.approx(table.loc[result.k, "mse"], rel=1e-15)
    assert result.best_mse == pytest.approx(table.loc[table["certified"], "mse"].min(), rel=1e-15)
    assert result.best_k >= result.k
    info = result.to_dict()
    assert (info["k"], info["best_k"]) == (result.k, result.best_k)


@pytest.mark.unit
def test_default_passthrough_sharpens_at_depth():
    pop = AtomPopulation([-1.0, 1.0])
    arch = NetworkArchitecture((1, 1, 1), "sigmoid")
    k = 2.0**12
    default = build_tanh_indicator(arch, [1.0], 0.0, 1.0, 0.0, k)
    identity = build_tanh_indicator(arch, [1.0], 0.0, 1.0, 0.0, k, passthrough="identity")
    assert l2_indicator_error(arch, default, pop, [1.0], 0.0, 1.0, 0.0) < 1e-6
    # sigma(sigma(kz)) tends to sigma(0) = 1/2 and sigma(1) instead of 1 and 0
    expected = np.sqrt(0.5 * (0.5**2 + (1 - expit(1.0)) ** 2))
    error = l2_indicator_error(arch, identity, pop, [1.0], 0.0, 1.0, 0.0)
    assert error == pytest.approx(expected, rel=1e-6)
