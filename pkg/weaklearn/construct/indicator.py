"""Explicit network weights approximating an affine half-space indicator.

Both constructions approximate ``c2 * 1{alpha . x <= c1} + c0`` with ``z = alpha . x - c1``:

* tanh-form activations: the first hidden unit computes ``sigma(k z)``, later layers pass it on,
  and the output is ``c2 * (1 - H_1^(D)) + c0``.
* ReLU: two units carry ``relu(k z)`` and ``relu(k z - 1)``; their difference is the ramp ``g``
  that saturates at 0 and 1, and the output is ``c2 * (1 - g(k z)) + c0``.

Unused weights and biases are exactly zero, so the networks equal their closed forms.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Any

import numpy as np
import pandas as pd

from weaklearn.construct.halfspace import HalfspaceFinding, best_linear_predictor, find_halfspace
from weaklearn.errors import HypothesisError, SearchError, ShapeError
from weaklearn.models.network import NetworkArchitecture, NetworkParams, activate, forward
from weaklearn.population import gap_tolerance, mse_gap, stats, weighted_mean, weighted_se

if TYPE_CHECKING:
    from collections.abc import Sequence

    from numpy.typing import ArrayLike, NDArray

    from weaklearn.population import Population

logger = logging.getLogger(__name__)

DEFAULT_K_SCHEDULE = tuple(2.0**i for i in range(17))
PASSTHROUGH = ("resharpen", "identity")


def _zeros(arch: NetworkArchitecture) -> tuple[list[NDArray], list[NDArray]]:
    weights = [np.zeros(shape) for shape in arch.layer_shapes]
    biases = [np.zeros(shape[0]) for shape in arch.layer_shapes]
    return weights, biases


def _direction(arch: NetworkArchitecture, alpha: ArrayLike) -> NDArray[np.floating]:
    alpha = np.asarray(alpha, dtype=np.float64).reshape(-1)
    if alpha.shape != (arch.input_dim,):
        raise ShapeError(f"alpha must have {arch.input_dim} entries, got {alpha.shape}")
    return alpha


def build_tanh_indicator(
    arch: NetworkArchitecture,
    alpha: ArrayLike,
    threshold: float,
    amplitude: float,
    offset: float,
    k: float,
    passthrough: str = "resharpen",
) -> NetworkParams:
    """Sharp-sigmoid network for ``amplitude * 1{alpha . x <= threshold} + offset``.

    Args:
        arch: Architecture with a tanh-form activation.
        alpha: Direction of the half-space.
        threshold: Threshold ``c1``.
        amplitude: Step height ``c2``.
        offset: Value ``c0`` above the threshold.
        k: Sharpness, positive.
        passthrough: How layers ``d >= 2`` carry the first unit. ``"identity"`` feeds it through
            unit weight, so the output is ``sigma`` composed ``D`` times. ``"resharpen"`` uses
            weight ``k`` and bias ``-k/2``, which keeps the unit sharpening toward a step. The
            default is ``"resharpen"``: with depth ``D >= 2`` the identity composition does not
            converge to the indicator as ``k`` grows, since ``sigma(sigma(kz))`` only moves
            between ``sigma(0)`` and ``sigma(1)``.

    Returns:
        Network parameters.
    """
    if not arch.is_tanh_form:
        raise ShapeError(f"Sigmoid construction needs tanh-form units, got {arch.activation}")
    assert k > 0, f"Sharpness must be positive, got {k}"
    assert passthrough in PASSTHROUGH, f"Unknown passthrough {passthrough!r}"
    alpha = _direction(arch, alpha)
    weights, biases = _zeros(arch)
    weights[0][0] = k * alpha
    biases[0][0] = -k * threshold
    for d in range(1, arch.depth):
        if passthrough == "identity":
            weights[d][0, 0] = 1.0
        else:
            weights[d][0, 0] = k
            biases[d][0] = -k / 2
    weights[-1][0, 0] = -amplitude
    biases[-1][0] = offset + amplitude
    params = NetworkParams(tuple(weights), tuple(biases))
    params.check(arch)
    return params


def build_relu_indicator(
    arch: NetworkArchitecture,
    alpha: ArrayLike,
    threshold: float,
    amplitude: float,
    offset: float,
    k: float,
) -> NetworkParams:
    """Two-unit ReLU ramp network for ``amplitude * 1{alpha . x <= threshold} + offset``.

    Layers of width one carry ``relu(k z)`` alone; the second unit ``relu(k z - 1)`` is derived
    from it in the next layer wide enough. ReLU is idempotent on its own outputs, so pass-through
    layers leave the units unchanged.

    Args:
        arch: ReLU architecture whose last hidden layer has at least two units.
        alpha: Direction of the half-space.
        threshold: Threshold ``c1``.
        amplitude: Step height ``c2``.
        offset: Value ``c0`` above the threshold.
        k: Sharpness, positive.

    Returns:
        Network parameters.
    """
    if arch.activation != "relu":
        raise ShapeError(f"Ramp construction needs ReLU, got {arch.activation}")
    if arch.widths[-1] < 2:
        raise HypothesisError("ReLU construction requires two last-layer units")
    assert k > 0, f"Sharpness must be positive, got {k}"
    alpha = _direction(arch, alpha)
    weights, biases = _zeros(arch)
    weights[0][0] = k * alpha
    biases[0][0] = -k * threshold
    if arch.widths[1] >= 2:
        weights[0][1] = k * alpha
        biases[0][1] = -k * threshold - 1.0
    for d in range(2, arch.depth + 1):
        W, b = weights[d - 1], biases[d - 1]
        W[0, 0] = 1.0
        if arch.widths[d] >= 2 and arch.widths[d - 1] >= 2:
            W[1, 1] = 1.0
        elif arch.widths[d] >= 2:
            W[1, 0] = 1.0  # relu(relu(kz) - 1) = relu(kz - 1)
            b[1] = -1.0
    weights[-1][0, :2] = (-amplitude, amplitude)
    biases[-1][0] = offset + amplitude
    params = NetworkParams(tuple(weights), tuple(biases))
    params.check(arch)
    return params


def build_indicator(
    arch: NetworkArchitecture,
    alpha: ArrayLike,
    threshold: float,
    amplitude: float,
    offset: float,
    k: float,
    passthrough: str = "resharpen",
) -> NetworkParams:
    """Dispatch to the construction matching the activation of ``arch``."""
    if arch.activation == "relu":
        return build_relu_indicator(arch, alpha, threshold, amplitude, offset, k)
    return build_tanh_indicator(arch, alpha, threshold, amplitude, offset, k, passthrough)


def closed_form(
    arch: NetworkArchitecture,
    z: NDArray,
    amplitude: float,
    offset: float,
    k: float,
    passthrough: str = "resharpen",
) -> NDArray[np.floating]:
    """Output of the constructed network as a function of ``z = alpha . x - threshold``."""
    if arch.activation == "relu":
        ramp = activate(k * z, "relu") - activate(k * z - 1.0, "relu")
        return amplitude * (1.0 - ramp) + offset
    s = activate(k * z, arch.activation)
    for _ in range(arch.depth - 1):
        s = activate(s if passthrough == "identity" else k * (s - 0.5), arch.activation)
    return amplitude * (1.0 - s) + offset


def _squared_errors(
    arch: NetworkArchitecture,
    params: NetworkParams,
    pop: Population,
    alpha: ArrayLike,
    threshold: float,
    amplitude: float,
    offset: float,
) -> NDArray[np.floating]:
    target = amplitude * (pop.points @ np.asarray(alpha) <= threshold) + offset
    return (forward(arch, params, pop.points) - target) ** 2


def l2_indicator_error(
    arch: NetworkArchitecture,
    params: NetworkParams,
    pop: Population,
    alpha: ArrayLike,
    threshold: float,
    amplitude: float,
    offset: float,
) -> float:
    """``|f(X) - (amplitude * 1{alpha . X <= threshold} + offset)|_L2``."""
    errors = _squared_errors(arch, params, pop, alpha, threshold, amplitude, offset)
    return float(np.sqrt(weighted_mean(pop, errors)))


def indicator_error_schedule(
    pop: Population,
    arch: NetworkArchitecture,
    alpha: ArrayLike,
    threshold: float,
    amplitude: float,
    offset: float,
    k_schedule: Sequence[float] = DEFAULT_K_SCHEDULE,
    passthrough: str = "resharpen",
) -> pd.DataFrame:
    """L2 indicator error along a sharpness schedule.

    Returns:
        Table with columns ``k``, ``l2_error`` and ``se``, the standard error of the error by the
        delta method (zero on atoms).
    """
    rows = []
    for k in k_schedule:
        params = build_indicator(arch, alpha, threshold, amplitude, offset, k, passthrough)
        errors = _squared_errors(arch, params, pop, alpha, threshold, amplitude, offset)
        mean, se = weighted_mean(pop, errors), weighted_se(pop, errors)
        l2 = np.sqrt(mean)
        rows.append((float(k), float(l2), float(se / (2 * l2)) if l2 > 0 else 0.0))
    return pd.DataFrame(rows, columns=["k", "l2_error", "se"])


@dataclass
class Theorem1Result:
    """Network that certifiably beats the constant predictor ``E[Y]``.

    The MSE, gap and parameters belong to the first certified sharpness ``k``. ``best_k`` and
    ``best_mse`` record the lowest certified MSE over the whole schedule.
    """

    finding: HalfspaceFinding
    var_y: float
    k: float
    achieved_mse: float
    gap: float
    gap_se: float
    tolerance: float
    certified: bool
    best_k: float
    best_mse: float
    architecture: NetworkArchitecture
    params: NetworkParams
    table: pd.DataFrame
    warnings: list[str] = field(default_factory=list)

    def to_dict(self) -> dict[str, Any]:
        return {
            "finding": self.finding.to_dict(),
            "var_y": self.var_y,
            "k": self.k,
            "achieved_mse": self.achieved_mse,
            "gap": self.gap,
            "gap_se": self.gap_se,
            "tolerance": self.tolerance,
            "certified": self.certified,
            "best_k": self.best_k,
            "best_mse": self.best_mse,
            "architecture": self.architecture.to_dict(),
            "params": self.params.to_dict(),
        }


def verify_theorem1(
    pop: Population,
    arch: NetworkArchitecture,
    k_schedule: Sequence[float] = DEFAULT_K_SCHEDULE,
    seed: int = 0,
    n_directions: int | None = None,
    thresholds_per_direction: int = 99,
    passthrough: str = "resharpen",
) -> Theorem1Result:
    """Build an indicator network whose population MSE is certifiably below ``Var(Y)``.

    The half-space search provides the indicator and the affine coefficients. The network is built
    for every sharpness in the schedule and the first certified one is reported, along with the
    lowest certified MSE of the schedule.

    Args:
        pop: A weakly learnable population.
        arch: Network architecture with a linear output.
        k_schedule: Increasing sharpness values.
        seed: Seed of the half-space search.
        n_directions: Random directions of the half-space search.
        thresholds_per_direction: Quantile levels of the half-space search.
        passthrough: Pass-through rule of deep tanh-form constructions.

    Returns:
        The certified network with the full MSE-versus-k table.
    """
    s = stats(pop)
    if not s.weak_learnable:
        raise HypothesisError(
            f"weak learnability hypothesis fails: Var(E[Y|X]) = {s.gap:.3e} <= {s.tolerance:.3e}"
        )
    if arch.input_dim != pop.dim:
        raise ShapeError(f"Architecture expects {arch.input_dim}-dim inputs, X is {pop.dim}-dim")
    if arch.activation == "relu" and arch.widths[-1] < 2:
        raise HypothesisError("ReLU construction requires two last-layer units")
    warnings = []
    finding = find_halfspace(pop, n_directions, thresholds_per_direction, seed)
    c1, c0, predicted = best_linear_predictor(pop, finding)
    z = pop.points @ finding.alpha - finding.t
    if pop.is_atomic:
        if np.min(np.abs(z)) == 0:
            raise HypothesisError(f"An atom lies on the threshold t = {finding.t}")
        if arch.is_tanh_form:
            warnings.append(
                "tanh-form construction assumes X has a density; X is finitely supported"
            )
    expected_var = weighted_mean(pop, pop.var_values)
    rows, built = [], {}
    for k in k_schedule:
        params = build_indicator(arch, finding.alpha, finding.t, c1, c0, k, passthrough)
        predictions = forward(arch, params, pop.points)
        mse = expected_var + weighted_mean(pop, (pop.mean_values - predictions) ** 2)
        gap, se = mse_gap(pop, predictions)
        tolerance = gap_tolerance(pop, s.var_y, se)
        rows.append((float(k), mse, gap, se, tolerance, bool(gap > tolerance)))
        built[float(k)] = params
        logger.debug(f"k={k:g}: mse={mse:.12e}, gap={gap:.6e} +- {se:.3e}")
    table = pd.DataFrame(rows, columns=["k", "mse", "gap", "se", "tolerance", "certified"])
    table["predicted_mse"] = predicted
    certified = table[table["certified"]]
    if certified.empty:
        raise SearchError("k schedule exhausted without a certified gap", table)
    first = certified.iloc[0]
    best = certified.loc[certified["mse"].idxmin()]
    return Theorem1Result(
        finding=finding,
        var_y=s.var_y,
        k=float(first["k"]),
        achieved_mse=float(first["mse"]),
        gap=float(first["gap"]),
        gap_se=float(first["se"]),
        tolerance=float(first["tolerance"]),
        certified=True,
        best_k=float(best["k"]),
        best_mse=float(best["mse"]),
        architecture=arch,
        params=built[float(first["k"])],
        table=table,
        warnings=warnings,
    )
