"""Adversarial targets that make a given parameter the population minimizer of a model.

For a model that is constant ``c`` at ``theta0``, a nonconstant ``h`` orthogonal in L2 to the
constant function and to every gradient direction ``d f_theta0 / d theta_i`` turns
``g = c + epsilon * h`` into a target at which ``theta0`` is stationary. For small enough
``epsilon`` it is also the global minimizer; this is checked empirically by multi-start
minimization and, for small models, by a grid.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from typing import TYPE_CHECKING, Any, Callable

import numpy as np
from numpy.polynomial import hermite_e

from weaklearn.audit.identifiability import fisher
from weaklearn.errors import CalibrationError, ConsistencyError, HypothesisError
from weaklearn.models.zoo import population_mse, population_mse_grad
from weaklearn.optim.optimizer import grid_certify, minimize_mse
from weaklearn.population.catalog import (
    NamedFunction,
    bernoulli_variance,
    constant,
    cosine_even_perturbation,
)
from weaklearn.population.population import evaluate, require_nondegenerate

if TYPE_CHECKING:
    from collections.abc import Sequence

    from numpy.typing import ArrayLike, NDArray

    from weaklearn.models.zoo import ModelHandle
    from weaklearn.optim.optimizer import GridCertificate, OptimizationResult
    from weaklearn.population import Population

logger = logging.getLogger(__name__)

Function = Callable[["NDArray"], "NDArray"]
RANK_TOL = 1e-10
ORTHO_TOL = 1e-9
CONSTANT_TOL = 1e-12
STATIONARITY_TOL = 1e-8
MIN_EPSILON = 1e-8
RIVAL_MARGIN = 1e-10
HERMITE_CLIP = 10.0


@dataclass
class ComplementFunction:
    """Unit-norm ``h`` orthogonal to the protected functions in ``L2(pop)``.

    ``h = (u - sum_k coefficients[k] * b_k) / norm`` for the winning dictionary element ``u``
    and the protected functions ``b_k``, so ``h`` can be evaluated at any point.
    """

    values: NDArray[np.floating]
    dictionary_index: int
    element: Function
    protected: list[Function]
    coefficients: NDArray[np.floating]
    norm: float
    protected_rank: int

    def __call__(self, x: NDArray) -> NDArray[np.floating]:
        x = np.atleast_2d(x)
        projection = sum(c * b(x) for c, b in zip(self.coefficients, self.protected))
        return (self.element(x) - projection) / self.norm

    def to_dict(self) -> dict[str, Any]:
        element = self.element.to_dict() if isinstance(self.element, NamedFunction) else None
        return {
            "dictionary_index": self.dictionary_index,
            "element": element,
            "protected_coefficients": self.coefficients.tolist(),
            "norm": self.norm,
            "protected_rank": self.protected_rank,
        }


def _inner(w: NDArray, a: NDArray, b: NDArray) -> float:
    return float(np.dot(w, a * b))


def gram_schmidt_complement(
    pop: Population,
    protected: Sequence[Function],
    dictionary: Sequence[Function],
    rank_tol: float = RANK_TOL,
) -> ComplementFunction:
    """Find a unit vector of ``L2(pop)`` orthogonal to the span of ``protected``.

    Protected functions are orthonormalized by modified Gram-Schmidt with one reorthogonalization
    pass; dependent ones are dropped. Dictionary elements are then projected off that basis in
    order and the first whose residual norm exceeds ``rank_tol`` times its own norm wins.

    Args:
        pop: Population defining the inner product ``E[a(X) b(X)]``.
        protected: Functions ``h`` has to be orthogonal to.
        dictionary: Candidate functions, tried in order.
        rank_tol: Relative residual norm below which a function is treated as dependent.

    Returns:
        The normalized complement, with its representation over the dictionary element.
    """
    w = pop.weights
    values = [evaluate(pop, b, f"protected[{i}]") for i, b in enumerate(protected)]
    basis, combos = [], []  # orthonormal q_j and their coefficients over the protected functions
    for i, v in enumerate(values):
        q, combo = _orthogonalize(w, v, basis, combos, np.eye(len(values))[i])
        scale = np.sqrt(_inner(w, v, v))
        q_norm = np.sqrt(_inner(w, q, q))
        if q_norm <= rank_tol * max(scale, 1e-300):
            logger.debug(f"Protected function {i} is dependent on the previous ones, dropped")
            continue
        basis.append(q / q_norm)
        combos.append(combo / q_norm)
    for index, element in enumerate(dictionary):
        u = evaluate(pop, element, f"dictionary[{index}]")
        scale = np.sqrt(_inner(w, u, u))
        r, combo = _orthogonalize(w, u, basis, combos, np.zeros(len(values)))
        r_norm = np.sqrt(_inner(w, r, r))
        if scale == 0 or r_norm <= rank_tol * scale:
            logger.debug(f"Dictionary element {index} lies in the protected span")
            continue
        return ComplementFunction(
            values=r / r_norm,
            dictionary_index=index,
            element=element,
            protected=list(protected),
            coefficients=-combo,
            norm=float(r_norm),
            protected_rank=len(basis),
        )
    raise HypothesisError(
        "no orthogonal complement found; support too small or dictionary degenerate"
    )


def _orthogonalize(
    w: NDArray, v: NDArray, basis: list[NDArray], combos: list[NDArray], combo: NDArray
) -> tuple[NDArray, NDArray]:
    """Two passes of modified Gram-Schmidt, tracking ``v - r`` over the protected functions."""
    r, combo = v.copy(), combo.copy()
    for _ in range(2):
        for q, q_combo in zip(basis, combos):
            proj = _inner(w, r, q)
            r -= proj * q
            combo -= proj * q_combo
    return r, combo


def _atom_indicator(atom: NDArray, index: int) -> NamedFunction:
    return NamedFunction(
        "atom_indicator",
        {"index": index, "atom": atom.tolist()},
        lambda x: np.all(x == atom, axis=-1).astype(np.float64),
    )


def _clipped_hermite(order: int, coordinate: int) -> NamedFunction:
    coeffs = np.zeros(order + 1)
    coeffs[order] = 1.0
    clip = HERMITE_CLIP
    return NamedFunction(
        "clipped_hermite",
        {"order": order, "coordinate": coordinate, "clip": HERMITE_CLIP},
        lambda x: np.clip(hermite_e.hermeval(x[:, coordinate], coeffs), -clip, clip),
    )


def _uniform_cosine(frequency: int, coordinate: int, low: float, high: float) -> NamedFunction:
    mid, half = 0.5 * (low + high), 0.5 * (high - low)
    return NamedFunction(
        "uniform_cosine",
        {"frequency": frequency, "coordinate": coordinate},
        lambda x: np.cos(frequency * np.pi * (x[:, coordinate] - mid) / half),
    )


def default_dictionary(pop: Population, n_terms: int = 4) -> list[NamedFunction]:
    """Candidate functions for the complement.

    Atom populations use the indicators of the atoms, which span ``L2(pop)``. Gaussian samplers
    use centered even cosines followed by clipped even Hermite polynomials, uniform samplers
    cosines that integrate to zero over the box.
    """
    if pop.is_atomic:
        return [_atom_indicator(atom, i) for i, atom in enumerate(pop.points)]
    coords = range(pop.dim)
    if pop.sampler == "normal":
        cosines = [
            cosine_even_perturbation(base=0.0, epsilon=1.0, frequency=k, coordinate=j)
            for k in range(1, n_terms + 1)
            for j in coords
        ]
        hermite = [_clipped_hermite(2 * k, j) for k in range(1, n_terms + 1) for j in coords]
        return cosines + hermite
    return [
        _uniform_cosine(k, j, pop.low, pop.high) for k in range(1, n_terms + 1) for j in coords
    ]


def protected_functions(model: ModelHandle, theta0: ArrayLike) -> list[Function]:
    """The constant function and the gradient coordinates ``d f_theta0 / d theta_i``."""
    theta0 = np.asarray(theta0, dtype=np.float64)

    def partial(i: int) -> Function:
        return lambda x: model.grad_theta(theta0, x).reshape(-1, model.param_dim)[:, i]

    return [constant(1.0)] + [partial(i) for i in range(model.param_dim)]


@dataclass
class CalibrationRecord:
    """Empirical global minimality certificate of ``theta0`` at the calibrated ``epsilon``."""

    epsilon: float
    reference_mse: float
    best_rival_mse: float
    history: list[dict[str, Any]]
    optimization: OptimizationResult
    grid: GridCertificate | None = None
    certificate: str = "empirical"

    def to_dict(self) -> dict[str, Any]:
        return {
            "epsilon": self.epsilon,
            "reference_mse": self.reference_mse,
            "best_rival_mse": self.best_rival_mse,
            "history": self.history,
            "optimization": self.optimization.to_dict(),
            "grid": None if self.grid is None else self.grid.to_dict(),
            "certificate": self.certificate,
        }


@dataclass
class AdversarialTarget:
    """Target ``g = c + epsilon * h`` for which ``theta0`` is a population minimizer."""

    theta0: NDArray[np.floating]
    c: float
    complement: ComplementFunction
    epsilon: float
    noise: float | str = 0.0  # conditional variance of Y, or "bernoulli"
    ortho_residuals: NDArray[np.floating] = field(default_factory=lambda: np.zeros(0))
    mean_residual: float = 0.0
    calibration: CalibrationRecord | None = None

    @property
    def h_norm(self) -> float:
        return self.epsilon

    def g(self, x: NDArray) -> NDArray[np.floating]:
        return self.c + self.epsilon * self.complement(x)

    def cond_mean(self) -> NamedFunction:
        return NamedFunction("adversarial_target", {"c": self.c, "epsilon": self.epsilon}, self.g)

    def population(self, pop: Population) -> Population:
        """``pop`` with ``E[Y|X] = g(X)`` and the configured noise."""
        mean = self.cond_mean()
        if pop.is_atomic:
            mean_values = self.c + self.epsilon * self.complement.values
            noise = mean_values * (1 - mean_values) if self.noise == "bernoulli" else self.noise
            return pop.with_conditional(mean_values, noise)
        noise = bernoulli_variance(mean) if self.noise == "bernoulli" else constant(self.noise)
        return pop.with_conditional(mean, noise)

    def with_epsilon(self, epsilon: float) -> AdversarialTarget:
        scale = epsilon / self.epsilon
        return replace(
            self,
            epsilon=float(epsilon),
            ortho_residuals=self.ortho_residuals * scale,
            mean_residual=self.mean_residual * scale,
            calibration=None,
        )

    def to_dict(self, pop: Population | None = None) -> dict[str, Any]:
        info = {
            "theta0": self.theta0.tolist(),
            "c": self.c,
            "epsilon": self.epsilon,
            "h_norm": self.h_norm,
            "noise": self.noise,
            "ortho_residuals": self.ortho_residuals.tolist(),
            "mean_residual": self.mean_residual,
            "complement": self.complement.to_dict(),
            "calibration": None if self.calibration is None else self.calibration.to_dict(),
        }
        if pop is not None and pop.is_atomic:
            info["h_values"] = self.complement.values.tolist()
        return info


def _residuals(
    pop: Population, protected: list[Function], h: NDArray, epsilon: float
) -> tuple[NDArray, float]:
    w = pop.weights
    residuals = np.array([abs(_inner(w, epsilon * h, evaluate(pop, b))) for b in protected])
    return residuals, abs(float(np.dot(w, epsilon * h)))


def build_target(
    model: ModelHandle,
    theta0: ArrayLike,
    pop: Population,
    dictionary: Sequence[Function] | None = None,
    epsilon_init: float = 0.1,
    noise: float | str = 0.0,
    restarts: int = 16,
    seed: int = 0,
    max_iters: int = 10_000,
    tol: float = 1e-9,
    grid: tuple[list[tuple[float, float]], float] | None = None,
    trace: bool = False,
) -> AdversarialTarget:
    """Construct and calibrate an adversarial target for ``model`` at ``theta0``.

    Args:
        model: Model that is constant on ``supp X`` at ``theta0``.
        theta0: The parameter to be made the minimizer.
        pop: Population giving the law of ``X``; its conditional moments are ignored.
        dictionary: Candidates for ``h``. :func:`default_dictionary` if None.
        epsilon_init: Starting perturbation size, halved during calibration.
        noise: Conditional variance of ``Y`` around ``g(X)``, a number or ``"bernoulli"``.
        restarts: Restarts of the calibration minimizer.
        seed: Seed of the calibration minimizer.
        max_iters: Iteration budget per restart.
        tol: Relative gradient norm tolerance.
        grid: Optional ``(box, step)`` for an additional grid certificate.
        trace: Keep the descent trace of the winning calibration restart.

    Returns:
        The calibrated target.
    """
    theta0 = np.asarray(theta0, dtype=np.float64)
    require_nondegenerate(pop)
    if not epsilon_init > 0:
        raise HypothesisError(f"degenerate perturbation: epsilon = {epsilon_init} is not positive")
    f0 = evaluate(pop, lambda x: model.eval(theta0, x), f"{model.kind} at theta0")
    c = float(np.dot(pop.weights, f0))
    spread = float(np.dot(pop.weights, (f0 - c) ** 2))
    if spread > CONSTANT_TOL:
        raise HypothesisError(f"{model.kind} is not constant at theta0: Var f(X) = {spread:.3e}")
    report = fisher(model, theta0, pop)
    if not report.locally_identifiable:
        raise HypothesisError(
            f"Fisher information is singular at theta0: lambda_min = {report.lambda_min:.3e}"
        )
    protected = protected_functions(model, theta0)
    dictionary = default_dictionary(pop) if dictionary is None else dictionary
    complement = gram_schmidt_complement(pop, protected, dictionary)
    residuals, mean_residual = _residuals(pop, protected, complement.values, epsilon_init)
    if np.any(residuals > ORTHO_TOL * epsilon_init):
        raise ConsistencyError(f"Orthogonality residuals {residuals.tolist()} exceed tolerance")
    target = AdversarialTarget(
        theta0, c, complement, float(epsilon_init), noise, residuals, mean_residual
    )
    grad_norm = verify_stationarity(model, theta0, target, pop)
    if grad_norm > STATIONARITY_TOL * (1 + epsilon_init):
        raise ConsistencyError(f"theta0 is not stationary: |grad MSE| = {grad_norm:.3e}")
    record = calibrate_epsilon(
        model, theta0, target, pop, restarts, seed, max_iters, tol, grid, trace
    )
    calibrated = target.with_epsilon(record.epsilon)
    calibrated.calibration = record
    return calibrated


def verify_stationarity(
    model: ModelHandle, theta0: ArrayLike, target: AdversarialTarget, pop: Population
) -> float:
    """``|grad_theta MSE(theta0)|`` on the target population."""
    grad = population_mse_grad(model, theta0, target.population(pop))
    return float(np.linalg.norm(grad))


def calibrate_epsilon(
    model: ModelHandle,
    theta0: ArrayLike,
    target: AdversarialTarget,
    pop: Population,
    restarts: int = 16,
    seed: int = 0,
    max_iters: int = 10_000,
    tol: float = 1e-9,
    grid: tuple[list[tuple[float, float]], float] | None = None,
    trace: bool = False,
) -> CalibrationRecord:
    """Halve ``epsilon`` until no restart finds an MSE below the one at ``theta0``.

    A rival counts when its MSE is below ``MSE(theta0) - 1e-10``. Restart 0 starts at ``theta0``.

    Returns:
        The first passing ``epsilon`` with the rivals found at every tried value.
    """
    theta0 = np.asarray(theta0, dtype=np.float64)
    epsilon, history = target.epsilon, []
    while epsilon >= MIN_EPSILON:
        target_pop = target.with_epsilon(epsilon).population(pop)
        reference = population_mse(model, theta0, target_pop)
        result = minimize_mse(
            model, target_pop, restarts, seed, max_iters, tol, theta0=theta0, trace=trace
        )
        rival = result.mse
        certificate = None
        if grid is not None:
            certificate = grid_certify(model, target_pop, *grid)
            rival = min(rival, certificate.min_mse)
        passed = rival >= reference - RIVAL_MARGIN
        history.append(
            {
                "epsilon": epsilon,
                "reference_mse": reference,
                "best_rival_mse": rival,
                "passed": passed,
            }
        )
        if passed:
            logger.info(f"Calibrated epsilon = {epsilon:.6g}, best rival MSE {rival:.12e}")
            return CalibrationRecord(epsilon, reference, rival, history, result, certificate)
        logger.info(f"Rival MSE {rival:.12e} < {reference:.12e} at epsilon {epsilon:.6g}, halving")
        epsilon /= 2
    raise CalibrationError(
        "calibration failed; model may not satisfy the identifiability hypotheses"
    )


def protected_rank(model: ModelHandle, theta0: ArrayLike, pop: Population) -> int:
    """Dimension of ``span{1, d f_theta0 / d theta_i}`` in ``L2(pop)``."""
    values = [evaluate(pop, b) for b in protected_functions(model, theta0)]
    matrix = np.stack(values, axis=-1) * np.sqrt(pop.weights)[:, None]
    singular = np.linalg.svd(matrix, compute_uv=False)
    return int(np.sum(singular > RANK_TOL * singular[0])) if singular[0] > 0 else 0
