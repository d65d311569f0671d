"""Checks of the hypotheses under which a model's population minimizer can be forced.

For a model ``f_theta``, a parameter ``theta0`` and a population the audit covers:

1. local identifiability, the Fisher information ``E[grad f grad f^T]`` being positive definite,
2. strong identifiability, ``f_theta`` close to ``f_theta0`` in L2 forcing ``theta`` close to
   ``theta0``, probed by search or certified in closed form for linear and logistic models,
3. square integrability of the envelope of second derivatives on a ball around ``theta0``,
   bounded from below on a parameter grid,
4. a support with more than ``d + 1`` points.
"""

from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass
from typing import TYPE_CHECKING, Any

import numpy as np
from scipy.stats import norm

from weaklearn.errors import ConsistencyError, ShapeError
from weaklearn.models.zoo import LinearFeatures, Logistic
from weaklearn.optim.optimizer import armijo_descent
from weaklearn.population import derive_rng
from weaklearn.population.population import MonteCarloPopulation, require_finite

if TYPE_CHECKING:
    from numpy.typing import ArrayLike, NDArray

    from weaklearn.models.zoo import ModelHandle
    from weaklearn.population import Population

logger = logging.getLogger(__name__)

MAX_FISHER_DIM = 64
REL_TOL = 1e-8
PSD_TOLERANCE = 1e-10
PENALTY = 1e3
SYMMETRY_PROBES = 8


class _BudgetExhausted(Exception):
    """Raised by the search objective once the evaluation budget is spent."""


@dataclass
class FisherReport:
    """Fisher information ``I(theta0)`` and its spectrum."""

    matrix: NDArray[np.floating]
    eigenvalues: NDArray[np.floating]
    lambda_min: float
    lambda_max: float
    locally_identifiable: bool
    rel_tol: float
    entry_se: NDArray[np.floating]  # Monte Carlo standard error per entry, zeros on atoms

    def to_dict(self) -> dict[str, Any]:
        return {
            "matrix": self.matrix.tolist(),
            "eigenvalues": self.eigenvalues.tolist(),
            "lambda_min": self.lambda_min,
            "lambda_max": self.lambda_max,
            "locally_identifiable": self.locally_identifiable,
            "rel_tol": self.rel_tol,
            "entry_se": self.entry_se.tolist(),
        }


def fisher(
    model: ModelHandle, theta0: ArrayLike, pop: Population, rel_tol: float = REL_TOL
) -> FisherReport:
    """Fisher information of the model at ``theta0``.

    Args:
        model: The model family.
        theta0: Parameter at which the gradients are taken.
        pop: Population providing the law of ``X``.
        rel_tol: ``theta0`` is locally identifiable if ``lambda_min > rel_tol * lambda_max``.

    Returns:
        The matrix, its sorted eigenvalues and the local identifiability verdict.
    """
    if model.param_dim > MAX_FISHER_DIM:
        raise ShapeError(f"Fisher audit supports d <= {MAX_FISHER_DIM}, got d = {model.param_dim}")
    grads = model.grad_theta(theta0, pop.points)
    require_finite(np.abs(grads).sum(axis=-1), pop.points, f"{model.kind} gradient")
    w = pop.weights
    matrix = (grads * w[:, None]).T @ grads
    matrix = 0.5 * (matrix + matrix.T)
    eigenvalues = np.linalg.eigvalsh(matrix)
    lambda_min, lambda_max = float(eigenvalues[0]), float(eigenvalues[-1])
    if lambda_min < -PSD_TOLERANCE * max(1.0, abs(lambda_max)):
        raise ConsistencyError(f"Fisher information is indefinite, lambda_min = {lambda_min}")
    entry_se = np.zeros_like(matrix)
    if not pop.is_atomic:
        n = pop.n_points
        second = (grads**2 * w[:, None]).T @ grads**2
        entry_se = np.sqrt(np.maximum(second - matrix**2, 0.0) / (n - 1))
    return FisherReport(
        matrix=matrix,
        eigenvalues=eigenvalues,
        lambda_min=lambda_min,
        lambda_max=lambda_max,
        locally_identifiable=lambda_min > rel_tol * lambda_max,
        rel_tol=rel_tol,
        entry_se=entry_se,
    )


@dataclass
class LogisticCertificate:
    """Parameter bounds implied by ``|f_theta - 1/2|_L2 <= delta`` for Gaussian inputs.

    ``C = log((1 + 4 delta) / (1 - 4 delta))`` bounds the intercept, and ``2C / z`` with
    ``z = Phi^-1(7/8)`` bounds the slope norm.
    """

    delta: float
    c: float
    intercept_bound: float
    slope_bound: float

    @property
    def theta_bound(self) -> float:
        return float(np.hypot(self.intercept_bound, self.slope_bound))

    def to_dict(self) -> dict[str, Any]:
        return {
            "delta": self.delta,
            "c": self.c,
            "intercept_bound": self.intercept_bound,
            "slope_bound": self.slope_bound,
            "theta_bound": self.theta_bound,
        }


_Z78 = float(norm.ppf(7 / 8))


def logistic_gaussian_certificate(delta: float) -> LogisticCertificate:
    """Bounds on ``theta`` for logistic models within L2 distance ``delta`` of the constant 1/2."""
    assert 0 < delta < 0.25, f"delta must lie in (0, 1/4), got {delta}"
    c = float(np.log((1 + 4 * delta) / (1 - 4 * delta)))
    return LogisticCertificate(delta, c, c, 2 * c / _Z78)


def delta_for_radius(radius: float) -> float:
    """Largest ``delta`` whose certificate keeps every admissible ``theta`` within ``radius``."""
    c = radius / np.sqrt(1 + (2 / _Z78) ** 2)
    return float(np.tanh(c / 2) / 4)


@dataclass
class StrongIdentProbeResult:
    """Outcome of the search for distant parameters computing nearly the same function."""

    verdict: str  # "pass", "counterexample-found" or "inconclusive"
    method: str
    far_radius: float
    close_tol: float
    min_distance: float  # smallest L2 function distance found among admissible probes
    search_budget: int  # function distance evaluations spent
    witness: NDArray[np.floating] | None = None
    param_distance: float | None = None

    def revalidate(self, model: ModelHandle, theta0: ArrayLike, pop: Population):
        """Recompute the witness inequalities and raise if they no longer hold."""
        if self.witness is None:
            return
        l2 = function_distance(model, self.witness, theta0, pop)
        dist = float(np.linalg.norm(self.witness - np.asarray(theta0)))
        if abs(l2 - self.min_distance) > 1e-9 or abs(dist - self.param_distance) > 1e-9:
            raise ConsistencyError(f"Witness does not reproduce: L2 {l2}, distance {dist}")
        if l2 >= self.close_tol or dist < self.far_radius - 1e-9:
            raise ConsistencyError(f"Witness violates its inequalities: L2 {l2}, distance {dist}")

    def to_dict(self) -> dict[str, Any]:
        return {
            "verdict": self.verdict,
            "method": self.method,
            "far_radius": self.far_radius,
            "close_tol": self.close_tol,
            "min_distance": self.min_distance,
            "search_budget": self.search_budget,
            "witness": None if self.witness is None else self.witness.tolist(),
            "param_distance": self.param_distance,
        }


def function_distance(
    model: ModelHandle, theta: ArrayLike, theta0: ArrayLike, pop: Population
) -> float:
    """``|f_theta(X) - f_theta0(X)|_L2``."""
    diff = model.eval(theta, pop.points) - model.eval(theta0, pop.points)
    return float(np.sqrt(np.dot(pop.weights, diff**2)))


def _verdict(min_distance: float, close_tol: float) -> str:
    if min_distance < close_tol:
        return "counterexample-found"
    if min_distance > 10 * close_tol:
        return "pass"
    return "inconclusive"


def probe_strong_identifiability(
    model: ModelHandle,
    theta0: ArrayLike,
    pop: Population,
    far_radius: float,
    close_tol: float,
    budget: int,
    seed: int,
    box_half_width: float = 10.0,
    max_iters: int = 200,
) -> StrongIdentProbeResult:
    """Search for distant parameters whose function is L2-close to ``f_theta0``.

    The search region is the box ``theta0 +- box_half_width``. Cheaper routes run first: an empty
    region passes vacuously, linear models and logistic models around the constant 1/2 under
    Gaussian inputs are settled in closed form, and known parameter symmetries of the model are
    tried before a penalized descent on the function distance.

    Args:
        model: The model family.
        theta0: Reference parameter.
        pop: Population defining the L2 norm.
        far_radius: Minimum parameter distance of admissible probes.
        close_tol: A probe closer than this in L2 is a counterexample.
        budget: Maximum number of function distance evaluations. A descent that runs out stops
            at its best point, whose distance check may add one evaluation.
        seed: Seed of the random starting points.
        box_half_width: Half width of the search box around ``theta0``.
        max_iters: Descent iterations per starting point.

    Returns:
        ``pass`` if every probe stays above ``10 * close_tol``, ``counterexample-found`` with a
        witness if one falls below ``close_tol``, ``inconclusive`` otherwise.
    """
    assert budget >= 1, f"Search budget must be positive, got {budget}"
    theta0 = np.asarray(theta0, dtype=np.float64)
    d = model.param_dim
    common = {"far_radius": far_radius, "close_tol": close_tol}
    if far_radius > box_half_width * np.sqrt(d):
        return _result("pass", "vacuous", np.inf, 0, None, theta0, common)

    if isinstance(model, LinearFeatures):
        report = fisher(model, theta0, pop)
        min_distance = float(np.sqrt(max(report.lambda_min, 0.0)) * far_radius)
        verdict = _verdict(min_distance, close_tol)
        witness = None
        if verdict == "counterexample-found":
            _, vectors = np.linalg.eigh(report.matrix)
            witness = theta0 + far_radius * vectors[:, 0]
            min_distance = function_distance(model, witness, theta0, pop)
        return _result(verdict, "analytic", min_distance, 0, witness, theta0, common)

    if _is_logistic_gaussian(model, theta0, pop):
        delta = delta_for_radius(far_radius)
        if delta > 10 * close_tol:
            return _result("pass", "logistic-certificate", delta, 0, None, theta0, common)
        logger.info(f"Logistic certificate too weak (delta {delta:.3e}), falling back to search")

    evaluations = 0
    best, best_distance = None, np.inf
    rng = derive_rng(seed, "symmetry-probes")
    for candidate in model.symmetry_candidates(theta0, rng, SYMMETRY_PROBES, far_radius):
        if evaluations >= budget:
            break
        if np.linalg.norm(candidate - theta0) < far_radius:
            continue
        evaluations += 1
        distance = function_distance(model, candidate, theta0, pop)
        if distance < best_distance:
            best, best_distance = candidate, distance
    if best_distance < close_tol:
        return _result(
            "counterexample-found", "symmetry", best_distance, evaluations, best, theta0, common
        )

    f0 = model.eval(theta0, pop.points)
    w = pop.weights
    incumbent: list[Any] = [None, np.inf]  # lowest objective point of the current restart

    def objective(theta: NDArray) -> float:
        nonlocal evaluations
        if evaluations >= budget:
            raise _BudgetExhausted
        evaluations += 1
        diff = model.eval(theta, pop.points) - f0
        offset = theta - theta0
        shortfall = max(0.0, far_radius - float(np.linalg.norm(offset)))
        excess = np.maximum(np.abs(offset) - box_half_width, 0.0)
        value = float(np.dot(w, diff**2) + PENALTY * (shortfall**2 + np.sum(excess**2)))
        if value < incumbent[1]:
            incumbent[:] = [np.array(theta), value]
        return value

    def gradient(theta: NDArray) -> NDArray:
        diff = model.eval(theta, pop.points) - f0
        grad = 2.0 * (w * diff) @ model.grad_theta(theta, pop.points)
        offset = theta - theta0
        radius = float(np.linalg.norm(offset))
        if 0 < radius < far_radius:
            grad -= 2 * PENALTY * (far_radius - radius) * offset / radius
        excess = np.maximum(np.abs(offset) - box_half_width, 0.0)
        return grad + 2 * PENALTY * excess * np.sign(offset)

    restart = 0
    exhausted = False
    while evaluations < budget and not exhausted:
        rng = derive_rng(seed, f"probe-{restart}")
        direction = rng.standard_normal(d)
        direction /= np.linalg.norm(direction)
        radius = far_radius + rng.uniform(0, max(box_half_width - far_radius, 0.0))
        start = theta0 + radius * direction
        incumbent[:] = [None, np.inf]
        try:
            theta, *_ = armijo_descent(objective, gradient, start, max_iters=max_iters)
        except _BudgetExhausted:
            logger.debug(f"Budget of {budget} evaluations spent in probe {restart}")
            exhausted = True
            if incumbent[0] is None:
                break
            theta = incumbent[0]
        except ValueError as e:
            logger.warning(f"Probe {restart} abandoned: {e}")
            restart += 1
            continue
        theta = _project(theta, theta0, far_radius, box_half_width)
        evaluations += 1
        distance = function_distance(model, theta, theta0, pop)
        logger.debug(f"Probe {restart}: L2 distance {distance:.3e}")
        if distance < best_distance:
            best, best_distance = theta, distance
        restart += 1
    verdict = _verdict(best_distance, close_tol)
    witness = best if verdict == "counterexample-found" else None
    return _result(verdict, "penalty-search", best_distance, evaluations, witness, theta0, common)


def _is_logistic_gaussian(model: ModelHandle, theta0: NDArray, pop: Population) -> bool:
    gaussian = isinstance(pop, MonteCarloPopulation) and pop.sampler == "normal"
    return isinstance(model, Logistic) and gaussian and not np.any(theta0)


def _project(theta: NDArray, theta0: NDArray, far_radius: float, half_width: float) -> NDArray:
    """Move ``theta`` onto the admissible region: outside the ball and inside the box."""
    offset = np.clip(theta - theta0, -half_width, half_width)
    radius = np.linalg.norm(offset)
    if radius < far_radius:
        direction = offset / radius if radius > 0 else np.eye(len(offset))[0]
        offset = far_radius * direction
    return theta0 + offset


def _result(
    verdict: str,
    method: str,
    min_distance: float,
    evaluations: int,
    witness: NDArray | None,
    theta0: NDArray,
    common: dict[str, float],
) -> StrongIdentProbeResult:
    distance = None if witness is None else float(np.linalg.norm(witness - theta0))
    return StrongIdentProbeResult(
        verdict,
        method,
        min_distance=min_distance,
        search_budget=evaluations,
        witness=witness,
        param_distance=distance,
        **common,
    )


@dataclass
class HessianEnvelope:
    """Grid lower bound on ``|max_ij sup_theta |d2 f_theta(X) / dtheta_i dtheta_j||_L2``."""

    radius: float
    envelope_l2: float
    grid_density: int
    n_grid_points: int
    grid: str  # "product" or "axes"
    is_lower_bound: bool = True

    def to_dict(self) -> dict[str, Any]:
        return {
            "radius": self.radius,
            "envelope_l2": self.envelope_l2,
            "grid_density": self.grid_density,
            "n_grid_points": self.n_grid_points,
            "grid": self.grid,
            "is_lower_bound": self.is_lower_bound,
        }


def hessian_envelope(
    model: ModelHandle,
    theta0: ArrayLike,
    radius: float,
    pop: Population,
    grid_density: int,
    max_points: int = 4096,
) -> HessianEnvelope:
    """Envelope of the parameter Hessian over a deterministic grid in the ball ``B(theta0, R)``.

    The grid uses ``grid_density`` equally spaced offsets in ``[-R, R]`` per coordinate. Product
    grids larger than ``max_points`` are replaced by the offsets along each coordinate axis. Odd
    densities contain ``theta0``; density 1 evaluates ``theta0`` only. Going from density ``n`` to
    ``2n - 1`` keeps every grid point, so such refinements never lower the envelope.

    Args:
        model: The model family.
        theta0: Centre of the ball.
        radius: Radius ``R > 0``.
        pop: Population defining the L2 norm.
        grid_density: Number of offsets per coordinate.
        max_points: Largest product grid evaluated.

    Returns:
        The envelope, always a lower bound on the supremum over the ball.
    """
    assert radius > 0, f"Radius must be positive, got {radius}"
    assert grid_density >= 1, f"Grid density must be at least 1, got {grid_density}"
    theta0 = np.asarray(theta0, dtype=np.float64)
    d = model.param_dim
    levels = np.linspace(-radius, radius, grid_density) if grid_density > 1 else np.zeros(1)
    if grid_density**d <= max_points:
        offsets = np.array(list(itertools.product(levels, repeat=d)))
        kind = "product"
    else:
        offsets = np.concatenate([np.outer(levels, e) for e in np.eye(d)])
        kind = "axes"
    offsets = offsets[np.linalg.norm(offsets, axis=-1) <= radius * (1 + 1e-12)]
    offsets = np.unique(np.vstack([np.zeros(d), offsets]), axis=0)
    envelope = np.zeros(pop.n_points)
    for offset in offsets:
        hess = model.hess_theta(theta0 + offset, pop.points)
        peak = np.abs(hess).reshape(pop.n_points, -1).max(axis=-1)
        require_finite(peak, pop.points, f"{model.kind} Hessian")
        envelope = np.maximum(envelope, peak)
    envelope_l2 = float(np.sqrt(np.dot(pop.weights, envelope**2)))
    return HessianEnvelope(radius, envelope_l2, grid_density, offsets.shape[0], kind)


@dataclass
class SupportCheck:
    """Whether ``supp X`` has more than ``d + 1`` points."""

    ok: bool
    cardinality: int | None  # None for continuous samplers
    reason: str

    def __bool__(self) -> bool:
        return self.ok

    def to_dict(self) -> dict[str, Any]:
        return {"ok": self.ok, "cardinality": self.cardinality, "reason": self.reason}


def check_support_cardinality(pop: Population, d: int) -> SupportCheck:
    """Compare the support size of ``X`` with ``d + 1``."""
    if not pop.is_atomic:
        return SupportCheck(True, None, "infinite support")
    n = pop.support_size
    if n > d + 1:
        return SupportCheck(True, n, f"{n} atoms > d + 1 = {d + 1}")
    return SupportCheck(False, n, f"{n} atoms <= d + 1 = {d + 1}")


@dataclass
class ProofConstants:
    """Constants of the perturbation-size bound, computed from grid quantities.

    The envelope is a grid lower bound, so ``c1_lower`` is a lower bound as well and
    ``epsilon_ceiling`` is not a certified perturbation size.
    """

    c1_lower: float
    c3: float
    epsilon_ceiling: float

    def to_dict(self) -> dict[str, Any]:
        return {"c1_lower": self.c1_lower, "c3": self.c3, "epsilon_ceiling": self.epsilon_ceiling}


def proof_constants(report: FisherReport, envelope: HessianEnvelope, d: int) -> ProofConstants:
    """``C1 >= d * envelope / lambda_min``, ``C3 = 1 / lambda_max``, ceiling ``1 / (4 C1)``."""
    c1 = d * envelope.envelope_l2 / report.lambda_min if report.lambda_min > 0 else np.inf
    c3 = 1.0 / report.lambda_max if report.lambda_max > 0 else np.inf
    ceiling = 1.0 / (4.0 * c1) if c1 > 0 else np.inf
    return ProofConstants(float(c1), float(c3), float(ceiling))
