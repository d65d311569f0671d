"""Multi-start minimization of the population MSE over the parameters of a model.

The minimizer is plain gradient descent with an Armijo backtracking line search. Restart 0 starts
at the supplied ``theta0`` (or the zero vector), every other restart at a seeded Gaussian draw.
The winner is the restart with the lowest final MSE; ties within 1e-12 go to the lowest index.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Any, Callable

import numpy as np

from weaklearn.errors import EvaluationError, OptimizationError, ShapeError
from weaklearn.models.zoo import population_mse, population_mse_grad
from weaklearn.population import derive_rng

if TYPE_CHECKING:
    from collections.abc import Sequence

    from numpy.typing import ArrayLike, NDArray

    from weaklearn.models.zoo import ModelHandle
    from weaklearn.population import Population

logger = logging.getLogger(__name__)

ARMIJO_C = 1e-4
BACKTRACK = 0.5
MIN_STEP = 1e-20
TIE_TOLERANCE = 1e-12
MAX_GRID_DIM = 3


@dataclass
class OptimizationResult:
    """Best parameter vector found over all restarts."""

    theta_hat: NDArray[np.floating]
    mse: float
    n_restarts: int
    best_restart: int
    converged: bool
    grad_norm_final: float
    restart_mses: list[float] = field(default_factory=list)  # nan for abandoned restarts
    trace: list[tuple[float, float]] | None = None

    def to_dict(self) -> dict[str, Any]:
        info = {
            "theta_hat": self.theta_hat.tolist(),
            "mse": self.mse,
            "n_restarts": self.n_restarts,
            "best_restart": self.best_restart,
            "converged": self.converged,
            "grad_norm_final": self.grad_norm_final,
            "restart_mses": [None if np.isnan(m) else m for m in self.restart_mses],
        }
        if self.trace is not None:
            info["trace"] = [list(t) for t in self.trace]
        return info


def armijo_descent(
    objective: Callable[[NDArray], float],
    gradient: Callable[[NDArray], NDArray],
    theta: NDArray,
    max_iters: int = 10_000,
    tol: float = 1e-9,
    step0: float = 1.0,
    trace: bool = False,
) -> tuple[NDArray, float, float, bool, list[tuple[float, float]]]:
    """Gradient descent with Armijo backtracking.

    Every iteration starts the line search at ``step0`` and halves the step until the sufficient
    decrease condition holds. Descent stops when ``|grad| <= tol * (1 + |f|)``.

    Args:
        objective: Function to minimize.
        gradient: Its gradient.
        theta: Starting point.
        max_iters: Iteration budget.
        tol: Relative gradient norm tolerance.
        step0: Initial step of every line search.
        trace: Record ``(f, |grad|)`` per iteration.

    Returns:
        The final point, its objective value and gradient norm, the convergence flag and the trace.
    """
    theta = np.array(theta, dtype=np.float64)
    f = objective(theta)
    log = []
    for _ in range(max_iters):
        g = gradient(theta)
        gnorm = float(np.linalg.norm(g))
        if not (np.isfinite(f) and np.isfinite(gnorm)):
            raise EvaluationError(f"Non-finite objective {f} or gradient norm {gnorm}")
        if trace:
            log.append((f, gnorm))
        if gnorm <= tol * (1.0 + abs(f)):
            return theta, f, gnorm, True, log
        step = step0
        while step > MIN_STEP:
            candidate = theta - step * g
            f_new = objective(candidate)
            if np.isfinite(f_new) and f_new <= f - ARMIJO_C * step * gnorm**2:
                break
            step *= BACKTRACK
        else:
            logger.debug(f"Line search stalled at f={f:.6e}, |grad|={gnorm:.3e}")
            return theta, f, gnorm, False, log
        assert f_new <= f, f"Armijo step increased the objective: {f} -> {f_new}"
        theta, f = candidate, f_new
    gnorm = float(np.linalg.norm(gradient(theta)))
    return theta, f, gnorm, gnorm <= tol * (1.0 + abs(f)), log


def minimize_mse(
    model: ModelHandle,
    pop: Population,
    restarts: int = 16,
    seed: int = 0,
    max_iters: int = 10_000,
    tol: float = 1e-9,
    theta0: ArrayLike | None = None,
    init_scale: float | ArrayLike = 1.0,
    trace: bool = False,
) -> OptimizationResult:
    """Minimize ``E[(Y - f_theta(X))^2]`` over ``theta`` from several starting points.

    Args:
        model: The model family.
        pop: The population.
        restarts: Number of starting points, at least 1.
        seed: Seed of the Gaussian starting points.
        max_iters: Iteration budget per restart.
        tol: Relative gradient norm tolerance.
        theta0: Starting point of restart 0. The zero vector if None.
        init_scale: Scale of the Gaussian starting points, a scalar or one value per parameter.
        trace: Keep the per-iteration trace of the winning restart.

    Returns:
        The best result. The reported MSE is recomputed at the returned parameters.
    """
    assert restarts >= 1, f"Need at least one restart, got {restarts}"
    d = model.param_dim
    start = np.zeros(d) if theta0 is None else np.asarray(theta0, dtype=np.float64)
    if start.shape != (d,):
        raise ShapeError(f"theta0 must have {d} entries, got shape {start.shape}")
    scale = np.broadcast_to(np.asarray(init_scale, dtype=np.float64), (d,))

    def objective(theta: NDArray) -> float:
        return population_mse(model, theta, pop)

    def gradient(theta: NDArray) -> NDArray:
        return population_mse_grad(model, theta, pop)

    best, best_mse, mses = None, np.inf, []
    for i in range(restarts):
        init = start if i == 0 else scale * derive_rng(seed, f"restart-{i}").standard_normal(d)
        try:
            run = armijo_descent(objective, gradient, init, max_iters, tol, trace=trace)
        except EvaluationError as e:
            logger.warning(f"Restart {i} abandoned: {e}")
            mses.append(np.nan)
            continue
        mses.append(run[1])
        logger.debug(f"Restart {i}: mse={run[1]:.12e}, |grad|={run[2]:.3e}, converged={run[3]}")
        if run[1] < best_mse - TIE_TOLERANCE:
            best, best_mse = (i, run), run[1]
    if best is None:
        raise OptimizationError(f"All {restarts} restarts of {model.kind} were abandoned")
    i, (theta, _, gnorm, converged, log) = best
    return OptimizationResult(
        theta_hat=theta,
        mse=population_mse(model, theta, pop),
        n_restarts=restarts,
        best_restart=i,
        converged=converged,
        grad_norm_final=gnorm,
        restart_mses=mses,
        trace=log if trace else None,
    )


@dataclass
class GridCertificate:
    """Exhaustive grid minimum of the population MSE."""

    min_mse: float
    argmin: NDArray[np.floating]
    n_points: int
    box: list[tuple[float, float]]
    step: float  # largest spacing actually used along any axis

    def to_dict(self) -> dict[str, Any]:
        return {
            "min_mse": self.min_mse,
            "argmin": self.argmin.tolist(),
            "n_points": self.n_points,
            "box": [list(b) for b in self.box],
            "step": self.step,
        }


def grid_certify(
    model: ModelHandle,
    pop: Population,
    box: Sequence[tuple[float, float]],
    step: float,
    chunk: int = 4096,
) -> GridCertificate:
    """Evaluate the population MSE on every point of a regular grid.

    Grid points are ordered lexicographically and the first minimum wins.

    Args:
        model: Model with at most three parameters.
        pop: The population.
        box: One ``(low, high)`` interval per parameter. ``low == high`` gives a single value.
        step: Requested spacing. Each axis is split into ``round((high - low) / step)`` equal
            intervals and the certificate reports the largest spacing actually used.
        chunk: Number of grid points evaluated per batch.

    Returns:
        The grid minimum and its location.
    """
    if model.param_dim > MAX_GRID_DIM:
        raise ShapeError(
            f"Grid certification is limited to {MAX_GRID_DIM} parameters, model has "
            f"{model.param_dim}"
        )
    if len(box) != model.param_dim:
        raise ShapeError(f"Need {model.param_dim} intervals, got {len(box)}")
    assert step > 0, f"Grid step must be positive, got {step}"
    axes, spacing = [], 0.0
    for low, high in box:
        assert high >= low, f"Empty interval ({low}, {high})"
        n = int(round((high - low) / step)) + 1
        axes.append(np.linspace(low, high, n))
        if n > 1:
            spacing = max(spacing, (high - low) / (n - 1))
    if spacing and not np.isclose(spacing, step, rtol=1e-9, atol=0.0):
        logger.warning(f"Grid step {step:g} does not divide the box, effective step {spacing:.6g}")
    grid = np.stack([g.reshape(-1) for g in np.meshgrid(*axes, indexing="ij")], axis=-1)
    mses = np.empty(grid.shape[0])
    base = float(np.dot(pop.weights, pop.var_values))
    for i in range(0, grid.shape[0], chunk):
        values = model.eval_batch(grid[i : i + chunk], pop.points)
        residual = (pop.mean_values[:, None] - values) ** 2
        mses[i : i + chunk] = base + pop.weights @ residual
    j = int(np.argmin(mses))
    box = [(float(low), float(high)) for low, high in box]
    return GridCertificate(float(mses[j]), grid[j], grid.shape[0], box, float(spacing or step))


def central_difference(fn: Callable[[NDArray], float], theta: NDArray, step: float) -> NDArray:
    """Central finite-difference gradient of a scalar function."""
    theta = np.asarray(theta, dtype=np.float64)
    grad = np.empty_like(theta)
    for i in range(theta.shape[0]):
        e = np.zeros_like(theta)
        e[i] = step
        grad[i] = (fn(theta + e) - fn(theta - e)) / (2 * step)
    return grad


def check_gradient_consistency(
    model: ModelHandle, pop: Population, theta: ArrayLike, fd_step: float = 1e-5
) -> float:
    """Largest deviation between the analytic MSE gradient and central differences.

    Deviations are divided by ``max(1, |grad|_inf)`` of the numeric gradient. A tolerance such as
    ``1e-6`` is therefore relative once the gradient exceeds 1 in some coordinate and absolute
    below that, including at a stationary point. Nonsmooth models may exceed any tolerance at
    kinks; the value is reported as is.
    """
    theta = np.asarray(theta, dtype=np.float64)
    analytic = population_mse_grad(model, theta, pop)
    numeric = central_difference(lambda t: population_mse(model, t, pop), theta, fd_step)
    scale = max(1.0, float(np.max(np.abs(numeric))))
    deviation = float(np.max(np.abs(analytic - numeric)) / scale)
    if not model.smooth:
        logger.info(f"{model.kind} is nonsmooth, gradient deviation {deviation:.3e} is advisory")
    return deviation
