"""Populations of ``(X, E[Y|X], Var(Y|X))`` and their exact or Monte Carlo expectations.

Every square-loss quantity depends on ``Y`` only through its conditional mean and variance, so a
population stores the law of ``X`` and those two functions. Finitely supported populations
evaluate expectations as exact weighted sums. Monte Carlo populations draw one seeded sample of
``X`` and use it for every expectation, which keeps inner products, Gram matrices and risks
computed on the same points mutually consistent.
"""

from __future__ import annotations

import logging
from abc import ABC, abstractmethod
from dataclasses import dataclass
from functools import cached_property
from typing import TYPE_CHECKING, Any, Callable

import numpy as np

from weaklearn.errors import ConsistencyError, EvaluationError, HypothesisError, ShapeError
from weaklearn.population.catalog import NamedFunction, constant
from weaklearn.population.sampling import SAMPLERS, draw_points

if TYPE_CHECKING:
    from numpy.typing import ArrayLike, NDArray

logger = logging.getLogger(__name__)

Function = Callable[["NDArray"], "NDArray"]
MIN_MC_SAMPLES = 10_000
ATOM_TOLERANCE = 1e-9


class Population(ABC):
    """Joint law of ``(X, Y)`` described by the law of ``X`` and the first two moments of Y|X."""

    @property
    @abstractmethod
    def points(self) -> NDArray[np.floating]:
        """Support points (atoms) or the Monte Carlo sample, shape ``(n, p)``."""

    @property
    @abstractmethod
    def weights(self) -> NDArray[np.floating]:
        """Probability weight of every point, summing to one."""

    @property
    @abstractmethod
    def mean_values(self) -> NDArray[np.floating]:
        """``E[Y | X = x]`` at every point."""

    @property
    @abstractmethod
    def var_values(self) -> NDArray[np.floating]:
        """``Var(Y | X = x)`` at every point."""

    @property
    @abstractmethod
    def is_atomic(self) -> bool:
        """True if expectations are exact weighted sums over a finite support."""

    @abstractmethod
    def with_conditional(self, cond_mean: Any, cond_var: Any = 0.0) -> Population:
        """Same law of ``X`` with a new conditional mean and variance."""

    @abstractmethod
    def to_dict(self) -> dict[str, Any]:
        """Serializable description."""

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    @property
    def n_points(self) -> int:
        return self.points.shape[0]

    @property
    def support_size(self) -> int | None:
        """Cardinality of ``supp X``, ``None`` for continuous samplers."""
        return self.n_points if self.is_atomic else None


@dataclass(frozen=True)
class PopulationStats:
    """Variance decomposition of ``Y`` and the weak learnability verdict."""

    var_y: float
    expected_cond_var: float
    weak_learnable: bool
    mean_y: float
    gap: float  # Var(E[Y|X]) = var_y - expected_cond_var
    tolerance: float
    se: float  # standard error of the gap estimate, 0 on atoms

    def to_dict(self) -> dict[str, Any]:
        return {
            "var_y": self.var_y,
            "expected_cond_var": self.expected_cond_var,
            "weak_learnable": self.weak_learnable,
            "mean_y": self.mean_y,
            "gap": self.gap,
            "tolerance": self.tolerance,
            "se": self.se,
        }


def _as_points(atoms: ArrayLike) -> NDArray[np.floating]:
    points = np.asarray(atoms, dtype=np.float64)
    if points.ndim == 1:
        points = points[:, None]
    if points.ndim != 2 or points.shape[0] == 0:
        raise ShapeError(f"Atoms must be a non-empty list of points, got shape {points.shape}")
    return points


def _conditional_values(spec: Any, points: NDArray, name: str) -> NDArray[np.floating]:
    """Evaluate a conditional moment given as a function, a scalar or per-point values."""
    values = spec(points) if callable(spec) else spec
    values = np.asarray(values, dtype=np.float64)
    if values.ndim == 0:
        values = np.full(points.shape[0], float(values))
    if values.shape != (points.shape[0],):
        raise ShapeError(f"{name} needs one value per atom, got shape {values.shape}")
    require_finite(values, points, name)
    return values


def require_finite(values: NDArray, points: NDArray, name: str = "function"):
    bad = np.flatnonzero(~np.isfinite(values))
    if bad.size:
        i = bad[0]
        raise EvaluationError(f"{name} is non-finite ({values[i]}) at point {points[i].tolist()}")


def _frozen(values: NDArray) -> NDArray:
    values = np.array(values, dtype=np.float64)
    values.flags.writeable = False
    return values


class AtomPopulation(Population):
    """Finitely supported population with exact expectations.

    Conditional moments may be given as functions of the points, scalars, or per-atom values.
    """

    def __init__(
        self,
        atoms: ArrayLike,
        weights: ArrayLike | None = None,
        cond_mean: Any = 0.0,
        cond_var: Any = 0.0,
    ):
        """Create the population and validate its invariants.

        Args:
            atoms: Points of the support, a list of scalars for p = 1 or a list of p-vectors.
            weights: Probabilities of the atoms. Uniform if None.
            cond_mean: ``E[Y | X = x_i]`` as a function, a scalar or one value per atom.
            cond_var: ``Var(Y | X = x_i)`` in the same forms, non-negative.
        """
        points = _as_points(atoms)
        n = points.shape[0]
        weights = np.full(n, 1.0 / n) if weights is None else np.asarray(weights, dtype=float)
        if weights.shape != (n,):
            raise ShapeError(f"Expected {n} weights, got shape {weights.shape}")
        if np.any(weights <= 0):
            raise ValueError(f"Atom weights must be strictly positive, got {weights.tolist()}")
        if abs(weights.sum() - 1.0) > 1e-12:
            raise ValueError(f"Atom weights must sum to 1 within 1e-12, got {weights.sum()!r}")
        if np.unique(points, axis=0).shape[0] != n:
            raise ValueError("Atoms must be distinct, use AtomPopulation.from_weighted_points")
        means = _conditional_values(cond_mean, points, "cond_mean")
        variances = _conditional_values(cond_var, points, "cond_var")
        if np.any(variances < 0):
            raise ValueError(f"cond_var must be non-negative, got {variances.tolist()}")
        self._points = _frozen(points)
        self._weights = _frozen(weights)
        self._means = _frozen(means)
        self._vars = _frozen(variances)
        self.mean_fn = cond_mean if isinstance(cond_mean, NamedFunction) else None
        self.var_fn = cond_var if isinstance(cond_var, NamedFunction) else None

    @classmethod
    def from_weighted_points(
        cls, points: ArrayLike, weights: ArrayLike, cond_mean: ArrayLike, cond_var: ArrayLike
    ) -> AtomPopulation:
        """Build a population from possibly repeated points by merging duplicates.

        A repeated point becomes one atom with the summed weight, the weighted mean of the
        conditional means and the mixture variance, so the law of ``(X, Y)`` is unchanged.
        """
        points = _as_points(points)
        weights = np.asarray(weights, dtype=np.float64)
        means = np.broadcast_to(np.asarray(cond_mean, dtype=np.float64), weights.shape)
        variances = np.broadcast_to(np.asarray(cond_var, dtype=np.float64), weights.shape)
        unique, inverse = np.unique(points, axis=0, return_inverse=True)
        inverse = inverse.reshape(-1)
        merged_w = np.bincount(inverse, weights=weights, minlength=unique.shape[0])
        merged_m = np.bincount(inverse, weights=weights * means) / merged_w
        second = np.bincount(inverse, weights=weights * (variances + means**2)) / merged_w
        merged_v = np.maximum(second - merged_m**2, 0.0)
        return cls(unique, merged_w, merged_m, merged_v)

    @property
    def points(self) -> NDArray[np.floating]:
        return self._points

    @property
    def weights(self) -> NDArray[np.floating]:
        return self._weights

    @property
    def mean_values(self) -> NDArray[np.floating]:
        return self._means

    @property
    def var_values(self) -> NDArray[np.floating]:
        return self._vars

    @property
    def is_atomic(self) -> bool:
        return True

    def with_conditional(self, cond_mean: Any, cond_var: Any = 0.0) -> AtomPopulation:
        return AtomPopulation(self._points, self._weights, cond_mean, cond_var)

    def to_dict(self) -> dict[str, Any]:
        return {
            "kind": "atoms",
            "atoms": self._points.tolist(),
            "weights": self._weights.tolist(),
            "cond_mean": self._means.tolist(),
            "cond_var": self._vars.tolist(),
        }


class MonteCarloPopulation(Population):
    """Population whose expectations are sample means over one seeded draw of ``X``.

    Identical ``(sampler, dim, seed, n_samples)`` always yield the same sample, hence bit-identical
    estimates.
    """

    def __init__(
        self,
        sampler: str,
        dim: int,
        seed: int,
        n_samples: int,
        cond_mean: Function | None = None,
        cond_var: Function | None = None,
        low: float = -1.0,
        high: float = 1.0,
    ):
        """Declare the population. The sample is drawn lazily on first use.

        Args:
            sampler: Name of the law of X, ``"normal"`` (standard) or ``"uniform"`` on a box.
            dim: Dimension p of X.
            seed: 64-bit seed of the sample.
            n_samples: Number of Monte Carlo samples.
            cond_mean: Function of the points giving ``E[Y|X]``. Zero if None.
            cond_var: Function of the points giving ``Var(Y|X)``. Zero if None.
            low: Lower bound of every coordinate for the uniform sampler.
            high: Upper bound of every coordinate for the uniform sampler.
        """
        if sampler not in SAMPLERS:
            raise ValueError(f"Unknown sampler {sampler!r}, use one of {SAMPLERS}")
        if dim < 1 or n_samples < 2:
            raise ValueError("Monte Carlo populations need dim >= 1 and n_samples >= 2")
        if not 0 <= seed < 2**64:
            raise ValueError(f"Seed must be a 64-bit non-negative integer, got {seed}")
        if n_samples < MIN_MC_SAMPLES:
            logger.warning(
                f"Monte Carlo population with {n_samples} samples is below the "
                f"{MIN_MC_SAMPLES} required for acceptance-level checks"
            )
        self.sampler, self.seed, self.n_samples = sampler, int(seed), int(n_samples)
        self.low, self.high = float(low), float(high)
        self._dim = int(dim)
        self.cond_mean = cond_mean if cond_mean is not None else constant(0.0)
        self.cond_var = cond_var if cond_var is not None else constant(0.0)

    @cached_property
    def points(self) -> NDArray[np.floating]:
        args = (self.sampler, self._dim, self.n_samples, self.seed, self.low, self.high)
        sample = draw_points(*args)
        return _frozen(sample)

    @cached_property
    def weights(self) -> NDArray[np.floating]:
        return _frozen(np.full(self.n_samples, 1.0 / self.n_samples))

    @cached_property
    def mean_values(self) -> NDArray[np.floating]:
        return _frozen(_conditional_values(self.cond_mean, self.points, "cond_mean"))

    @cached_property
    def var_values(self) -> NDArray[np.floating]:
        return _frozen(_conditional_values(self.cond_var, self.points, "cond_var"))

    @property
    def dim(self) -> int:
        return self._dim

    @property
    def is_atomic(self) -> bool:
        return False

    def with_conditional(self, cond_mean: Any, cond_var: Any = 0.0) -> MonteCarloPopulation:
        cond_mean = cond_mean if callable(cond_mean) else constant(cond_mean)
        cond_var = cond_var if callable(cond_var) else constant(cond_var)
        pop = MonteCarloPopulation(
            self.sampler,
            self._dim,
            self.seed,
            self.n_samples,
            cond_mean,
            cond_var,
            self.low,
            self.high,
        )
        pop.__dict__["points"] = self.points  # Same seed, same sample; skip the redraw
        return pop

    def to_dict(self) -> dict[str, Any]:
        info = {"kind": "monte_carlo", "sampler": self.sampler, "dim": self._dim}
        info |= {"seed": self.seed, "n_samples": self.n_samples}
        if self.sampler == "uniform":
            info |= {"low": self.low, "high": self.high}
        for key, fn in (("cond_mean", self.cond_mean), ("cond_var", self.cond_var)):
            if isinstance(fn, NamedFunction):
                info[key] = fn.to_dict()
            else:
                info[key] = {"name": getattr(fn, "__name__", "custom")}
        return info


def evaluate(pop: Population, fn: Function | NamedFunction, name: str = "function") -> NDArray:
    """Evaluate ``fn`` at every point of the population and check it is finite."""
    values = np.asarray(fn(pop.points), dtype=np.float64)
    values = np.broadcast_to(values, (pop.n_points,))
    require_finite(values, pop.points, name)
    return values


def weighted_mean(pop: Population, values: NDArray) -> float:
    """``E[v(X)]`` for values already evaluated on the population points."""
    return float(np.dot(pop.weights, values))


def weighted_se(pop: Population, values: NDArray) -> float:
    """Standard error of :func:`weighted_mean`; zero for exact atom expectations."""
    if pop.is_atomic:
        return 0.0
    return float(np.std(values, ddof=1) / np.sqrt(pop.n_points))


def expect(pop: Population, fn: Function) -> float:
    """``E[fn(X)]``, exact on atoms and a seeded sample mean for Monte Carlo populations."""
    return weighted_mean(pop, evaluate(pop, fn))


def expect_with_se(pop: Population, fn: Function) -> tuple[float, float]:
    """``E[fn(X)]`` together with its Monte Carlo standard error."""
    values = evaluate(pop, fn)
    return weighted_mean(pop, values), weighted_se(pop, values)


def l2_inner(pop: Population, f: Function, g: Function) -> float:
    """L2(pop) inner product ``E[f(X) g(X)]``."""
    return weighted_mean(pop, evaluate(pop, f) * evaluate(pop, g))


def stats(pop: Population) -> PopulationStats:
    """Decompose ``Var(Y) = Var(E[Y|X]) + E[Var(Y|X)]`` and decide weak learnability.

    The strict inequality ``E[Var(Y|X)] < Var(Y)`` is only reported when the gap exceeds the
    certification tolerance: 1e-9 on atoms, three standard errors for Monte Carlo.

    Args:
        pop: The population.

    Returns:
        The variance decomposition and the weak learnability verdict.
    """
    m, v, w = pop.mean_values, pop.var_values, pop.weights
    mean_y = float(np.dot(w, m))
    centered = (m - mean_y) ** 2
    gap = float(np.dot(w, centered))
    expected_cond_var = float(np.dot(w, v))
    if expected_cond_var < -1e-10 or gap < -1e-10:
        raise ConsistencyError(f"Negative variance: Var(m)={gap}, E[v]={expected_cond_var}")
    se = weighted_se(pop, centered)
    tolerance = ATOM_TOLERANCE if pop.is_atomic else max(ATOM_TOLERANCE, 3.0 * se)
    return PopulationStats(
        var_y=gap + expected_cond_var,
        expected_cond_var=expected_cond_var,
        weak_learnable=gap > tolerance,
        mean_y=mean_y,
        gap=gap,
        tolerance=tolerance,
        se=se,
    )


def paired_gap(
    pop: Population, reference: NDArray | float, predictions: NDArray
) -> tuple[float, float]:
    """``E[(Y - r(X))^2] - E[(Y - f(X))^2]`` for two predictors evaluated on the population points.

    The conditional variance cancels, so the gap only involves the conditional mean. The standard
    error is the paired one, computed from per-point differences on the common sample.

    Returns:
        The gap and its standard error.
    """
    m = pop.mean_values
    diffs = (m - reference) ** 2 - (m - predictions) ** 2
    return weighted_mean(pop, diffs), weighted_se(pop, diffs)


def mse_gap(pop: Population, predictions: NDArray) -> tuple[float, float]:
    """``Var(Y) - E[(Y - f(X))^2]``, the gap of ``f`` against the constant predictor ``E[Y]``."""
    return paired_gap(pop, weighted_mean(pop, pop.mean_values), predictions)


def gap_tolerance(pop: Population, var_y: float, se: float) -> float:
    """Certification threshold for a strict MSE gap: 1e-9 Var(Y) on atoms, 3 SE otherwise."""
    if pop.is_atomic:
        return ATOM_TOLERANCE * var_y
    return 3.0 * se


def require_nondegenerate(pop: Population):
    """Reject populations whose ``X`` puts all mass on a single point."""
    if pop.is_atomic and pop.n_points == 1:
        raise HypothesisError(f"X is degenerate: all mass at {pop.points[0].tolist()}")
