"""Search for a half-space indicator correlated with the conditional mean of ``Y``.

When ``E[Y|X]`` is not constant, some indicator ``1{alpha . X < t}`` has nonzero covariance with
``Y``. The best affine predictor ``c1 * 1_A + c0`` on such an indicator then beats the constant
predictor by ``Cov(Y, 1_A)^2 / Var(1_A)``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import TYPE_CHECKING, Any

import numpy as np
import pandas as pd

from weaklearn.errors import HypothesisError, SearchError
from weaklearn.population import derive_rng, mse_gap, stats
from weaklearn.population.catalog import NamedFunction, indicator_halfspace
from weaklearn.population.sampling import random_directions

if TYPE_CHECKING:
    from numpy.typing import NDArray

    from weaklearn.population import Population

logger = logging.getLogger(__name__)

DIRECTIONS_PER_DIM = 64
DEFAULT_THRESHOLDS = 99
MIN_COVARIANCE = 1e-9
TIE_TOLERANCE = 1e-12
DEGENERATE_P = 1e-15


@dataclass
class HalfspaceFinding:
    """Half-space ``A = {alpha . x < t}`` and the best affine predictor ``c1 * 1_A + c0``."""

    alpha: NDArray[np.floating]
    t: float
    cov: float
    p_A: float
    c1: float
    c0: float
    predicted_mse: float
    var_y: float
    mean_y: float
    direction_index: int
    threshold_index: int
    gap_se: float = 0.0
    scan: pd.DataFrame | None = None

    def indicator(self, x: NDArray) -> NDArray[np.floating]:
        return (np.atleast_2d(x) @ self.alpha < self.t).astype(np.float64)

    def predictor(self) -> NamedFunction:
        """The affine predictor as a catalog step function."""
        return indicator_halfspace(self.alpha, self.t, low=self.c0, high=self.c0 + self.c1)

    @property
    def gap(self) -> float:
        return self.var_y - self.predicted_mse

    def to_dict(self) -> dict[str, Any]:
        return {
            "alpha": self.alpha.tolist(),
            "t": self.t,
            "cov": self.cov,
            "p_A": self.p_A,
            "c1": self.c1,
            "c0": self.c0,
            "predicted_mse": self.predicted_mse,
            "var_y": self.var_y,
            "gap": self.gap,
            "gap_se": self.gap_se,
            "direction_index": self.direction_index,
            "threshold_index": self.threshold_index,
        }


def _thresholds(z: NDArray, is_atomic: bool, n_thresholds: int) -> NDArray[np.floating]:
    """Midpoints between distinct projected atoms, or empirical quantiles of a sample."""
    if is_atomic:
        levels = np.unique(z)
        return 0.5 * (levels[1:] + levels[:-1])
    quantiles = np.arange(1, n_thresholds + 1) / (n_thresholds + 1)
    return np.unique(np.quantile(z, quantiles))


def find_halfspace(
    pop: Population,
    n_directions: int | None = None,
    thresholds_per_direction: int = DEFAULT_THRESHOLDS,
    seed: int = 0,
) -> HalfspaceFinding:
    """Scan directions and thresholds for the half-space with the largest correlation ratio.

    Coordinate axes are scanned first, then ``n_directions`` seeded random unit vectors. The
    objective is ``|Cov(Y, 1_A)| / sqrt(Var(1_A))``; the first candidate in scan order within
    1e-12 relative of the maximum wins.

    Args:
        pop: A weakly learnable population.
        n_directions: Number of random directions. ``64 * p`` if None.
        thresholds_per_direction: Quantile levels per direction for Monte Carlo populations.
            Atom populations scan every gap between projected atoms.
        seed: Seed of the random directions.

    Returns:
        The best half-space with its affine predictor and the full scan table.
    """
    s = stats(pop)
    if not s.weak_learnable:
        raise HypothesisError(
            f"weak learnability hypothesis fails: Var(E[Y|X]) = {s.gap:.3e} <= {s.tolerance:.3e}"
        )
    p = pop.dim
    n_directions = DIRECTIONS_PER_DIM * p if n_directions is None else n_directions
    rng = derive_rng(seed, "halfspace-directions")
    directions = np.concatenate([np.eye(p), random_directions(n_directions, p, rng)])
    w, m = pop.weights, pop.mean_values
    rows = []
    for i, alpha in enumerate(directions):
        z = pop.points @ alpha
        order = np.argsort(z, kind="stable")
        z_sorted = z[order]
        cum_w = np.concatenate([[0.0], np.cumsum(w[order])])
        cum_wm = np.concatenate([[0.0], np.cumsum((w * m)[order])])
        thresholds = _thresholds(z, pop.is_atomic, thresholds_per_direction)
        counts = np.searchsorted(z_sorted, thresholds, side="left")  # points with z < t
        p_a = cum_w[counts]
        cov = cum_wm[counts] - s.mean_y * p_a
        valid = (counts > 0) & (counts < pop.n_points)
        valid &= (p_a > DEGENERATE_P) & (p_a < 1 - DEGENERATE_P)
        for j in np.flatnonzero(valid):
            var_a = p_a[j] * (1 - p_a[j])
            rows.append((i, j, thresholds[j], p_a[j], cov[j], cov[j] ** 2 / var_a))
    scan = pd.DataFrame(
        rows, columns=["direction", "threshold_index", "threshold", "p_A", "cov", "gap"]
    )
    scan["score"] = np.sqrt(scan["gap"])
    if scan.empty or scan["cov"].abs().max() < MIN_COVARIANCE:
        raise SearchError("no correlated halfspace found within budget", scan)
    best_score = scan["score"].max()
    best = scan.index[scan["score"] >= best_score * (1 - TIE_TOLERANCE)][0]
    row = scan.loc[best]
    i, j = int(row["direction"]), int(row["threshold_index"])
    cov, p_a = float(row["cov"]), float(row["p_A"])
    var_a = p_a * (1 - p_a)
    c1 = cov / var_a
    finding = HalfspaceFinding(
        alpha=directions[i],
        t=float(row["threshold"]),
        cov=cov,
        p_A=p_a,
        c1=c1,
        c0=s.mean_y - c1 * p_a,
        predicted_mse=s.var_y - cov**2 / var_a,
        var_y=s.var_y,
        mean_y=s.mean_y,
        direction_index=i,
        threshold_index=j,
        scan=scan,
    )
    _, finding.gap_se = mse_gap(pop, finding.c1 * finding.indicator(pop.points) + finding.c0)
    logger.info(
        f"Half-space {i}/{j}: t={finding.t:.6g}, cov={cov:.6e}, p_A={p_a:.6g}, "
        f"predicted gap {finding.gap:.6e}"
    )
    return finding


def best_linear_predictor(
    pop: Population, finding: HalfspaceFinding
) -> tuple[float, float, float]:
    """Coefficients and MSE of the best affine predictor on the finding's indicator.

    Args:
        pop: The population.
        finding: Half-space whose indicator is used.

    Returns:
        ``(c1, c0, predicted_mse)`` with ``c1 = Cov(Y, 1_A) / Var(1_A)``, ``c0 = E[Y] - c1 P(A)``
        and ``predicted_mse = Var(Y) - Cov(Y, 1_A)^2 / Var(1_A)``.
    """
    indicator = finding.indicator(pop.points)
    p_a = float(np.dot(pop.weights, indicator))
    if not DEGENERATE_P < p_a < 1 - DEGENERATE_P:
        raise HypothesisError(f"Indicator is degenerate: P(A) = {p_a}")
    s = stats(pop)
    cov = float(np.dot(pop.weights, pop.mean_values * indicator)) - s.mean_y * p_a
    var_a = p_a * (1 - p_a)
    c1 = cov / var_a
    return c1, s.mean_y - c1 * p_a, s.var_y - cov**2 / var_a
