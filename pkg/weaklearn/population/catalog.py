"""Named catalog of conditional mean and variance functions.

Every function maps an ``(n, p)`` array of points to ``n`` real values. Functions carry their
name and numeric parameters so that reports can echo exactly which target was used.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Any, Callable

import numpy as np
from numpy.polynomial import polynomial as P

from weaklearn.errors import ConfigError

if TYPE_CHECKING:
    from collections.abc import Mapping

    from numpy.typing import NDArray


@dataclass(frozen=True)
class NamedFunction:
    """A real-valued function of points together with its catalog name and parameters."""

    name: str
    params: dict[str, Any] = field(compare=False)
    fn: Callable[[NDArray], NDArray] = field(compare=False, repr=False)

    def __call__(self, x: NDArray) -> NDArray:
        x = np.atleast_2d(np.asarray(x, dtype=np.float64))
        values = np.asarray(self.fn(x), dtype=np.float64)
        return np.broadcast_to(values, (x.shape[0],)).copy()

    def to_dict(self) -> dict[str, Any]:
        """Serializable description of the function."""
        return {"name": self.name, **self.params}


def constant(value: float = 0.0) -> NamedFunction:
    """Constant function."""
    value = float(value)
    return NamedFunction("constant", {"value": value}, lambda x: np.full(x.shape[0], value))


def polynomial(coeffs: list[float], coordinate: int = 0) -> NamedFunction:
    """Polynomial ``sum_k coeffs[k] * x_j^k`` in a single coordinate ``j``."""
    coeffs = [float(c) for c in coeffs]
    return NamedFunction(
        "polynomial",
        {"coeffs": coeffs, "coordinate": int(coordinate)},
        lambda x: P.polyval(x[:, coordinate], coeffs),
    )


def indicator_halfspace(
    alpha: list[float], threshold: float = 0.0, low: float = 0.0, high: float = 1.0
) -> NamedFunction:
    """Step function taking ``high`` on ``{alpha . x < threshold}`` and ``low`` elsewhere."""
    direction = np.asarray(alpha, dtype=np.float64)

    def fn(x: NDArray) -> NDArray:
        assert x.shape[1] == direction.shape[0], f"Expected {direction.shape[0]}-dim points"
        return np.where(x @ direction < threshold, high, low)

    params = {"alpha": direction.tolist(), "threshold": float(threshold)}
    params |= {"low": float(low), "high": float(high)}
    return NamedFunction("indicator_halfspace", params, fn)


def cosine_even_perturbation(
    base: float = 0.5, epsilon: float = 0.1, frequency: float = 1.0, coordinate: int = 0
) -> NamedFunction:
    """Even bounded perturbation ``base + epsilon * (cos(f x_j) - exp(-f^2 / 2))``.

    The subtracted constant is the mean of ``cos(f Z)`` for a standard normal ``Z``, so the
    perturbation is centered under Gaussian inputs.
    """
    shift = np.exp(-0.5 * frequency**2)
    params = {"base": float(base), "epsilon": float(epsilon), "frequency": float(frequency)}
    params["coordinate"] = int(coordinate)
    return NamedFunction(
        "cosine_even_perturbation",
        params,
        lambda x: base + epsilon * (np.cos(frequency * x[:, coordinate]) - shift),
    )


def bernoulli_variance(mean: NamedFunction) -> NamedFunction:
    """Conditional variance ``m(x)(1 - m(x))`` of a binary response with ``P(Y=1|X) = m(X)``."""

    def fn(x: NDArray) -> NDArray:
        m = mean(x)
        return m * (1.0 - m)

    return NamedFunction("bernoulli", {}, fn)


CATALOG: dict[str, Callable[..., NamedFunction]] = {
    "constant": constant,
    "polynomial": polynomial,
    "indicator_halfspace": indicator_halfspace,
    "cosine_even_perturbation": cosine_even_perturbation,
}
CATALOG_PARAMS: dict[str, set[str]] = {
    "constant": {"value"},
    "polynomial": {"coeffs", "coordinate"},
    "indicator_halfspace": {"alpha", "threshold", "low", "high"},
    "cosine_even_perturbation": {"base", "epsilon", "frequency", "coordinate"},
    "bernoulli": set(),
}


def make_function(
    spec: Mapping[str, Any], path: str = "function", mean: NamedFunction | None = None
) -> NamedFunction:
    """Build a catalog function from its config description.

    Args:
        spec: Mapping with a ``name`` key and the numeric parameters of that catalog entry.
        path: Config path used to address errors.
        mean: Conditional mean, required by the ``bernoulli`` variance entry.

    Returns:
        The named function.
    """
    spec = dict(spec)
    name = spec.pop("name", None)
    if name not in CATALOG_PARAMS:
        known = ", ".join(sorted(CATALOG_PARAMS))
        raise ConfigError(f"{path}.name: unknown function {name!r}, use one of {known}")
    if unknown := sorted(set(spec) - CATALOG_PARAMS[name]):
        raise ConfigError(f"{path}.{unknown[0]}: unknown key for function {name!r}")
    if name == "bernoulli":
        if mean is None:
            raise ConfigError(f"{path}.name: 'bernoulli' is only valid as a conditional variance")
        return bernoulli_variance(mean)
    try:
        return CATALOG[name](**spec)
    except (TypeError, ValueError) as e:
        raise ConfigError(f"{path}: invalid parameters for {name!r}: {e}") from e
