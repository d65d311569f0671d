"""Feature catalogs for linear-in-parameters regression.

Features are declared by name. Coordinates are 1-based, ``x`` is shorthand for ``x1``::

    "1", "x", "x2", "x^3", "x2^2", "cos(2*x1)", "sin(x)", "2*x", "0.5*cos(x2)"
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Callable

import numpy as np

from weaklearn.errors import ConfigError

if TYPE_CHECKING:
    from numpy.typing import NDArray

_NUMBER = r"[-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?"
_COEF = re.compile(rf"^(?:(?P<coef>{_NUMBER})\*)?(?P<body>.+)$")
_POWER = re.compile(r"^x(?P<index>\d+)?(?:\^(?P<power>\d+))?$")
_TRIG = re.compile(rf"^(?P<fn>cos|sin)\((?:(?P<freq>{_NUMBER})\*)?x(?P<index>\d+)?\)$")


def parse_feature(name: str) -> tuple[Callable[[NDArray], NDArray], int]:
    """Turn a feature name into a vectorized function.

    Args:
        name: Feature name following the grammar in the module docstring.

    Returns:
        The function of ``(n, p)`` points and the highest coordinate index it reads (0 for the
        constant feature).
    """
    match = _COEF.match(name.replace(" ", ""))
    if match is None:
        raise ConfigError(f"features: cannot parse feature {name!r}")
    coef = float(match["coef"]) if match["coef"] else 1.0
    body = match["body"]
    if body == "1":
        return (lambda x: np.full(x.shape[0], coef)), 0
    if m := _POWER.match(body):
        j = int(m["index"] or 1)
        power = int(m["power"] or 1)
        _check_index(j, name)
        return (lambda x: coef * x[:, j - 1] ** power), j
    if m := _TRIG.match(body):
        j = int(m["index"] or 1)
        freq = float(m["freq"]) if m["freq"] else 1.0
        _check_index(j, name)
        trig = np.cos if m["fn"] == "cos" else np.sin
        return (lambda x: coef * trig(freq * x[:, j - 1])), j
    raise ConfigError(f"features: cannot parse feature {name!r}")


def _check_index(j: int, name: str):
    if j < 1:
        raise ConfigError(f"features: coordinates are 1-based in {name!r}")


@dataclass(frozen=True)
class FeatureCatalog:
    """Named basis functions ``T_1..T_d`` of a linear-features model."""

    names: tuple[str, ...]
    fns: tuple[Callable[[NDArray], NDArray], ...] = field(repr=False, compare=False)
    max_index: int = 0

    @classmethod
    def from_names(cls, names: list[str] | tuple[str, ...]) -> FeatureCatalog:
        if len(names) == 0:
            raise ConfigError("features: at least one feature is required")
        parsed = [parse_feature(n) for n in names]
        return cls(tuple(names), tuple(p[0] for p in parsed), max(p[1] for p in parsed))

    def __len__(self) -> int:
        return len(self.names)

    def __call__(self, x: NDArray) -> NDArray[np.floating]:
        """Design matrix ``T(x)`` of shape ``(n, d)``."""
        return np.stack([np.broadcast_to(fn(x), (x.shape[0],)) for fn in self.fns], axis=-1)
