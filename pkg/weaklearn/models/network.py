"""Feedforward architectures, their parameters and a reference forward pass.

A network with widths ``w_0..w_D`` computes ``H^(d) = sigma(W^(d) H^(d-1) + b^(d))`` for
``1 <= d <= D`` with ``H^(0) = x`` and returns the linear output ``W^(D+1) H^(D) + b^(D+1)``.
Parameters flatten in layer order: ``W^(1)`` row-major, ``b^(1)``, ..., ``W^(D+1)``, ``b^(D+1)``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import TYPE_CHECKING, Any

import numpy as np
from scipy.special import expit

from weaklearn.errors import ShapeError

if TYPE_CHECKING:
    from collections.abc import Sequence

    from numpy.typing import ArrayLike, NDArray

TANH_FORM = ("sigmoid", "scaled_tanh")
ACTIVATIONS = (*TANH_FORM, "relu")


def activate(z: NDArray, activation: str) -> NDArray:
    """Numpy activation. ``scaled_tanh`` is ``(tanh(z) + 1) / 2``, a tanh-form member."""
    match activation:
        case "sigmoid":
            return expit(z)
        case "scaled_tanh":
            return 0.5 * (np.tanh(z) + 1.0)
        case "relu":
            return np.maximum(z, 0.0)
    raise ShapeError(f"Unknown activation {activation!r}, use one of {ACTIVATIONS}")


@dataclass(frozen=True)
class NetworkArchitecture:
    """Widths ``w_0..w_D`` of the input and hidden layers plus the hidden activation.

    The output layer is always linear with a single unit.
    """

    widths: tuple[int, ...]
    activation: str

    def __post_init__(self):
        object.__setattr__(self, "widths", tuple(int(w) for w in self.widths))
        if len(self.widths) < 2:
            raise ShapeError(f"Need an input width and at least one hidden layer: {self.widths}")
        if any(w < 1 for w in self.widths):
            raise ShapeError(f"All widths must be positive, got {self.widths}")
        if self.activation not in ACTIVATIONS:
            raise ShapeError(f"Unknown activation {self.activation!r}, use one of {ACTIVATIONS}")

    @property
    def depth(self) -> int:
        """Number ``D`` of hidden layers."""
        return len(self.widths) - 1

    @property
    def input_dim(self) -> int:
        return self.widths[0]

    @property
    def is_tanh_form(self) -> bool:
        return self.activation in TANH_FORM

    @property
    def layer_shapes(self) -> list[tuple[int, int]]:
        """Shapes of ``W^(1)..W^(D+1)``."""
        shapes = [(self.widths[d], self.widths[d - 1]) for d in range(1, len(self.widths))]
        return shapes + [(1, self.widths[-1])]

    @property
    def param_dim(self) -> int:
        return sum(rows * cols + rows for rows, cols in self.layer_shapes)

    def to_dict(self) -> dict[str, Any]:
        return {"widths": list(self.widths), "activation": self.activation}


@dataclass(frozen=True, eq=False)
class NetworkParams:
    """Weights ``W^(1)..W^(D+1)`` and biases ``b^(1)..b^(D+1)`` of a network."""

    weights: tuple[NDArray, ...]
    biases: tuple[NDArray, ...]

    def check(self, arch: NetworkArchitecture):
        """Raise if the shapes do not conform to ``arch`` exactly."""
        if len(self.weights) != arch.depth + 1 or len(self.biases) != arch.depth + 1:
            raise ShapeError(f"Expected {arch.depth + 1} layers, got {len(self.weights)}")
        for d, (W, b, shape) in enumerate(zip(self.weights, self.biases, arch.layer_shapes), 1):
            if W.shape != shape or b.shape != (shape[0],):
                raise ShapeError(
                    f"Layer {d}: expected W {shape} and b ({shape[0]},), got {W.shape}, {b.shape}"
                )

    def flatten(self) -> NDArray[np.floating]:
        parts = []
        for W, b in zip(self.weights, self.biases):
            parts += [W.reshape(-1), b]
        return np.concatenate(parts)

    @classmethod
    def from_flat(cls, arch: NetworkArchitecture, flat: ArrayLike) -> NetworkParams:
        flat = np.asarray(flat, dtype=np.float64)
        if flat.shape != (arch.param_dim,):
            raise ShapeError(f"Expected {arch.param_dim} parameters, got shape {flat.shape}")
        weights, biases, i = [], [], 0
        for rows, cols in arch.layer_shapes:
            weights.append(flat[i : i + rows * cols].reshape(rows, cols))
            i += rows * cols
            biases.append(flat[i : i + rows])
            i += rows
        return cls(tuple(weights), tuple(biases))

    def to_dict(self) -> dict[str, Any]:
        """Shape header plus the flat parameter array."""
        return {"shapes": [list(W.shape) for W in self.weights], "flat": self.flatten().tolist()}

    @classmethod
    def from_dict(
        cls, data: dict[str, Any], activation: str
    ) -> tuple[NetworkArchitecture, NetworkParams]:
        """Rebuild the architecture and parameters from :meth:`to_dict` output."""
        shapes = [tuple(s) for s in data["shapes"]]
        widths = [shapes[0][1]] + [s[0] for s in shapes[:-1]]
        arch = NetworkArchitecture(tuple(widths), activation)
        params = cls.from_flat(arch, data["flat"])
        params.check(arch)
        return arch, params


def hidden_values(
    arch: NetworkArchitecture, params: NetworkParams, x: NDArray
) -> list[NDArray[np.floating]]:
    """Hidden layer outputs ``H^(1)..H^(D)``, each of shape ``(n, w_d)``."""
    params.check(arch)
    h = np.atleast_2d(x)
    layers = []
    for W, b in zip(params.weights[:-1], params.biases[:-1]):
        h = activate(h @ W.T + b, arch.activation)
        layers.append(h)
    return layers


def forward(arch: NetworkArchitecture, params: NetworkParams, x: NDArray) -> NDArray[np.floating]:
    """Network output for ``(n, p)`` points."""
    h = hidden_values(arch, params, x)[-1]
    return h @ params.weights[-1][0] + params.biases[-1][0]


def permute_hidden_units(
    params: NetworkParams, layer: int, permutation: Sequence[int]
) -> NetworkParams:
    """Relabel the units of hidden layer ``layer`` without changing the network function.

    Rows of ``W^(d)``, entries of ``b^(d)`` and columns of ``W^(d+1)`` are permuted together.

    Args:
        params: Network parameters.
        layer: Hidden layer index ``d`` in ``1..D``.
        permutation: New order of the units of that layer.

    Returns:
        Parameters of a network computing the same function.
    """
    depth = len(params.weights) - 1
    assert 1 <= layer <= depth, f"Hidden layer index must be in 1..{depth}, got {layer}"
    perm = np.asarray(permutation)
    n_units = params.biases[layer - 1].shape[0]
    assert sorted(perm.tolist()) == list(range(n_units)), f"Not a permutation of {n_units} units"
    weights, biases = list(params.weights), list(params.biases)
    weights[layer - 1] = weights[layer - 1][perm]
    biases[layer - 1] = biases[layer - 1][perm]
    weights[layer] = weights[layer][:, perm]
    return NetworkParams(tuple(weights), tuple(biases))
