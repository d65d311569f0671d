"""Differentiable parametric families with gradients and Hessians in the parameters.

All models evaluate on a single point of shape ``(p,)`` or a batch of shape ``(n, p)``. For a
batch, ``eval`` returns ``(n,)``, ``grad_theta`` returns ``(n, d)`` and ``hess_theta`` returns
``(n, d, d)``; for a single point the leading axis is dropped.

Linear-features, logistic and one-layer network models have closed-form derivatives. Deep MLPs
are differentiated with jax; ReLU uses the convention ``relu'(0) = 0``.
"""

from __future__ import annotations

from abc import ABC, abstractmethod
from functools import lru_cache
from typing import TYPE_CHECKING, Any

import jax
import jax.numpy as jnp
import numpy as np
from scipy.special import expit

from weaklearn.errors import ShapeError
from weaklearn.models.network import NetworkArchitecture, NetworkParams, permute_hidden_units
from weaklearn.population.population import require_finite

if TYPE_CHECKING:
    from numpy.typing import ArrayLike, NDArray

    from weaklearn.models.features import FeatureCatalog
    from weaklearn.population import Population


class ModelHandle(ABC):
    """Parametric family ``{f_theta : theta in R^d}`` of functions on ``R^p``."""

    kind: str = ""
    smooth: bool = True

    def __init__(self, input_dim: int, param_dim: int):
        """Record the dimensions.

        Args:
            input_dim: Dimension p of the inputs.
            param_dim: Dimension d of the parameter vector.
        """
        self.input_dim = int(input_dim)
        self.param_dim = int(param_dim)

    def _theta(self, theta: ArrayLike) -> NDArray[np.floating]:
        theta = np.asarray(theta, dtype=np.float64)
        if theta.shape != (self.param_dim,):
            raise ShapeError(f"{self.kind} expects {self.param_dim} parameters, got {theta.shape}")
        return theta

    def _points(self, x: ArrayLike) -> tuple[NDArray[np.floating], bool]:
        x = np.asarray(x, dtype=np.float64)
        single = x.ndim <= 1
        x = x.reshape(1, -1) if single else x
        if x.ndim != 2 or x.shape[1] != self.input_dim:
            raise ShapeError(f"{self.kind} expects {self.input_dim}-dim points, got {x.shape}")
        return x, single

    def eval(self, theta: ArrayLike, x: ArrayLike) -> NDArray[np.floating] | float:
        """``f_theta(x)``."""
        x, single = self._points(x)
        out = self._eval(self._theta(theta), x)
        return float(out[0]) if single else out

    def grad_theta(self, theta: ArrayLike, x: ArrayLike) -> NDArray[np.floating]:
        """Gradient of ``f_theta(x)`` in ``theta``."""
        x, single = self._points(x)
        out = self._grad(self._theta(theta), x)
        return out[0] if single else out

    def hess_theta(self, theta: ArrayLike, x: ArrayLike) -> NDArray[np.floating]:
        """Hessian of ``f_theta(x)`` in ``theta``."""
        x, single = self._points(x)
        out = self._hess(self._theta(theta), x)
        out = 0.5 * (out + np.swapaxes(out, -1, -2))
        return out[0] if single else out

    def eval_batch(self, thetas: NDArray, x: NDArray) -> NDArray[np.floating]:
        """Evaluate many parameter vectors at once. Returns shape ``(n, G)`` for G vectors."""
        x, _ = self._points(x)
        return np.stack([self._eval(self._theta(t), x) for t in thetas], axis=-1)

    def symmetry_candidates(
        self, theta: NDArray, rng: np.random.Generator, n: int, far_radius: float
    ) -> list[NDArray[np.floating]]:
        """Parameter vectors known to compute the same function as ``theta``.

        Families with parameter symmetries override this; identifiable families have none.
        """
        return []

    def to_dict(self) -> dict[str, Any]:
        return {"kind": self.kind, "input_dim": self.input_dim, "param_dim": self.param_dim}

    @abstractmethod
    def _eval(self, theta: NDArray, x: NDArray) -> NDArray: ...

    @abstractmethod
    def _grad(self, theta: NDArray, x: NDArray) -> NDArray: ...

    @abstractmethod
    def _hess(self, theta: NDArray, x: NDArray) -> NDArray: ...


class LinearFeatures(ModelHandle):
    """``f_beta(x) = sum_i beta_i T_i(x)`` over a feature catalog."""

    kind = "linear_features"

    def __init__(self, features: FeatureCatalog, input_dim: int):
        """Create the model.

        Args:
            features: The basis functions ``T_1..T_d``.
            input_dim: Dimension p of the inputs.
        """
        if features.max_index > input_dim:
            raise ShapeError(f"Feature reads x{features.max_index} but input_dim is {input_dim}")
        super().__init__(input_dim, len(features))
        self.features = features

    def _eval(self, theta: NDArray, x: NDArray) -> NDArray:
        return self.features(x) @ theta

    def _grad(self, theta: NDArray, x: NDArray) -> NDArray:
        return self.features(x)

    def _hess(self, theta: NDArray, x: NDArray) -> NDArray:
        return np.zeros((x.shape[0], self.param_dim, self.param_dim))

    def eval_batch(self, thetas: NDArray, x: NDArray) -> NDArray[np.floating]:
        x, _ = self._points(x)
        return self.features(x) @ np.asarray(thetas, dtype=np.float64).T

    def to_dict(self) -> dict[str, Any]:
        return super().to_dict() | {"features": list(self.features.names)}


def _design(x: NDArray) -> NDArray:
    """Inputs with a leading intercept column."""
    return np.concatenate([np.ones((x.shape[0], 1)), x], axis=-1)


class Logistic(ModelHandle):
    """``f(x) = sigmoid(beta_0 + beta^T x)`` with ``theta = (beta_0, beta_1..beta_p)``."""

    kind = "logistic"

    def __init__(self, input_dim: int):
        super().__init__(input_dim, input_dim + 1)

    def _eval(self, theta: NDArray, x: NDArray) -> NDArray:
        return expit(_design(x) @ theta)

    def _grad(self, theta: NDArray, x: NDArray) -> NDArray:
        z = _design(x)
        s = expit(z @ theta)
        return (s * (1 - s))[:, None] * z

    def _hess(self, theta: NDArray, x: NDArray) -> NDArray:
        z = _design(x)
        s = expit(z @ theta)
        s2 = s * (1 - s) * (1 - 2 * s)
        return s2[:, None, None] * z[:, :, None] * z[:, None, :]

    def eval_batch(self, thetas: NDArray, x: NDArray) -> NDArray[np.floating]:
        x, _ = self._points(x)
        return expit(_design(x) @ np.asarray(thetas, dtype=np.float64).T)


class OneLayerNN(ModelHandle):
    """One sigmoid unit with output scale and offset: ``gamma + delta * sigmoid(alpha + beta^T x)``.

    Parameters are ordered ``theta = (alpha, beta_1..beta_p, gamma, delta)``.

    This is the logistic model with an extra output scale and offset, equivalently an MLP with
    one sigmoid unit.
    """

    kind = "one_layer_nn"

    def __init__(self, input_dim: int):
        super().__init__(input_dim, input_dim + 3)

    def _split(self, theta: NDArray) -> tuple[NDArray, float, float]:
        return theta[: self.input_dim + 1], theta[-2], theta[-1]

    def _eval(self, theta: NDArray, x: NDArray) -> NDArray:
        inner, gamma, delta = self._split(theta)
        return gamma + delta * expit(_design(x) @ inner)

    def _grad(self, theta: NDArray, x: NDArray) -> NDArray:
        inner, _, delta = self._split(theta)
        z = _design(x)
        m1 = expit(z @ inner)
        m2 = m1 * (1 - m1)
        ones = np.ones((x.shape[0], 1))
        return np.concatenate([delta * m2[:, None] * z, ones, m1[:, None]], axis=-1)

    def _hess(self, theta: NDArray, x: NDArray) -> NDArray:
        inner, _, delta = self._split(theta)
        z = _design(x)
        m1 = expit(z @ inner)
        m2 = m1 * (1 - m1)
        m3 = m2 * (1 - 2 * m1)
        k = self.input_dim + 1
        hess = np.zeros((x.shape[0], self.param_dim, self.param_dim))
        hess[:, :k, :k] = delta * m3[:, None, None] * z[:, :, None] * z[:, None, :]
        hess[:, :k, -1] = m2[:, None] * z
        hess[:, -1, :k] = m2[:, None] * z
        return hess

    def symmetry_candidates(
        self, theta: NDArray, rng: np.random.Generator, n: int, far_radius: float
    ) -> list[NDArray[np.floating]]:
        """Members of ``(alpha', beta', c, 0)`` when ``f_theta`` is the constant ``c``."""
        theta = self._theta(theta)
        inner, gamma, delta = self._split(theta)
        if np.any(inner[1:] != 0) and delta != 0:
            return []
        c = gamma + delta * expit(inner[0])
        candidates = []
        for _ in range(n):
            direction = rng.standard_normal(inner.shape[0])
            direction /= np.linalg.norm(direction)
            radius = far_radius * (1.0 + rng.exponential())
            candidates.append(np.concatenate([inner + radius * direction, [c, 0.0]]))
        return candidates

    def to_network_params(self, theta: ArrayLike) -> tuple[NetworkArchitecture, NetworkParams]:
        """The same function as an MLP with widths ``(p, 1)`` and sigmoid activation."""
        inner, gamma, delta = self._split(self._theta(theta))
        arch = NetworkArchitecture((self.input_dim, 1), "sigmoid")
        weights = (inner[None, 1:].copy(), np.array([[delta]]))
        return arch, NetworkParams(weights, (inner[:1].copy(), np.array([gamma])))

    def from_network_params(self, params: NetworkParams) -> NDArray[np.floating]:
        """Inverse of :meth:`to_network_params`."""
        params.check(NetworkArchitecture((self.input_dim, 1), "sigmoid"))
        (W1, W2), (b1, b2) = params.weights, params.biases
        return np.concatenate([b1, W1[0], b2, W2[0]])


_JAX_ACTIVATIONS = {
    "sigmoid": jax.nn.sigmoid,
    "scaled_tanh": lambda z: 0.5 * (jnp.tanh(z) + 1.0),
    "relu": jax.nn.relu,  # custom jvp with derivative 0 at the kink
}


@lru_cache(maxsize=None)
def _mlp_functions(widths: tuple[int, ...], activation: str) -> tuple[Any, Any, Any]:
    """Compiled, point-vectorized value, gradient and Hessian of a flat-parameter MLP."""
    shapes = NetworkArchitecture(widths, activation).layer_shapes
    act = _JAX_ACTIVATIONS[activation]

    def forward(theta: jax.Array, x: jax.Array) -> jax.Array:
        h, i = x, 0
        for layer, (rows, cols) in enumerate(shapes):
            W = theta[i : i + rows * cols].reshape(rows, cols)
            i += rows * cols
            h = W @ h + theta[i : i + rows]
            i += rows
            if layer < len(shapes) - 1:
                h = act(h)
        return h[0]

    def batched(fn: Any) -> Any:
        return jax.jit(jax.vmap(fn, in_axes=(None, 0)))

    return batched(forward), batched(jax.grad(forward)), batched(jax.hessian(forward))


class MLP(ModelHandle):
    """Feedforward network with flat parameters in layer order."""

    kind = "mlp"

    def __init__(self, architecture: NetworkArchitecture):
        super().__init__(architecture.input_dim, architecture.param_dim)
        self.architecture = architecture
        self.smooth = architecture.activation != "relu"
        self._fns = _mlp_functions(architecture.widths, architecture.activation)

    def _eval(self, theta: NDArray, x: NDArray) -> NDArray:
        return np.asarray(self._fns[0](jnp.asarray(theta), jnp.asarray(x)))

    def _grad(self, theta: NDArray, x: NDArray) -> NDArray:
        return np.asarray(self._fns[1](jnp.asarray(theta), jnp.asarray(x)))

    def _hess(self, theta: NDArray, x: NDArray) -> NDArray:
        return np.asarray(self._fns[2](jnp.asarray(theta), jnp.asarray(x)))

    def symmetry_candidates(
        self, theta: NDArray, rng: np.random.Generator, n: int, far_radius: float
    ) -> list[NDArray[np.floating]]:
        """Hidden-unit permutations of ``theta``."""
        params = NetworkParams.from_flat(self.architecture, theta)
        widths = self.architecture.widths
        layers = [d for d in range(1, len(widths)) if widths[d] > 1]
        candidates = []
        for _ in range(n if layers else 0):
            permuted = params
            for d in layers:
                permuted = permute_hidden_units(permuted, d, rng.permutation(widths[d]))
            candidates.append(permuted.flatten())
        return candidates

    def to_dict(self) -> dict[str, Any]:
        return super().to_dict() | self.architecture.to_dict()


def population_mse(model: ModelHandle, theta: ArrayLike, pop: Population) -> float:
    """``E[(Y - f_theta(X))^2] = E[Var(Y|X)] + E[(E[Y|X] - f_theta(X))^2]``."""
    f = model.eval(theta, pop.points)
    require_finite(f, pop.points, f"{model.kind} output")
    w = pop.weights
    return float(np.dot(w, pop.var_values) + np.dot(w, (pop.mean_values - f) ** 2))


def population_mse_grad(model: ModelHandle, theta: ArrayLike, pop: Population) -> NDArray:
    """``grad_theta MSE(theta) = -2 E[(E[Y|X] - f_theta(X)) grad_theta f_theta(X)]``."""
    residual = pop.mean_values - model.eval(theta, pop.points)
    grad = model.grad_theta(theta, pop.points)
    require_finite(grad.sum(axis=-1), pop.points, f"{model.kind} gradient")
    return -2.0 * (pop.weights * residual) @ grad
