"""Seeded counter-based random streams and the named samplers for X."""

from __future__ import annotations

import zlib
from typing import TYPE_CHECKING

import numpy as np

if TYPE_CHECKING:
    from numpy.typing import NDArray

SAMPLERS = ("normal", "uniform")


def derive_rng(seed: int, tag: str) -> np.random.Generator:
    """Create an independent Philox stream for the pair ``(seed, tag)``.

    Streams for different tags never overlap, so adding a new consumer of randomness leaves every
    existing stream, and every estimate computed from it, untouched.

    Args:
        seed: Non-negative 64-bit experiment seed.
        tag: Name of the consumer, e.g. ``"population-samples"`` or ``"restart-3"``.

    Returns:
        A generator seeded from ``(seed, tag)`` only.
    """
    assert seed >= 0, f"Seeds must be non-negative, got {seed}"
    entropy = [seed & 0xFFFFFFFF, (seed >> 32) & 0xFFFFFFFF, zlib.crc32(tag.encode())]
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(entropy)))


def draw_points(
    sampler: str, dim: int, n_samples: int, seed: int, low: float = -1.0, high: float = 1.0
) -> NDArray[np.floating]:
    """Draw the ``(n_samples, dim)`` sample that backs a Monte Carlo population."""
    assert sampler in SAMPLERS, f"Unknown sampler {sampler!r}, use one of {SAMPLERS}"
    assert dim >= 1 and n_samples >= 1, "Sampler needs a positive dimension and sample count"
    rng = derive_rng(seed, "population-samples")
    if sampler == "normal":
        return rng.standard_normal((n_samples, dim))
    assert high > low, f"Uniform sampler needs low < high, got [{low}, {high}]"
    return rng.uniform(low, high, size=(n_samples, dim))


def random_directions(n: int, dim: int, rng: np.random.Generator) -> NDArray[np.floating]:
    """Uniform random unit vectors in ``R^dim``."""
    directions = rng.standard_normal((n, dim))
    return directions / np.linalg.norm(directions, axis=-1, keepdims=True)
