"""Exceptions raised by the weaklearn modules.

All exceptions derive from builtin exception types so callers that only know about ``ValueError``
or ``RuntimeError`` keep working.
"""

from __future__ import annotations

from typing import TYPE_CHECKING

if TYPE_CHECKING:
    import pandas as pd


class EvaluationError(ValueError):
    """A function returned a non-finite value on the population support."""


class ShapeError(ValueError):
    """Parameter, point or architecture dimensions do not conform."""


class ConsistencyError(RuntimeError):
    """An internal consistency check failed, e.g. a negative variance or a report mismatch."""


class HypothesisError(ValueError):
    """A hypothesis required by a verification pipeline does not hold."""


class CalibrationError(RuntimeError):
    """The perturbation size could not be calibrated above the underflow limit."""


class OptimizationError(RuntimeError):
    """Every restart of a population risk minimization was abandoned."""


class SearchError(RuntimeError):
    """A search exhausted its budget. The scanned table is attached for diagnosis."""

    def __init__(self, message: str, table: pd.DataFrame | None = None):
        """Create the error.

        Args:
            message: Human-readable reason.
            table: The scan or schedule table collected before giving up.
        """
        super().__init__(message)
        self.table = table


class ConfigError(ValueError):
    """An experiment config violates the schema. Messages start with the offending key path."""
