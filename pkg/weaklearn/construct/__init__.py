"""Half-space search and explicit indicator networks."""

from weaklearn.construct.halfspace import HalfspaceFinding, best_linear_predictor, find_halfspace
from weaklearn.construct.indicator import (
    DEFAULT_K_SCHEDULE,
    Theorem1Result,
    build_indicator,
    build_relu_indicator,
    build_tanh_indicator,
    closed_form,
    indicator_error_schedule,
    l2_indicator_error,
    verify_theorem1,
)

__all__ = [
    "DEFAULT_K_SCHEDULE",
    "HalfspaceFinding",
    "Theorem1Result",
    "best_linear_predictor",
    "build_indicator",
    "build_relu_indicator",
    "build_tanh_indicator",
    "closed_form",
    "find_halfspace",
    "indicator_error_schedule",
    "l2_indicator_error",
    "verify_theorem1",
]
