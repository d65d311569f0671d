"""Population risk minimization and grid certificates."""

from weaklearn.optim.optimizer import (
    GridCertificate,
    OptimizationResult,
    armijo_descent,
    central_difference,
    check_gradient_consistency,
    grid_certify,
    minimize_mse,
)

__all__ = [
    "GridCertificate",
    "OptimizationResult",
    "armijo_descent",
    "central_difference",
    "check_gradient_consistency",
    "grid_certify",
    "minimize_mse",
]
