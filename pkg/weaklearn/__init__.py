"""Population-level laboratory for weak learnability and adversarial targets of parametric models.

The package evaluates square-loss risks against distributions directly, either exactly on finitely
supported populations or by seeded Monte Carlo, and uses them to verify two facts constructively:
feedforward networks beat the constant predictor on every weakly learnable distribution, while
identifiable smooth models admit targets on which the constant is their best fit.
"""

import jax

jax.config.update("jax_enable_x64", True)  # Network closed forms are checked at 1e-10
