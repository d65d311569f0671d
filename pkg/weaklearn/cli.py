"""Command-line interface.

Run as:

    $ weaklearn verify-theorem1 --config config/atoms_xsq_relu.toml --out reports/atoms.json

Exit codes are 0 if every verdict passes, 2 if a verdict fails and 1 for usage or config errors.
"""

from __future__ import annotations

import logging

import fire
from fire.core import FireExit

from weaklearn.commands import run_command
from weaklearn.errors import ConfigError, ConsistencyError, ShapeError
from weaklearn.utils.logging_setup import setup_logging
from weaklearn.utils.report import EXIT_CONFIG, EXIT_FAIL

logger = logging.getLogger(__name__)


class WeakLearnCLI:
    """Verify weak learnability and identifiability claims on configured populations."""

    def _run(
        self,
        command: str,
        config: str,
        out: str | None,
        trace: bool,
        seed_override: int | None,
        log_level: str,
        log_dir: str | None,
    ):
        setup_logging(log_level, log_dir, command)
        try:
            report = run_command(command, config, seed_override, trace)
        except (ConfigError, ShapeError) as e:
            logger.error(f"Config error: {e}")
            raise SystemExit(EXIT_CONFIG) from e
        except ConsistencyError as e:
            logger.error(f"Internal consistency check failed: {e}")
            raise SystemExit(EXIT_FAIL) from e
        for path in report.write(out):
            logger.info(f"Wrote {path}")
        raise SystemExit(report.exit_code)

    def verify_theorem1(
        self,
        config: str,
        out: str | None = None,
        trace: bool = False,
        seed_override: int | None = None,
        log_level: str = "INFO",
        log_dir: str | None = None,
    ):
        """Build a network that beats the constant predictor on a weakly learnable population.

        Args:
            config: Path of the TOML or JSON experiment config.
            out: Path of the JSON report. Printed to stdout if None.
            trace: Keep optimizer traces in the report.
            seed_override: Replace every seed of the config.
            log_level: Log level of the console and file handlers.
            log_dir: Directory of the run log. No log file if None.
        """
        self._run("verify-theorem1", config, out, trace, seed_override, log_level, log_dir)

    def verify_theorem2(
        self,
        config: str,
        out: str | None = None,
        trace: bool = False,
        seed_override: int | None = None,
        log_level: str = "INFO",
        log_dir: str | None = None,
    ):
        """Audit the identifiability conditions and build an adversarial target for ``theta0``.

        Args are as for :meth:`verify_theorem1`.
        """
        self._run("verify-theorem2", config, out, trace, seed_override, log_level, log_dir)

    def fisher_audit(
        self,
        config: str,
        out: str | None = None,
        trace: bool = False,
        seed_override: int | None = None,
        log_level: str = "INFO",
        log_dir: str | None = None,
    ):
        """Report the Fisher information, identifiability probe, Hessian envelope and support."""
        self._run("fisher-audit", config, out, trace, seed_override, log_level, log_dir)

    def proposition_contrast(
        self,
        config: str,
        out: str | None = None,
        trace: bool = False,
        seed_override: int | None = None,
        log_level: str = "INFO",
        log_dir: str | None = None,
    ):
        """Contrast the logistic model and a one-layer network on a logistic-adversarial target."""
        self._run("proposition-contrast", config, out, trace, seed_override, log_level, log_dir)


def main():
    """Console entry point."""
    try:
        fire.Fire(WeakLearnCLI, serialize=lambda _: None)
    except FireExit as e:
        # Usage errors share the config error exit code
        raise SystemExit(EXIT_CONFIG if e.code else 0) from e


if __name__ == "__main__":
    main()
