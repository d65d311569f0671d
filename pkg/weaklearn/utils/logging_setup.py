"""Logging setup for command runs.

Console output goes to stderr so that reports printed to stdout stay machine readable. An optional
file handler keeps a copy of every run under ``run_logs/``.
"""

from __future__ import annotations

import logging
import time
from pathlib import Path
from typing import TYPE_CHECKING, Any

if TYPE_CHECKING:
    from weaklearn.utils.report import Report, Verdict

FORMAT = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"


def setup_logging(
    level: str | int = "INFO", log_dir: str | Path | None = None, command: str = "weaklearn"
) -> Path | None:
    """Configure the root logger for a command run.

    Args:
        level: Log level of all handlers.
        log_dir: Directory of the run log file. No file is written if None.
        command: Command name used in the log file name.

    Returns:
        Path of the log file, if any.
    """
    handlers: list[logging.Handler] = [logging.StreamHandler()]
    log_file = None
    if log_dir is not None:
        Path(log_dir).mkdir(parents=True, exist_ok=True)
        timestamp = time.strftime("%Y%m%d_%H%M%S")
        log_file = Path(log_dir) / f"{command}_{timestamp}.log"
        handlers.append(logging.FileHandler(log_file))
    logging.basicConfig(
        level=level, format=FORMAT, datefmt="%Y-%m-%d %H:%M:%S", handlers=handlers, force=True
    )
    return log_file


class RunLogger:
    """Structured log lines for the stages of a command run."""

    def __init__(self, command: str):
        """Create the run logger.

        Args:
            command: Name of the command being run.
        """
        self.command = command
        self.logger = logging.getLogger(f"weaklearn.run.{command}")

    def log_config(self, config: dict[str, Any]):
        """Log the resolved config section by section."""
        self.logger.info(f"=== {self.command.upper()} ===")
        if "description" in config:
            self.logger.info(f"Description: {config['description']}")
        for name, section in config.items():
            if isinstance(section, dict):
                values = ", ".join(f"{k}={v}" for k, v in sorted(section.items()))
                self.logger.info(f"[{name}] {values}")

    def log_verdict(self, verdict: Verdict):
        status = "PASS" if verdict.passed else "FAIL"
        self.logger.info(
            f"{verdict.name}: {status} (gap {verdict.gap:.6e}, tolerance {verdict.tolerance:.3e})"
            + (f" - {verdict.detail}" if verdict.detail else "")
        )

    def log_warning(self, message: str):
        self.logger.warning(message)

    def log_summary(self, report: Report):
        """Log the overall outcome and exit code."""
        passed = sum(v.passed for v in report.verdicts)
        self.logger.info(
            f"=== {self.command.upper()}: {passed}/{len(report.verdicts)} verdicts passed, "
            f"{len(report.warnings)} warnings, exit code {report.exit_code} ==="
        )
