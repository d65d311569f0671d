"""Reports of command runs: verdicts, warnings, payloads and tables.

Reports serialize to JSON with sorted keys and shortest round-trip float formatting, and their
tables to CSV, so identical configs give byte-identical files.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import TYPE_CHECKING, Any

import numpy as np

from weaklearn.errors import ConsistencyError

if TYPE_CHECKING:
    import pandas as pd

logger = logging.getLogger(__name__)

SCHEMA_VERSION = 1
REVALIDATION_TOL = 1e-9
EXIT_PASS, EXIT_FAIL, EXIT_CONFIG = 0, 2, 1


@dataclass
class Verdict:
    """Outcome of one check with the numbers it was decided on."""

    name: str
    passed: bool
    gap: float
    tolerance: float
    detail: str = ""

    def to_dict(self) -> dict[str, Any]:
        return {
            "name": self.name,
            "passed": bool(self.passed),
            "gap": self.gap,
            "tolerance": self.tolerance,
            "detail": self.detail,
        }


def _builtin(value: Any) -> Any:
    """Recursively convert numpy scalars and arrays into JSON-safe builtins."""
    if hasattr(value, "to_dict") and not isinstance(value, dict):
        value = value.to_dict()
    if isinstance(value, dict):
        return {str(k): _builtin(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_builtin(v) for v in value]
    if isinstance(value, np.ndarray):
        return _builtin(value.tolist())
    if isinstance(value, (np.bool_, bool)):
        return bool(value)
    if isinstance(value, (np.integer, int)):
        return int(value)
    if isinstance(value, (np.floating, float)):
        value = float(value)
        return value if math.isfinite(value) else str(value)
    return value


@dataclass
class Report:
    """Everything a command found, ready to be written."""

    command: str
    config: dict[str, Any]
    seeds: dict[str, int]
    verdicts: list[Verdict] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)
    payloads: dict[str, Any] = field(default_factory=dict)
    tables: dict[str, pd.DataFrame] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return len(self.verdicts) > 0 and all(v.passed for v in self.verdicts)

    @property
    def exit_code(self) -> int:
        return EXIT_PASS if self.passed else EXIT_FAIL

    def add_verdict(
        self, name: str, passed: bool, gap: float, tolerance: float, detail: str = ""
    ) -> Verdict:
        verdict = Verdict(name, bool(passed), float(gap), float(tolerance), detail)
        self.verdicts.append(verdict)
        return verdict

    def revalidate(self, name: str, recorded: float, recomputed: float):
        """Abort if a payload value does not reproduce from its serialized inputs."""
        if not abs(recorded - recomputed) <= REVALIDATION_TOL * max(1.0, abs(recorded)):
            raise ConsistencyError(
                f"{name}: recorded {recorded!r} but recomputed {recomputed!r} from the report"
            )

    def to_dict(self) -> dict[str, Any]:
        return _builtin(
            {
                "schema_version": SCHEMA_VERSION,
                "command": self.command,
                "config": self.config,
                "seeds": self.seeds,
                "passed": self.passed,
                "exit_code": self.exit_code,
                "verdicts": [v.to_dict() for v in self.verdicts],
                "warnings": self.warnings,
                "payloads": self.payloads,
                "tables": sorted(self.tables),
            }
        )

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2) + "\n"

    def write(self, out: str | Path | None = None) -> list[Path]:
        """Write the JSON report to ``out`` (stdout if None) and the tables next to it.

        Tables are written as ``<stem>_<table>.csv`` and only when ``out`` is given.

        Returns:
            The files written.
        """
        text = self.to_json()
        if out is None:
            print(text, end="")
            if self.tables:
                logger.info(f"Tables {sorted(self.tables)} not written, pass --out to keep them")
            return []
        out = Path(out)
        out.parent.mkdir(parents=True, exist_ok=True)
        out.write_text(text)
        written = [out]
        for name, table in sorted(self.tables.items()):
            path = out.with_name(f"{out.stem}_{name}.csv")
            table.to_csv(path, index=False, float_format="%.17g")
            written.append(path)
        return written
