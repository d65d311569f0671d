"""Access to the default experiment settings shipped with the package.

Defaults live in ``weaklearn/data/defaults.toml`` and are read with dot-path lookups such as
``defaults.get("optimizer.restarts")``.
"""

from __future__ import annotations

import copy
from pathlib import Path
from typing import Any

import toml

from weaklearn.errors import ConfigError


class Defaults:
    """Default values of every experiment config section."""

    def __init__(self, config_file: str = "defaults.toml"):
        """Load the defaults.

        Args:
            config_file: Name of the file in the package data directory.
        """
        self.config_path = Path(__file__).parent.parent / "data" / config_file
        try:
            with open(self.config_path, "r") as f:
                self._values = toml.load(f)
        except FileNotFoundError as e:
            raise ConfigError(f"Defaults file {self.config_path} not found") from e

    def get(self, key_path: str, default: Any = None) -> Any:
        """Get a value using dot notation, e.g. ``"audit.far_radius"``.

        Args:
            key_path: Path to the value.
            default: Returned if the path does not exist.
        """
        value = self._values
        try:
            for key in key_path.split("."):
                value = value[key]
            return copy.deepcopy(value)
        except (KeyError, TypeError):
            return default

    def as_dict(self) -> dict[str, Any]:
        """Deep copy of all defaults."""
        return copy.deepcopy(self._values)

    def __getitem__(self, key: str) -> Any:
        return copy.deepcopy(self._values[key])

    def __contains__(self, key: str) -> bool:
        return key in self._values


defaults = Defaults()
