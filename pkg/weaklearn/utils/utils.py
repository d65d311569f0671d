"""Utility module."""

from __future__ import annotations

import json
from typing import TYPE_CHECKING

import toml
from ml_collections import ConfigDict

from weaklearn.errors import ConfigError

if TYPE_CHECKING:
    from pathlib import Path

SUFFIXES = (".toml", ".json")


def load_config(path: Path) -> ConfigDict:
    """Load an experiment config file.

    Args:
        path: Path to a TOML or JSON file. Both formats share one schema.

    Returns:
        The raw configuration, not yet validated.
    """
    if not path.is_file():
        raise ConfigError(f"config: file not found: {path}")
    if path.suffix not in SUFFIXES:
        raise ConfigError(f"config: expected one of {SUFFIXES}, got {path.name}")
    with open(path, "r") as f:
        try:
            raw = toml.load(f) if path.suffix == ".toml" else json.load(f)
        except (toml.TomlDecodeError, json.JSONDecodeError) as e:
            raise ConfigError(f"config: cannot parse {path}: {e}") from e
    if not isinstance(raw, dict):
        raise ConfigError(f"config: top level of {path} must be a table")
    return ConfigDict(raw)
