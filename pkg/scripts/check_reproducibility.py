"""Run every bundled config twice and compare the report bytes.

Run as:

    $ python scripts/check_reproducibility.py --configs atoms_xsq_relu.toml

Without ``--configs`` all files in ``config/`` are checked with the command they are made for.
"""

from __future__ import annotations

import hashlib
import logging
from pathlib import Path

import fire

from weaklearn.commands import run_command

CONFIG_DIR = Path(__file__).parents[1] / "config"
# Command each bundled config is written for
CONFIG_COMMANDS = {
    "atoms_xsq_relu.toml": "verify-theorem1",
    "independent_y.toml": "verify-theorem1",
    "gaussian_logistic_adversarial_nn.toml": "verify-theorem1",
    "linear_3atoms.toml": "verify-theorem2",
    "logistic_gaussian_even.toml": "verify-theorem2",
    "onelayer_nn_as_subject.toml": "verify-theorem2",
    "fisher_logistic_gaussian.toml": "fisher-audit",
    "fisher_onelayer_nn.toml": "fisher-audit",
    "fisher_collinear_linear.toml": "fisher-audit",
    "proposition_contrast.toml": "proposition-contrast",
}


def _digest(text: str) -> str:
    return hashlib.sha256(text.encode()).hexdigest()[:16]


def check(configs: list[str] | str | None = None, seed_override: int | None = None) -> bool:
    """Check that two runs of each config produce byte-identical reports.

    Args:
        configs: Config file names in ``config/``. All bundled configs if None.
        seed_override: Replace every seed of the configs.

    Returns:
        True if every report reproduced.
    """
    if configs is None:
        configs = sorted(CONFIG_COMMANDS)
    elif isinstance(configs, str):
        configs = [configs]
    reproducible = True
    for name in configs:
        assert name in CONFIG_COMMANDS, f"Unknown config {name}"
        command = CONFIG_COMMANDS[name]
        first = run_command(command, CONFIG_DIR / name, seed_override).to_json()
        second = run_command(command, CONFIG_DIR / name, seed_override).to_json()
        same = first == second
        reproducible &= same
        status = "identical" if same else "DIFFERENT"
        print(f"{command:22s} {name:40s} {_digest(first)} {status}")
    return reproducible


def main(configs: list[str] | str | None = None, seed_override: int | None = None):
    """Exit with code 2 if any report differs between runs."""
    raise SystemExit(0 if check(configs, seed_override) else 2)


if __name__ == "__main__":
    logging.basicConfig(level=logging.WARNING)
    fire.Fire(main)
