from __future__ import annotations

import fire
import numpy as np
from pipelines import time_command, time_fisher, time_halfspace

# Command and config of every timed pipeline
PIPELINES = {
    "verify-theorem1": "atoms_xsq_relu.toml",
    "verify-theorem2": "linear_3atoms.toml",
    "fisher-audit": "fisher_logistic_gaussian.toml",
    "proposition-contrast": "proposition_contrast.toml",
}


def print_benchmark_results(name: str, timings: list[float]):
    print(f"\nResults for {name}:")
    print(f"Mean/std: {np.mean(timings):.2e}s +- {np.std(timings):.2e}s")
    print(f"Min time: {np.min(timings):.2e}s")
    print(f"Max time: {np.max(timings):.2e}s")


def main(
    n_tests: int = 3,
    number: int = 1,
    commands: bool = True,
    components: bool = True,
    dim: int = 1,
    n_samples: int = 100_000,
):
    if components:
        timings = time_halfspace(dim=dim, n_samples=n_samples, n_tests=n_tests, number=number)
        print_benchmark_results(f"Half-space search (p={dim}, n={n_samples})", timings / number)
        timings = time_fisher(n_tests=n_tests, number=10 * number)
        print_benchmark_results("Fisher information", timings / (10 * number))
    if commands:
        for command, config in PIPELINES.items():
            timings = time_command(command, config, n_tests=n_tests, number=number)
            print_benchmark_results(f"{command} on {config}", timings / number)


if __name__ == "__main__":
    fire.Fire(main)
