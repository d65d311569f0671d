import logging
from pathlib import Path

import fire
from pyinstrument import Profiler

from weaklearn.commands import run_command


def main(
    command: str = "proposition-contrast",
    config: str = "proposition_contrast.toml",
    browser: bool = False,
):
    logging.disable(logging.WARNING)
    path = Path(__file__).parents[1] / "config" / config
    profiler = Profiler()
    profiler.start()
    report = run_command(command, path)
    profiler.stop()
    profiler.print()
    print(f"Exit code {report.exit_code}")
    if browser:
        profiler.open_in_browser()


if __name__ == "__main__":
    fire.Fire(main)
