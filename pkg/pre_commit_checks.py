"""This is an auxiliary script that can be executed before a git commit. It runs
the tests using `pytest`, the formatters `black` and `isort` and a small
benchmark through the command line interface, which must exit with code 0.
"""

import subprocess
import sys

RUN_TESTS = True
RUN_FORMATTERS = True
RUN_BENCH = True

BENCH_CMD = [
    sys.executable,
    "-m",
    "kicq.cli",
    "bench",
    "--n-vertices",
    "300",
    "--n-edges",
    "900",
    "--queries",
    "5",
    "--format",
    "records",
]

if __name__ == "__main__":

    # Tests
    if RUN_TESTS:
        print("\nRunning tests...")
        subprocess.run(["pytest", "tests"])

    # Formatters
    if RUN_FORMATTERS:
        print("\nRunning formatters...")
        subprocess.run(["black", "."])
        subprocess.run(["isort", "."])

    # Benchmark smoke run
    if RUN_BENCH:
        print("\nRunning benchmark...")
        completed_process = subprocess.run(
            BENCH_CMD, stdout=subprocess.DEVNULL, stderr=subprocess.DEVNULL
        )
        completed_process.check_returncode()
