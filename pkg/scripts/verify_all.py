"""Run the three verification subcommands on their reference instances.

Exit status is nonzero if any check fails.
"""
import sys

from peakaoi.cli import main

RUNS = [
    ["verify-bellman", "--probs", "0.5,0.25,0.2", "--samples", "1000", "--beta", "10"],
    ["verify-oracle", "--probs", "0.5,0.5", "--h-max", "60"],
    ["verify-oracle", "--probs", "0.8,0.4", "--h-max", "80"],
    ["verify-bounds", "--probs", "0.5,0.5", "--slots", "1000000", "--runs", "10",
     "--workers", "4"],
]


def run():
    worst = 0
    for argv in RUNS:
        print("$ peakaoi", " ".join(argv))
        worst = max(worst, main(argv))
    return worst


if __name__ == "__main__":
    sys.exit(run())
