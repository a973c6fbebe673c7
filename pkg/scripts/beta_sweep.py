"""UE1 throughput and peak-AoI of the throughput-aware max-age rule against beta.

The same seed is used at every beta, so neighbouring points share random
numbers and the curve is smooth.

    python3 scripts/beta_sweep.py --output results/beta.csv
"""
import argparse
import sys

from peakaoi.cli import main


def run(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n-ues", default="20")
    ap.add_argument("--p1", default="0.8")
    ap.add_argument("--betas", default=",".join(f"1e{e}" for e in range(-2, 7)))
    ap.add_argument("--slots", default="100000")
    ap.add_argument("--runs", default="100")
    ap.add_argument("--seed", default="0")
    ap.add_argument("--workers", default="4")
    ap.add_argument("--output", default="beta_sweep.csv")
    a = ap.parse_args(argv)
    return main(["sweep", "--policy", "matp", "--sample-probs", "--n-ues", a.n_ues,
                 "--p1", a.p1, "--sweep-beta", a.betas, "--slots", a.slots,
                 "--runs", a.runs, "--seed", a.seed, "--workers", a.workers,
                 "--output", a.output])


if __name__ == "__main__":
    sys.exit(run())
