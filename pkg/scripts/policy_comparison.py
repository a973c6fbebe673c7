"""Time-average peak-AoI of each policy against network size.

Writes one CSV row per (N, policy) with the analytic optimum alongside;
the probability vector for each N is drawn from --seed and recorded in the
file header.

    python3 scripts/policy_comparison.py --output results/policies.csv
"""
import argparse
import sys

from peakaoi.cli import main


def run(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sizes", default="2,4,6,8,10,12,14,16,18,20")
    ap.add_argument("--policies", default="ma,mw,pf,rp")
    ap.add_argument("--slots", default="100000")
    ap.add_argument("--runs", default="100")
    ap.add_argument("--seed", default="0")
    ap.add_argument("--workers", default="4")
    ap.add_argument("--output", default="policy_comparison.csv")
    a = ap.parse_args(argv)
    return main(["sweep", "--policy", a.policies, "--sample-probs", "--sweep-n", a.sizes,
                 "--slots", a.slots, "--runs", a.runs, "--seed", a.seed,
                 "--workers", a.workers, "--output", a.output])


if __name__ == "__main__":
    sys.exit(run())
