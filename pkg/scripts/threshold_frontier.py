"""Acceptance vs violation for simple threshold policies.

Admits a job iff the total number in system is at most K and reports the
final-window metrics for each K. Gives a policy-independent picture of what
trade-offs the network allows at the configured deadline.

    python scripts/threshold_frontier.py --config tandem --kmax 12
"""

import argparse
import csv
import sys
from dataclasses import replace

from qadmit import config as cfgio
from qadmit.harness import aggregate_final, run_policy


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--config", default="tandem")
    ap.add_argument("--kmax", type=int, default=12)
    ap.add_argument("--steps", type=int, default=100_000)
    ap.add_argument("--d-ub", type=float, help="override the deadline")
    args = ap.parse_args(argv)

    cfg = cfgio.load(args.config)
    cfg = replace(cfg, steps=args.steps, warmup=args.steps // 10, window=min(cfg.window, args.steps // 10))
    if args.d_ub:
        cfg = replace(cfg, reward=replace(cfg.reward, d_ub=args.d_ub))
    w = csv.writer(sys.stdout, lineterminator="\n")
    w.writerow(["K", "acceptance_rate", "p_violation_accept", "objective", "goodput"])
    for k in range(args.kmax + 1):
        runs = [run_policy(cfg, lambda s, k=k: 0 if sum(s) <= k else 1, seed) for seed in cfg.seeds]
        a = aggregate_final(runs)
        w.writerow([k] + [f"{a[c]:.4f}" for c in ("acceptance_rate", "p_violation_accept", "objective", "goodput")])


if __name__ == "__main__":
    main()
