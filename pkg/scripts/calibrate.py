"""L1 distribution of the planted n=1e4, k=16 experiment over several seeds.

    python3 scripts/calibrate.py [--seeds 10] [--nodes 10000] [--balance progressive]

Prints one line per seed and a min/median/max summary; pass --json to dump the rows.
"""

import argparse
import json
import statistics

from graphsynth.experiment import ExperimentConfig, run_experiment
from graphsynth.matcher import BALANCE_RULES


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--seeds", type=int, default=10)
    ap.add_argument("--nodes", type=int, default=10_000)
    ap.add_argument("--values", type=int, default=16)
    ap.add_argument("--balance", choices=BALANCE_RULES, default="progressive")
    ap.add_argument("--json")
    args = ap.parse_args()

    rows = []
    for seed in range(args.seeds):
        rep = run_experiment(ExperimentConfig(nodes=args.nodes, values=args.values, seed=seed,
                                              balance=args.balance))
        ratio = rep.first_pair_observed / rep.first_pair_expected
        rows.append({"seed": seed, "l1": rep.l1_distance, "first_pair_ratio": ratio,
                     "seconds": rep.seconds})
        print(f"seed {seed:2d}  L1 {rep.l1_distance:.4f}  first pair {ratio:.3f}  {rep.seconds:.1f}s")

    l1 = [r["l1"] for r in rows]
    print(f"L1 min {min(l1):.4f}  median {statistics.median(l1):.4f}  max {max(l1):.4f}")
    if args.json:
        with open(args.json, "w") as fh:
            json.dump(rows, fh, indent=2)


if __name__ == "__main__":
    main()
