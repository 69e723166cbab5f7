"""Compare the five update rules on one victim at a fixed query budget.

Runs every optimizer variant for the same number of updates across
several seeds and prints mean / std final ASR.  Defaults use the blobs
victim so the whole comparison finishes in well under a minute.
"""

import argparse
import csv
import os
import sys

import numpy as np

from badge.attack import AttackConfig, run_attack
from badge.data import make_blobs
from badge.evaluate import asr
from badge.optim import VARIANTS
from badge.victim import QueryOracle, accuracy, train_victim


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--eps", type=float, default=60.0)
    parser.add_argument("--epochs", type=int, default=667,
                        help="667 epochs x 3 batches = 2001 updates")
    parser.add_argument("--seeds", type=int, default=5)
    parser.add_argument("--arch", default="mlp")
    parser.add_argument("--out", default=os.path.join("runs", "optimizers"))
    args = parser.parse_args()

    data = make_blobs(seed=0, n_per_class=200, n_classes=4, dim=16)
    victim = train_victim(args.arch, data, epochs=30, lr=0.1, seed=0)
    print("victim %s test acc %.4f" % (args.arch, accuracy(victim, data.test)))

    os.makedirs(args.out, exist_ok=True)
    rows = []
    for opt in VARIANTS:
        rates = []
        for seed in range(args.seeds):
            cfg = AttackConfig(optimizer=opt, eps=args.eps, epochs=args.epochs,
                               alpha_kind="cosine", alpha_start=65.0,
                               alpha_end=6.5, delta_kind="constant",
                               delta_start=10.0, shuffle_seed=seed,
                               direction_seed=seed)
            pert, trace = run_attack(cfg, QueryOracle(victim), data)
            rates.append(asr(QueryOracle(victim), data.test, pert))
        rows.append((opt, float(np.mean(rates)), float(np.std(rates)), rates))
        print("%-9s mean ASR %6.2f  std %5.2f  %s"
              % (opt, rows[-1][1], rows[-1][2],
                 " ".join("%.1f" % r for r in rates)))

    path = os.path.join(args.out, "summary.csv")
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["optimizer", "mean_asr", "std_asr", "n_seeds"])
        for opt, mean, std, rates in rows:
            writer.writerow([opt, repr(mean), repr(std), len(rates)])
    print("wrote %s" % path)
    return 0


if __name__ == "__main__":
    sys.exit(main())
