"""Compare attack losses under both feedback modes on one victim.

Decision mode only ever sees one-hot rows, so this is where the choice
of loss matters most; score mode is included for reference.  Prints
mean / std final ASR per (mode, loss) cell.
"""

import argparse
import csv
import os
import sys

import numpy as np

from badge.attack import AttackConfig, run_attack
from badge.data import make_blobs
from badge.evaluate import asr
from badge.victim import QueryOracle, accuracy, train_victim

CELLS = (
    ("decision", "acc"),
    ("decision", "kld"),
    ("decision", "emd"),
    ("score", "acc"),
    ("score", "ce"),
    ("score", "kld"),
)


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--eps", type=float, default=60.0)
    parser.add_argument("--epochs", type=int, default=667)
    parser.add_argument("--seeds", type=int, default=3)
    parser.add_argument("--out", default=os.path.join("runs", "losses"))
    args = parser.parse_args()

    data = make_blobs(seed=0, n_per_class=200, n_classes=4, dim=16)
    victim = train_victim("mlp", data, epochs=30, lr=0.1, seed=0)
    print("victim mlp test acc %.4f" % accuracy(victim, data.test))

    os.makedirs(args.out, exist_ok=True)
    rows = []
    for mode, loss in CELLS:
        rates = []
        for seed in range(args.seeds):
            cfg = AttackConfig(mode=mode, loss=loss, eps=args.eps,
                               epochs=args.epochs, alpha_kind="cosine",
                               alpha_start=65.0, alpha_end=6.5,
                               delta_kind="constant", delta_start=10.0,
                               shuffle_seed=seed, direction_seed=seed)
            pert, _ = run_attack(cfg, QueryOracle(victim, mode), data)
            rates.append(asr(QueryOracle(victim), data.test, pert))
        rows.append((mode, loss, float(np.mean(rates)), float(np.std(rates))))
        print("%-8s %-6s mean ASR %6.2f  std %5.2f"
              % (mode, loss, rows[-1][2], rows[-1][3]))

    path = os.path.join(args.out, "summary.csv")
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["mode", "loss", "mean_asr", "std_asr"])
        for row in rows:
            writer.writerow([row[0], row[1], repr(row[2]), repr(row[3])])
    print("wrote %s" % path)
    return 0


if __name__ == "__main__":
    sys.exit(main())
