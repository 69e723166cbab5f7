"""Cross-victim transferability: attack several victims, evaluate every
perturbation against every victim, print the ASR matrix.

Rows are the source victim a perturbation was trained on, columns the
victim it is evaluated against.
"""

import argparse
import os
import sys

from badge.attack import AttackConfig, run_attack
from badge.data import make_blobs
from badge.evaluate import transfer_matrix, write_matrix_csv
from badge.victim import QueryOracle, accuracy, train_victim

ARCH_SETUPS = (("linear", 30), ("mlp", 30), ("cnn", 15))


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--eps", type=float, default=60.0)
    parser.add_argument("--epochs", type=int, default=667)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--out", default=os.path.join("runs", "transfer"))
    args = parser.parse_args()

    # 64 pixels arrange into 8x8 images, the smallest the conv stack takes
    data = make_blobs(seed=0, n_per_class=200, n_classes=4, dim=64,
                      separation=6.0)
    victims, names = [], []
    for arch, epochs in ARCH_SETUPS:
        victim = train_victim(arch, data, epochs=epochs, lr=0.1, seed=0)
        print("victim %-6s test acc %.4f" % (arch, accuracy(victim, data.test)))
        victims.append(victim)
        names.append(arch)

    perts = []
    for name, victim in zip(names, victims):
        cfg = AttackConfig(eps=args.eps, epochs=args.epochs,
                           alpha_kind="cosine", alpha_start=65.0,
                           alpha_end=6.5, delta_kind="constant",
                           delta_start=10.0, shuffle_seed=args.seed,
                           direction_seed=args.seed)
        pert, _ = run_attack(cfg, QueryOracle(victim), data)
        perts.append(pert)

    matrix = transfer_matrix(victims, perts, data.test)
    os.makedirs(args.out, exist_ok=True)
    path = os.path.join(args.out, "matrix.csv")
    write_matrix_csv(path, matrix, names, names)

    width = max(len(n) for n in names)
    print(" " * (width + 2) + "  ".join("%8s" % n for n in names))
    for name, row in zip(names, matrix):
        print("%-*s  %s" % (width + 1, name,
                            "  ".join("%8.2f" % v for v in row)))
    print("wrote %s" % path)
    return 0


if __name__ == "__main__":
    sys.exit(main())
