"""Sweep the perturbation budget and report mean ASR per budget.

Defaults run on the synthetic blobs victim in seconds.  With
--data mnist --mnist-dir data/mnist it reproduces the full-size curve
(20,000 updates per attack; expect tens of minutes per budget).
"""

import argparse
import os
import sys

from badge.attack import AttackConfig
from badge.data import load_mnist, make_blobs
from badge.evaluate import budget_sweep, write_report_csv
from badge.victim import accuracy, train_victim

MNIST_NAMES = ("train-images-idx3-ubyte", "train-labels-idx1-ubyte",
               "t10k-images-idx3-ubyte", "t10k-labels-idx1-ubyte")


def find_mnist(directory):
    paths = []
    for name in MNIST_NAMES:
        for candidate in (name, name + ".gz"):
            path = os.path.join(directory, candidate)
            if os.path.exists(path):
                paths.append(path)
                break
        else:
            raise FileNotFoundError("missing %s(.gz) under %s" % (name, directory))
    return paths


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--data", choices=("blobs", "mnist"), default="blobs")
    parser.add_argument("--mnist-dir")
    parser.add_argument("--budgets", default=None,
                        help="comma-separated eps list; sensible default per dataset")
    parser.add_argument("--seeds", default="0,1,2")
    parser.add_argument("--jobs", type=int, default=1)
    parser.add_argument("--out", default=os.path.join("runs", "budget_sweep"))
    args = parser.parse_args()

    if args.data == "blobs":
        budgets = args.budgets or "20,40,60,80"
        data = make_blobs(seed=0, n_per_class=200, n_classes=4, dim=16)
        victim = train_victim("mlp", data, epochs=30, lr=0.1, seed=0)
        cfg = AttackConfig(epochs=667, alpha_kind="cosine", alpha_start=65.0,
                           alpha_end=6.5, delta_kind="constant",
                           delta_start=10.0)
    else:
        if not args.mnist_dir:
            parser.error("--data mnist needs --mnist-dir")
        budgets = args.budgets or "10,33.42,56.84,75.57,99"
        data = load_mnist(*find_mnist(args.mnist_dir))
        victim = train_victim("cnn", data, epochs=3, lr=0.1, seed=0)
        # 500 epochs over a 10k-image subset at batch 256 = 20,000 updates
        cfg = AttackConfig(train_limit=10000, epochs=500, alpha_kind="cosine",
                           alpha_start=65.0, alpha_end=1.0,
                           delta_kind="constant", delta_start=10.0)

    print("victim test acc %.4f" % accuracy(victim, data.test))
    budget_list = [float(tok) for tok in budgets.split(",") if tok]
    seed_list = [int(tok) for tok in args.seeds.split(",") if tok]

    os.makedirs(args.out, exist_ok=True)
    results, summary = budget_sweep(cfg, budget_list, seed_list, victim, data,
                                    jobs=args.jobs)
    write_report_csv(os.path.join(args.out, "report.csv"),
                     [rep for _, rep in results])
    with open(os.path.join(args.out, "summary.csv"), "w") as fh:
        fh.write("eps,mean_asr,std_asr,n\n")
        for eps, mean, std, n in summary:
            fh.write("%g,%r,%r,%d\n" % (eps, mean, std, n))
    for eps, mean, std, n in summary:
        print("eps=%-6g mean ASR %6.2f  std %5.2f  (%d runs)"
              % (eps, mean, std, n))
    print("wrote %s" % os.path.join(args.out, "summary.csv"))
    return 0


if __name__ == "__main__":
    sys.exit(main())
