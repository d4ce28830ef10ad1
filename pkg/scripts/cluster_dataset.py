"""Fully online clustering of a `label index:value` file with d = 5k.

Reports accuracy for each feature map next to the majority-class rate.
"""

import argparse
import time

import numpy as np

from online_lrr import ColumnStream, SolverParams, clustering_accuracy, run_fully_online
from online_lrr.experiment import scale_columns
from online_lrr.io import read_sparse_dataset


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("path")
    ap.add_argument("--k", type=int, help="default: number of distinct labels")
    ap.add_argument("--epochs", type=int, default=2)
    ap.add_argument("--scale", action="store_true", help="rescale samples to unit max-norm")
    ap.add_argument("--features", default="raw,projector")
    ap.add_argument("--seed", type=int, required=True)
    args = ap.parse_args()
    Z, labels, _ = read_sparse_dataset(args.path)
    if args.scale:
        Z = scale_columns(Z)
    p, n = Z.shape
    k = args.k or len(np.unique(labels))
    d = min(5 * k, p - 1)
    print(f"p={p} n={n} k={k} d={d} majority={np.bincount(labels).max() / n:.4f}")
    for kind in args.features.split(","):
        start = time.perf_counter()
        rep = run_fully_online(ColumnStream(Z), SolverParams.defaults_for(p, d), k, seed=args.seed,
                               epochs=args.epochs, features=kind)
        acc = clustering_accuracy(rep.assignments, labels)
        print(f"{kind}\taccuracy {acc:.4f}\t{time.perf_counter() - start:.1f}s", flush=True)


if __name__ == "__main__":
    main()
