"""EV over a grid of per-subspace rank and corruption fraction.

Four subspaces in R^p with n_k samples each; d is the total true rank.
Prints one tab-separated row per grid cell.
"""

import argparse
import time
import warnings

import numpy as np

from online_lrr import ColumnStream, ModelState, SolverParams, expressed_variance, make_dataset, run_stream


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--p", type=int, default=100)
    ap.add_argument("--nk", type=int, default=1000)
    ap.add_argument("--ranks", default="1,2,5,10", help="per-subspace ranks d_k")
    ap.add_argument("--rhos", default="0,0.1,0.2,0.3,0.4,0.5")
    ap.add_argument("--seed", type=int, required=True)
    args = ap.parse_args()
    ranks = [int(x) for x in args.ranks.split(",")]
    rhos = [float(x) for x in args.rhos.split(",")]
    print("d_k\trho\tev0\tev\tseconds")
    for dk in ranks:
        for rho in rhos:
            ds = make_dataset(args.p, [dk] * 4, [args.nk] * 4, rho=rho, seed=args.seed)
            d = min(4 * dk, args.p - 1)
            state = ModelState.initial(args.p, d, seed=args.seed + 1)
            L = ds.union_basis()
            start = time.perf_counter()
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", RuntimeWarning)
                ev0 = expressed_variance(state.D, L)
                rep = run_stream(ColumnStream(ds.Z), SolverParams.defaults_for(args.p, d), state)
                ev = expressed_variance(rep.state.D, L)
            print(f"{dk}\t{rho:g}\t{ev0:.4f}\t{ev:.4f}\t{time.perf_counter() - start:.1f}", flush=True)


if __name__ == "__main__":
    main()
