"""Final EV as the rank budget d moves below and above the true rank."""

import argparse
import warnings

from online_lrr import (ColumnStream, SolverParams, expressed_variance, make_dataset, run_stream,
                        subspace_expressed_variance)


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--p", type=int, default=200)
    ap.add_argument("--dk", type=int, default=10)
    ap.add_argument("--nk", type=int, default=1000)
    ap.add_argument("--rho", type=float, default=0.0)
    ap.add_argument("--budgets", default="10,20,30,40,50,60")
    ap.add_argument("--seed", type=int, required=True)
    args = ap.parse_args()
    ds = make_dataset(args.p, [args.dk] * 4, [args.nk] * 4, rho=args.rho, seed=args.seed)
    L = ds.union_basis()
    print(f"true rank {L.shape[1]}")
    print("d\tev\tev_subspace")
    for d in (int(x) for x in args.budgets.split(",")):
        rep = run_stream(ColumnStream(ds.Z), SolverParams.defaults_for(args.p, d), seed=args.seed + 1)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            ev = expressed_variance(rep.state.D, L)
        print(f"{d}\t{ev:.4f}\t{subspace_expressed_variance(rep.state.D, L):.4f}", flush=True)


if __name__ == "__main__":
    main()
