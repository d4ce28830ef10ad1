"""EV and surrogate value against the number of processed samples."""

import argparse
import warnings

from online_lrr import ColumnStream, SolverParams, make_dataset, run_stream


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--p", type=int, default=100)
    ap.add_argument("--dims", default="5,5,5,5")
    ap.add_argument("--nk", type=int, default=1000)
    ap.add_argument("--rho", type=float, default=0.1)
    ap.add_argument("--d", type=int, help="rank budget (default: total true rank)")
    ap.add_argument("--every", type=int, default=200)
    ap.add_argument("--epochs", type=int, default=1)
    ap.add_argument("--seed", type=int, required=True)
    args = ap.parse_args()
    dims = [int(x) for x in args.dims.split(",")]
    ds = make_dataset(args.p, dims, [args.nk] * len(dims), rho=args.rho, seed=args.seed)
    d = args.d or sum(dims)
    total = ds.n * args.epochs
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        rep = run_stream(ColumnStream(ds.Z), SolverParams.defaults_for(args.p, d), seed=args.seed + 1,
                         epochs=args.epochs, checkpoints=range(args.every, total + 1, args.every),
                         truth_basis=ds.union_basis())
    print("t\tev\tg")
    for row in rep.checkpoints:
        print(f"{row['t']}\t{row['ev']:.4f}\t{row['g']:.6f}")


if __name__ == "__main__":
    main()
