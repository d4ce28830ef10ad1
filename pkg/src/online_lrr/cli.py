"""Command line entry point: synth, fit, cluster, eval, selftest."""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import io
from .experiment import ExperimentConfig, format_summary, run_experiment, solver_params
from .metrics import clustering_accuracy, empirical_loss, expressed_variance, subspace_expressed_variance
from .model import ModelState, lambda3_at
from .synth import make_dataset


def _int_list(text: str) -> list:
    try:
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _add_synth_args(ap, required_seed=True):
    ap.add_argument("--p", type=int, default=100)
    ap.add_argument("--dims", type=_int_list, default=[5, 5, 5, 5])
    ap.add_argument("--counts", type=_int_list, default=[1000, 1000, 1000, 1000])
    ap.add_argument("--rho", type=float, default=0.0)
    ap.add_argument("--seed", type=int, required=required_seed)


def _add_solver_args(ap):
    ap.add_argument("--config", help="key = value file with ExperimentConfig fields; flags override it")
    ap.add_argument("--data", help="synth output directory or sparse `label index:value` file")
    ap.add_argument("--d", type=int, help="rank budget (default: total true rank, or 5k for clustering)")
    ap.add_argument("--lambda1", type=float)
    ap.add_argument("--lambda2", type=float, help="default 1/sqrt(p)")
    ap.add_argument("--lambda3", type=float, help="fixed value; default schedule sqrt(t/p)")
    ap.add_argument("--epochs", type=int)
    ap.add_argument("--basis-update", choices=("bcd", "closed"))
    ap.add_argument("--bcd-passes", type=int)
    ap.add_argument("--checkpoint-every", type=int)
    ap.add_argument("--scale", action="store_true", default=None,
                    help="rescale each sample to unit max-norm")
    ap.add_argument("--out", help="output directory (default $ONLINE_LRR_OUTDIR or ./runs)")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="online-lrr", description=__doc__)
    sub = ap.add_subparsers(dest="command", required=True)

    s = sub.add_parser("synth", help="write a union-of-subspaces dataset")
    _add_synth_args(s)
    s.add_argument("--out", required=True)

    for name, helptext in (("fit", "learn a basis; write state and EV checkpoints"),
                           ("cluster", "fully online clustering; write assignments and accuracy")):
        f = sub.add_parser(name, help=helptext)
        _add_synth_args(f, required_seed=False)
        f.set_defaults(p=None, dims=None, counts=None, rho=None)
        _add_solver_args(f)
        if name == "cluster":
            f.add_argument("--k", type=int, help="number of clusters (default: number of labels)")
            f.add_argument("--features", choices=("raw", "projector"))

    e = sub.add_parser("eval", help="metrics on saved artifacts")
    e.add_argument("--state", help="model state file")
    e.add_argument("--basis", help="ground-truth basis matrix")
    e.add_argument("--assignments", help="predicted labels file")
    e.add_argument("--labels", help="true labels file")
    e.add_argument("--data", help="matrix file for the empirical loss (desk scale)")
    e.add_argument("--lambda1", type=float, default=1.0)
    e.add_argument("--lambda2", type=float)
    e.add_argument("--lambda3", type=float, help="default sqrt(t/p) at the state's t")

    sub.add_parser("selftest", help="run quick invariant checks")
    return ap


def _config_from_args(args, mode) -> ExperimentConfig:
    base = io.read_config(args.config, ExperimentConfig) if args.config else None
    kw = dataclasses.asdict(base) if base else {}
    flags = {
        "seed": args.seed, "p": args.p, "dims": args.dims, "counts": args.counts, "rho": args.rho,
        "data": args.data, "d": args.d, "lambda1": args.lambda1, "lambda2": args.lambda2,
        "lambda3": args.lambda3, "epochs": args.epochs, "basis_update": args.basis_update,
        "bcd_passes": args.bcd_passes, "checkpoint_every": args.checkpoint_every,
        "scale": args.scale, "out": args.out,
        "k": getattr(args, "k", None), "features": getattr(args, "features", None),
    }
    kw.update({k: v for k, v in flags.items() if v is not None})
    if mode == "cluster":
        kw["mode"] = "file-cluster" if kw.get("data") else "synth-cluster"
        kw.setdefault("epochs", 2)
    else:
        kw["mode"] = "synth-recovery"
    return ExperimentConfig(**kw)


def cmd_synth(args) -> int:
    ds = make_dataset(args.p, args.dims, args.counts, args.rho, seed=args.seed)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    io.write_matrix(out / "Z.bin", ds.Z)
    io.write_matrix(out / "clean.bin", ds.Z_clean)
    io.write_matrix(out / "mask.bin", ds.mask.astype(float))
    io.write_matrix(out / "basis.bin", ds.union_basis())
    io.write_labels(out / "labels.txt", ds.labels)
    meta = {"p": args.p, "dims": args.dims, "counts": args.counts, "rho": args.rho, "seed": args.seed,
            "n": ds.n, "corrupted": int(ds.mask.sum())}
    (out / "meta.json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
    print(f"wrote {ds.p}x{ds.n} dataset ({meta['corrupted']} corrupted entries) to {out}")
    return 0


def cmd_run(args, mode) -> int:
    cfg = _config_from_args(args, mode)
    start = time.perf_counter()
    summary = run_experiment(cfg)
    elapsed = time.perf_counter() - start
    report = summary["report"]
    sys.stdout.write(format_summary(summary))
    timings = ", ".join(f"{k} {v:.2f}s" for k, v in report.timings.items())
    print(f"elapsed {elapsed:.2f}s ({timings}); outputs in {cfg.output_dir()}")
    return 0


def cmd_eval(args) -> int:
    did = False
    state = ModelState.load(args.state) if args.state else None
    if state is not None and args.basis:
        L = io.read_matrix(args.basis)
        print(f"ev: {expressed_variance(state.D, L):.6f}")
        print(f"ev_subspace: {subspace_expressed_variance(state.D, L):.6f}")
        did = True
    if args.assignments and args.labels:
        acc = clustering_accuracy(io.read_labels(args.assignments), io.read_labels(args.labels))
        print(f"accuracy: {acc:.6f}")
        did = True
    if state is not None and args.data:
        Z = io.read_matrix(args.data)
        cfg = ExperimentConfig(seed=0, lambda1=args.lambda1, lambda2=args.lambda2, lambda3=args.lambda3)
        params = solver_params(cfg, state.p, state.d)
        lam3 = args.lambda3 if args.lambda3 is not None else lambda3_at(params, max(state.t, 1), state.p)
        print(f"empirical_loss: {empirical_loss(Z, Z, state.D, params, lam3):.6f}")
        did = True
    if not did:
        print("eval: nothing to evaluate (need --state with --basis/--data, or --assignments with --labels)",
              file=sys.stderr)
        return 2
    return 0


def cmd_selftest(args) -> int:
    from .selftest import run_all

    failures = 0
    for name, ok, detail in run_all():
        print(f"{'PASS' if ok else 'FAIL'} {name}: {detail}")
        failures += not ok
    return 1 if failures else 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "synth":
            return cmd_synth(args)
        if args.command in ("fit", "cluster"):
            return cmd_run(args, args.command)
        if args.command == "eval":
            return cmd_eval(args)
        return cmd_selftest(args)
    except (ValueError, OSError, TypeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
