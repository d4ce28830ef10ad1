"""Fast invariant checks behind `online-lrr selftest`."""

from __future__ import annotations

import tempfile
from pathlib import Path

import numpy as np

from .metrics import clustering_accuracy, expressed_variance
from .model import ModelState, SolverParams
from .pipeline import ColumnStream, run_stream
from .solver import (soft_threshold, solve_ve, update_basis_bcd, update_basis_closed,
                     ve_fixed_point_residual)
from .synth import make_dataset


def _soft_threshold():
    out = soft_threshold([3.0, -0.5, 0.0], 1.0)
    return np.array_equal(out, [2.0, 0.0, 0.0]), f"S_1([3,-0.5,0]) = {out.tolist()}"


def _ve_fixed_point():
    rng = np.random.default_rng(0)
    params = SolverParams(lambda1=1.0, lambda2=0.35, d=3)
    worst = 0.0
    for _ in range(20):
        D = rng.standard_normal((8, 3))
        z = rng.standard_normal(8) * 2
        v, e, _, _, _ = solve_ve(z, D, params)
        worst = max(worst, ve_fixed_point_residual(z, D, v, e, 1.0, 0.35))
    return worst < 1e-7, f"max fixed-point residual {worst:.2e}"


def _bcd_matches_closed():
    rng = np.random.default_rng(1)
    V = rng.standard_normal((50, 5))
    A, B, M = V.T @ V, rng.standard_normal((20, 5)), rng.standard_normal((20, 5))
    D = update_basis_bcd(np.zeros((20, 5)), A, B, M, 1.0, 0.5, passes=500)
    err = float(np.linalg.norm(D - update_basis_closed(A, B, M, 1.0, 0.5)))
    return err < 1e-8, f"||D_bcd - D_closed||_F = {err:.2e}"


def _accuracy_permutation():
    truth = np.arange(30) % 3
    acc = clustering_accuracy((truth + 1) % 3, truth)
    return acc == 1.0, f"relabelled accuracy {acc}"


def _snapshot_roundtrip():
    st = ModelState.initial(6, 2, seed=3)
    st.A[:] = [[2.0, 1.0], [1.0, 3.0]]
    st.t, st.s_u = 7, 0.25
    with tempfile.TemporaryDirectory() as tmp:
        path = Path(tmp) / "s.bin"
        st.save(path)
        back = ModelState.load(path)
    ok = all(np.array_equal(getattr(st, k), getattr(back, k)) for k in ("D", "M", "A", "B"))
    ok = ok and (back.t, back.s_u) == (7, 0.25)
    return ok, "state snapshot round trip"


def _small_recovery():
    ds = make_dataset(40, [2, 2], [300, 300], 0.0, seed=5)
    params = SolverParams.defaults_for(40, 4)
    rep = run_stream(ColumnStream(ds.Z), params, seed=5)
    ev = expressed_variance(rep.state.D, ds.union_basis())
    return ev > 0.9, f"EV after 600 samples {ev:.4f}"


CHECKS = {
    "soft_threshold": _soft_threshold,
    "solve_ve_fixed_point": _ve_fixed_point,
    "bcd_vs_closed_form": _bcd_matches_closed,
    "accuracy_permutation": _accuracy_permutation,
    "state_roundtrip": _snapshot_roundtrip,
    "small_recovery": _small_recovery,
}


def run_all():
    for name, fn in CHECKS.items():
        try:
            ok, detail = fn()
        except Exception as exc:  # report, do not abort the remaining checks
            ok, detail = False, f"raised {exc!r}"
        yield name, bool(ok), detail
