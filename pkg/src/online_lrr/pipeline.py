"""Stream drivers: the plain online solver and the fully online clustering variant."""

from __future__ import annotations

import time
from collections.abc import Iterable
from dataclasses import dataclass, field

import numpy as np

from .metrics import expressed_variance, surrogate_value
from .model import KMeansState, ModelState, SampleCode, SolverParams, lambda3_at
from .solver import olrsc_step


class ColumnStream:
    """Re-iterable (z, y) pairs over the columns of Z; y defaults to z."""

    def __init__(self, Z, Y=None):
        self.Z = np.asarray(Z, dtype=float)
        self.Y = self.Z if Y is None else np.asarray(Y, dtype=float)
        if self.Y.shape != self.Z.shape:
            raise ValueError(f"Z is {self.Z.shape} but Y is {self.Y.shape}")

    def __len__(self):
        return self.Z.shape[1]

    def __iter__(self):
        for i in range(self.Z.shape[1]):
            yield self.Z[:, i], self.Y[:, i]


@dataclass
class RunReport:
    state: ModelState
    codes: list | None = None
    checkpoints: list = field(default_factory=list)
    assignments: np.ndarray | None = None
    kmeans: KMeansState | None = None
    timings: dict = field(default_factory=dict)
    drift: np.ndarray | None = None
    surrogate: np.ndarray | None = None
    n_nonconverged: int = 0
    peak_live_elements: int = 0


def code_features(v: np.ndarray, kind: str = "raw") -> np.ndarray:
    """Vector fed to k-means for one code.

    ``raw`` is v itself.  ``projector`` is the flattened outer product of v/||v||,
    which is invariant to sign and scale and so separates linear subspaces
    whose codes are symmetric about the origin.
    """
    if kind == "raw":
        return v
    if kind == "projector":
        nv = float(np.linalg.norm(v))
        if nv == 0:
            return np.zeros(v.size * v.size)
        w = v / nv
        return np.outer(w, w).ravel()
    raise ValueError(f"unknown feature map {kind!r}")


def kmeans_step(km: KMeansState, x) -> tuple[KMeansState, int]:
    """Assign x to its nearest centroid (lowest index on ties) and update the running mean."""
    x = np.asarray(x, dtype=float)
    seeded = km.k - km.pending
    if km.pending and not any(np.array_equal(x, km.C[:, j]) for j in range(seeded)):
        o = seeded
        km.C[:, o] = x
        km.r[o] = 1
        km.pending -= 1
        return km, o
    C = km.C[:, :seeded]
    dist = np.sum((C - x[:, None]) ** 2, axis=0)
    o = int(np.argmin(dist))
    km.r[o] += 1
    r = km.r[o]
    km.C[:, o] = ((r - 1) / r) * km.C[:, o] + (1.0 / r) * x
    return km, o


def _check_epochs(samples, epochs):
    if epochs < 1:
        raise ValueError("epochs must be >= 1")
    if epochs > 1 and iter(samples) is samples:
        raise TypeError("multiple epochs need a re-iterable sample source, not a one-shot iterator")


def _drive(samples, params, state, seed, epochs, checkpoints, truth_basis, log_codes,
           track_drift, track_surrogate, on_code):
    _check_epochs(samples, epochs)
    checkpoints = frozenset(int(c) for c in (checkpoints or ()))
    report = RunReport(state=state)
    if log_codes:
        report.codes = []
    drift, surr = [], []
    t_solve = t_metric = t_cb = 0.0
    for epoch in range(epochs):
        final = epoch == epochs - 1
        for i, (z, y) in enumerate(samples):
            z = np.asarray(z, dtype=float)
            y = np.asarray(y, dtype=float)
            if report.state is None:
                params.check_dim(z.shape[0])
                report.state = ModelState.initial(z.shape[0], params.d, seed=seed)
            st = report.state
            if z.shape != (st.p,) or y.shape != (st.p,):
                raise ValueError(f"sample {i} has shapes {z.shape}/{y.shape}, expected ({st.p},)")
            D_prev = st.D.copy() if track_drift else None
            t0 = time.perf_counter()
            st, code = olrsc_step(st, z, y, params)
            t_solve += time.perf_counter() - t0
            if not code.converged:
                report.n_nonconverged += 1
            if log_codes:
                report.codes.append(code)
            if track_drift:
                drift.append(st.t * float(np.linalg.norm(st.D - D_prev)))
            t0 = time.perf_counter()
            if track_surrogate:
                surr.append(surrogate_value(st, st.D, params.lambda1, params.lambda2,
                                            lambda3_at(params, st.t, st.p)))
            if st.t in checkpoints:
                report.checkpoints.append(checkpoint_row(st.copy(), params, truth_basis))
            t_metric += time.perf_counter() - t0
            if on_code is not None and final:
                t0 = time.perf_counter()
                on_code(code, st)
                t_cb += time.perf_counter() - t0
    report.timings = {"solver": t_solve, "metrics": t_metric, "clustering": t_cb}
    if track_drift:
        report.drift = np.array(drift)
    if track_surrogate:
        report.surrogate = np.array(surr)
    return report


def checkpoint_row(state: ModelState, params: SolverParams, truth_basis=None) -> dict:
    """Metrics row for the metrics table: t, EV (if ground truth known) and g_t(D_t)."""
    row = {"t": state.t, "ev": None, "g": None}
    if truth_basis is not None:
        row["ev"] = expressed_variance(state.D, truth_basis)
    if state.t > 0:
        row["g"] = surrogate_value(state, state.D, params.lambda1, params.lambda2,
                                   lambda3_at(params, state.t, state.p))
    return row


def run_stream(samples: Iterable, params: SolverParams, state: ModelState | None = None, *,
               seed=None, epochs: int = 1, checkpoints=(), truth_basis=None,
               log_codes: bool = False, track_drift: bool = False,
               track_surrogate: bool = False) -> RunReport:
    """Run the online solver over ``samples`` (pairs (z, y)) for ``epochs`` passes.

    Accumulators and the counter t carry over between epochs.  Without an
    explicit ``state`` one is initialized from the first sample's dimension
    and ``seed``.  ``checkpoints`` are global values of t.
    """
    if state is not None:
        params.check_dim(state.p)
    return _drive(samples, params, state, seed, epochs, checkpoints, truth_basis, log_codes,
                  track_drift, track_surrogate, None)


def run_fully_online(samples: Iterable, params: SolverParams, k: int,
                     state: ModelState | None = None, *, init_C=None, seed=None, epochs: int = 1,
                     features: str = "raw", checkpoints=(), truth_basis=None,
                     log_codes: bool = False) -> RunReport:
    """Online solver interleaved with streaming k-means on the codes.

    k-means sees the codes of the final epoch only.  Without ``init_C`` the
    first k distinct code features seed the centroids (``features`` picks the
    map from code to k-means input, see ``code_features``).
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    if state is not None:
        params.check_dim(state.p)
    km = None
    assignments = []
    peak = 0

    def on_code(code: SampleCode, st: ModelState):
        nonlocal km, peak
        x = code_features(code.v, features)
        if km is None:
            if init_C is not None:
                km = KMeansState.from_centroids(init_C)
                if km.C.shape != (x.size, k):
                    raise ValueError(f"init_C has shape {km.C.shape}, expected {(x.size, k)}")
            else:
                km = KMeansState.unseeded(x.size, k)
        km, o = kmeans_step(km, x)
        assignments.append(o)
        # solver state + centroids/counts + one sample in flight
        peak = max(peak, st.element_count() + km.C.size + km.r.size + st.p)

    report = _drive(samples, params, state, seed, epochs, checkpoints, truth_basis, log_codes,
                    False, False, on_code)
    report.assignments = np.array(assignments, dtype=np.int64)
    report.kmeans = km
    report.peak_live_elements = peak
    return report
