"""Recovery, clustering and loss quantities used to evaluate a run."""

from __future__ import annotations

import itertools
import warnings

import numpy as np
import scipy.linalg
from scipy.optimize import linear_sum_assignment

from .model import ModelState, SolverParams
from .solver import solve_ve

# exhaustive permutation search up to this many labels
_BRUTE_FORCE_MAX_K = 8


def expressed_variance(D, L) -> float:
    """tr(D D^T L L^T) / tr(L L^T) with the columns of D scaled to unit norm.

    Zero columns of D are dropped.  The value lies in [0, 1] when L has
    orthonormal columns and D has at most rank(L) columns, or orthonormal ones;
    otherwise it can exceed 1 and a warning is emitted.
    """
    D = np.asarray(D, dtype=float)
    L = np.asarray(L, dtype=float)
    denom = float(np.sum(L * L))
    if denom == 0:
        raise ValueError("ground-truth basis L is zero")
    norms = np.linalg.norm(D, axis=0)
    keep = norms > 0
    if not keep.any():
        return 0.0
    Dn = D[:, keep] / norms[keep]
    G = Dn.T @ L
    ev = float(np.sum(G * G)) / denom
    if ev > 1 + 1e-12:
        warnings.warn(f"expressed variance {ev:.4f} exceeds 1 (non-orthogonal basis columns)",
                      RuntimeWarning, stacklevel=2)
    return ev


def subspace_expressed_variance(D, L) -> float:
    """EV of the orthogonal projector onto range(D); always in [0, 1] for orthonormal L."""
    D = np.asarray(D, dtype=float)
    if not np.any(D):
        return 0.0
    Q = scipy.linalg.orth(D)
    G = Q.T @ np.asarray(L, dtype=float)
    return float(np.sum(G * G)) / float(np.sum(np.asarray(L) ** 2))


def contingency(pred, truth) -> np.ndarray:
    """Square count matrix C[i, j] = #{pred == i-th cluster, truth == j-th class}."""
    _, pi = np.unique(pred, return_inverse=True)
    _, ti = np.unique(truth, return_inverse=True)
    k = max(pi.max(), ti.max()) + 1
    C = np.zeros((k, k), dtype=np.int64)
    np.add.at(C, (pi, ti), 1)
    return C


def clustering_accuracy(pred, truth) -> float:
    """Best fraction of agreement over one-to-one cluster-to-class mappings."""
    pred = np.asarray(pred).ravel()
    truth = np.asarray(truth).ravel()
    if pred.size == 0:
        raise ValueError("empty label vectors")
    if pred.shape != truth.shape:
        raise ValueError(f"length mismatch: {pred.size} predictions, {truth.size} labels")
    C = contingency(pred, truth)
    k = C.shape[0]
    if k <= _BRUTE_FORCE_MAX_K:
        rows = np.arange(k)
        best = max(int(C[rows, list(perm)].sum()) for perm in itertools.permutations(range(k)))
    else:
        r, c = linear_sum_assignment(-C)
        best = int(C[r, c].sum())
    return best / pred.size


def point_loss(z, D, params: SolverParams):
    """min over (v, e) of the per-sample objective; returns (loss, v, e, converged)."""
    v, e, obj, converged, _ = solve_ve(z, D, params)
    return obj, v, e, converged


def grad_point_loss(z, D, params: SolverParams):
    """Gradient of the point loss in D: lambda1 (D v + e - z) v^T at the minimizer.

    Returns (gradient, converged).
    """
    v, e, _, converged, _ = solve_ve(z, D, params)
    return params.lambda1 * np.outer(D @ v + e - z, v), converged


def surrogate_value(state: ModelState, D, lambda1: float, lambda2: float, lambda3: float) -> float:
    """Quadratic surrogate g_t(D) with all past codes frozen, from O(pd) state."""
    if state.t == 0:
        raise ValueError("surrogate is undefined before the first sample")
    D = np.asarray(D, dtype=float)
    fit = state.s_ze + float(np.sum((D.T @ D) * state.A)) - 2.0 * float(np.sum(D * state.B))
    gap = D - state.M
    total = (0.5 * lambda1 * fit + 0.5 * state.s_v + lambda2 * state.s_e1
             + state.s_u + 0.5 * lambda3 * float(np.sum(gap * gap)))
    return total / state.t


def full_u_star(Y, D, lambda3: float) -> np.ndarray:
    """Exact minimizer U (n x d) of the u-part given D: rows D^T (I/lambda3 + N)^-1 y_i.

    Forms a p x p matrix; desk-scale use only.
    """
    Y = np.asarray(Y, dtype=float)
    D = np.asarray(D, dtype=float)
    p = Y.shape[0]
    K = np.eye(p) / lambda3 + Y @ Y.T
    W = scipy.linalg.solve(K, D, assume_a="pos")
    return Y.T @ W


def h_tilde(Y, D, U, lambda3: float) -> float:
    """sum 1/2 ||u_i||^2 + lambda3/2 ||D - Y U||_F^2."""
    gap = np.asarray(D) - np.asarray(Y) @ np.asarray(U)
    return 0.5 * float(np.sum(np.asarray(U) ** 2)) + 0.5 * lambda3 * float(np.sum(gap * gap))


def h_value(Y, D, lambda3: float) -> float:
    """Closed form of min_U h_tilde, written with the 1/n-normalized covariance."""
    Y = np.asarray(Y, dtype=float)
    D = np.asarray(D, dtype=float)
    p, n = Y.shape
    N = Y @ Y.T
    K1 = np.eye(p) / (lambda3 * n) + N / n
    W1 = scipy.linalg.solve(K1, Y, assume_a="pos")
    first = 0.5 * float(np.sum((D.T @ W1) ** 2)) / n ** 2
    K2 = np.eye(p) / n + lambda3 * N / n
    W2 = scipy.linalg.solve(K2, D, assume_a="pos")
    second = lambda3 / (2.0 * n ** 2) * float(np.sum(W2 * W2))
    return first + second


def empirical_loss(Z, Y, D, params: SolverParams, lambda3: float) -> float:
    """f_n(D) = mean point loss + h(Y, D) / n (forms p x p matrices)."""
    Z = np.asarray(Z, dtype=float)
    n = Z.shape[1]
    if n == 0:
        raise ValueError("empirical loss needs at least one sample")
    losses = [point_loss(Z[:, i], D, params)[0] for i in range(n)]
    return float(np.mean(losses)) + h_value(Y, D, lambda3) / n
