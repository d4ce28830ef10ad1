"""Per-sample kernels and basis updates of the online solver.

One step of the stream: solve the coefficient/error pair (v, e) against the
current basis, take the closed-form row u of U, fold the sample into the
accumulators and refresh the basis by minimizing the quadratic surrogate.
"""

from __future__ import annotations

import logging
import warnings

import numpy as np
import scipy.linalg

from .model import ModelState, SampleCode, SolverParams, lambda3_at

_logger = logging.getLogger(__name__)

# Armijo constant and smallest backtracking step of the Newton v-step
_ARMIJO = 1e-4
_MIN_STEP = 2.0 ** -30


class DegenerateColumnWarning(RuntimeWarning):
    """A basis column was skipped because its diagonal curvature vanished."""


def soft_threshold(x, tau: float) -> np.ndarray:
    """Elementwise sign(x) * max(|x| - tau, 0)."""
    if tau < 0:
        raise ValueError(f"threshold must be nonnegative, got {tau}")
    x = np.asarray(x, dtype=float)
    return np.sign(x) * np.maximum(np.abs(x) - tau, 0.0)


def ve_objective(z, D, v, e, lambda1: float, lambda2: float) -> float:
    """lambda1/2 ||z - D v - e||^2 + 1/2 ||v||^2 + lambda2 ||e||_1."""
    r = z - D @ v - e
    return 0.5 * lambda1 * float(r @ r) + 0.5 * float(v @ v) + lambda2 * float(np.abs(e).sum())


def _marginal(z, D, v, lambda1, tau):
    # objective with e minimized out: a Huber penalty on the residual z - D v
    x = z - D @ v
    a = np.abs(x)
    hub = np.where(a <= tau, 0.5 * x * x, tau * a - 0.5 * tau * tau)
    return 0.5 * float(v @ v) + lambda1 * float(hub.sum()), x


def _newton_v_step(z, D, v, lambda1, tau):
    """One damped Newton step on the Huber marginal of the (v, e) problem.

    The marginal is strongly convex and piecewise quadratic in v, so the
    backtracked step never increases the objective and converges in a handful
    of iterations even when D has large singular values (where the plain
    alternation crawls).
    """
    f, x = _marginal(z, D, v, lambda1, tau)
    g = v - lambda1 * (D.T @ np.clip(x, -tau, tau))
    quad = np.abs(x) < tau
    Dq = D[quad]
    H = np.eye(D.shape[1]) + lambda1 * (Dq.T @ Dq)
    dv = -scipy.linalg.solve(H, g, assume_a="pos")
    decrease = -float(g @ dv)
    if not decrease > 0:
        return v
    step = 1.0
    while step >= _MIN_STEP:
        cand = v + step * dv
        fc, _ = _marginal(z, D, cand, lambda1, tau)
        if fc <= f - _ARMIJO * step * decrease:
            return cand
        step *= 0.5
    return v


def ve_fixed_point_residual(z, D, v, e, lambda1: float, lambda2: float) -> float:
    """max(||v - ridge(e)||_inf, ||e - soft(z - D v)||_inf)."""
    d = D.shape[1]
    G = np.eye(d) / lambda1 + D.T @ D
    v_fp = scipy.linalg.solve(G, D.T @ (z - e), assume_a="pos")
    e_fp = soft_threshold(z - D @ v, lambda2 / lambda1)
    return max(float(np.max(np.abs(v - v_fp), initial=0.0)), float(np.max(np.abs(e - e_fp), initial=0.0)))


def solve_ve(z, D, params: SolverParams, trace: list | None = None):
    """Minimize the per-sample objective over (v, e) with D held fixed.

    Block coordinate minimization starting from e = 0: a ridge v-step, then a
    soft-thresholding e-step.  With ``params.ve_newton`` each sweep is followed
    by a damped Newton v-step on the e-marginal and a matching e-step.  Every
    step is an exact or descent block update, so the objective never increases;
    pass a list as ``trace`` to collect it after each step.

    Returns
    -------
    v, e : ndarray
    obj : float
        Objective at the returned pair.
    converged : bool
        False when the iteration cap was hit with fixed-point residual above
        10 * ve_tol.  The pair is still the best iterate found.
    n_iter : int
    """
    z = np.asarray(z, dtype=float)
    D = np.asarray(D, dtype=float)
    p, d = D.shape
    if z.shape != (p,):
        raise ValueError(f"sample has shape {z.shape}, basis expects ({p},)")
    l1, l2 = params.lambda1, params.lambda2
    tau = l2 / l1
    cho = scipy.linalg.cho_factor(np.eye(d) / l1 + D.T @ D)
    v = np.zeros(d)
    e = np.zeros(p)
    change = np.inf
    n_iter = 0
    for n_iter in range(1, params.ve_max_iters + 1):
        v_new = scipy.linalg.cho_solve(cho, D.T @ (z - e))
        if trace is not None:
            trace.append(ve_objective(z, D, v_new, e, l1, l2))
        e_new = soft_threshold(z - D @ v_new, tau)
        if trace is not None:
            trace.append(ve_objective(z, D, v_new, e_new, l1, l2))
        if params.ve_newton:
            v_new = _newton_v_step(z, D, v_new, l1, tau)
            e_new = soft_threshold(z - D @ v_new, tau)
            if trace is not None:
                trace.append(ve_objective(z, D, v_new, e_new, l1, l2))
        change = max(float(np.max(np.abs(v_new - v), initial=0.0)),
                     float(np.max(np.abs(e_new - e), initial=0.0)))
        v, e = v_new, e_new
        if change < params.ve_tol:
            break
    converged = change < params.ve_tol
    if not converged:
        converged = ve_fixed_point_residual(z, D, v, e, l1, l2) <= 10 * params.ve_tol
        if not converged:
            _logger.debug("solve_ve hit %d iterations, last change %.3g", n_iter, change)
    return v, e, ve_objective(z, D, v, e, l1, l2), converged, n_iter


def solve_u(y, D, M, lambda3: float) -> np.ndarray:
    """Closed-form row of U: (||y||^2 + 1/lambda3)^-1 (D - M)^T y."""
    if not lambda3 > 0:
        raise ValueError(f"lambda3 must be positive, got {lambda3}")
    y = np.asarray(y, dtype=float)
    return (D - M).T @ y / (float(y @ y) + 1.0 / lambda3)


def update_accumulators(state: ModelState, z, y, code: SampleCode) -> ModelState:
    """Fold one sample and its code into the running sums (in place)."""
    z = np.asarray(z, dtype=float)
    y = np.asarray(y, dtype=float)
    p, d = state.p, state.d
    for name, arr, shape in (("z", z, (p,)), ("y", y, (p,)), ("e", code.e, (p,)),
                             ("v", code.v, (d,)), ("u", code.u, (d,))):
        if np.shape(arr) != shape:
            raise ValueError(f"{name} has shape {np.shape(arr)}, expected {shape}")
    v, u = code.v, code.u
    clean = z - code.e
    state.M += np.outer(y, u)
    state.A += np.outer(v, v)
    iu = np.triu_indices(d, 1)
    state.A.T[iu] = state.A[iu]
    state.B += np.outer(clean, v)
    state.s_ze += float(clean @ clean)
    state.s_v += float(v @ v)
    state.s_e1 += float(np.abs(code.e).sum())
    state.s_u += 0.5 * float(u @ u)
    state.t += 1
    return state


def update_basis_closed(A, B, M, lambda1: float, lambda3: float) -> np.ndarray:
    """Global minimizer (lambda1 B + lambda3 M)(lambda1 A + lambda3 I)^-1."""
    d = A.shape[0]
    A_hat = lambda1 * A + lambda3 * np.eye(d)
    B_hat = lambda1 * B + lambda3 * M
    return scipy.linalg.solve(A_hat, B_hat.T, assume_a="pos").T


def update_basis_bcd(D_prev, A, B, M, lambda1: float, lambda3: float, passes: int = 1) -> np.ndarray:
    """Column-wise exact minimization of the surrogate, ``passes`` sweeps.

    d_j <- d_j - (D a_j - b_j) / A_jj with A = lambda1 A + lambda3 I and
    B = lambda1 B + lambda3 M.
    """
    D = np.array(D_prev, dtype=float)
    d = D.shape[1]
    A_hat = lambda1 * A + lambda3 * np.eye(d)
    B_hat = lambda1 * B + lambda3 * M
    tiny = np.finfo(float).tiny
    skipped = set()
    for _ in range(passes):
        for j in range(d):
            ajj = A_hat[j, j]
            if not ajj > tiny:
                skipped.add(j)
                continue
            D[:, j] -= (D @ A_hat[:, j] - B_hat[:, j]) / ajj
    if skipped:
        warnings.warn(f"skipped degenerate basis columns {sorted(skipped)}", DegenerateColumnWarning)
    return D


def olrsc_step(state: ModelState, z, y, params: SolverParams):
    """Process one sample: codes against D_{t-1}, accumulate, update D_t.

    Mutates and returns ``state`` together with the sample's ``SampleCode``.
    """
    z = np.asarray(z, dtype=float)
    y = np.asarray(y, dtype=float)
    lam3 = lambda3_at(params, state.t + 1, state.p)
    v, e, obj, converged, n_iter = solve_ve(z, state.D, params)
    u = solve_u(y, state.D, state.M, lam3)
    code = SampleCode(v=v, e=e, u=u, point_loss=obj, converged=converged, n_iter=n_iter)
    update_accumulators(state, z, y, code)
    if not params.freeze_basis:
        if params.basis_update == "closed":
            state.D = update_basis_closed(state.A, state.B, state.M, params.lambda1, lam3)
        else:
            state.D = update_basis_bcd(state.D, state.A, state.B, state.M,
                                       params.lambda1, lam3, params.bcd_passes)
    return state, code
