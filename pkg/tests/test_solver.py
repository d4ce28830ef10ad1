import json
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from online_lrr import (ColumnStream, ModelState, SampleCode, SolverParams, expressed_variance,
                        make_dataset, olrsc_step, run_stream, soft_threshold, solve_u, solve_ve,
                        surrogate_value, update_accumulators, update_basis_bcd, update_basis_closed)
from online_lrr.solver import DegenerateColumnWarning, ve_fixed_point_residual, ve_objective

from oracles import prox_grad_ve, scripted_online, ve_instance

ORACLE = json.loads((Path(__file__).parent / "data" / "ve_oracle.json").read_text())
PARAMS_835 = SolverParams(lambda1=1.0, lambda2=0.35, d=3)


# soft_threshold

def test_soft_threshold_examples():
    assert np.array_equal(soft_threshold(np.array([3.0, -0.5, 0.0]), 1.0), [2.0, 0.0, 0.0])
    x = np.array([1.5, -2.0, 1e-300])
    assert np.array_equal(soft_threshold(x, 0.0), x)
    assert np.array_equal(soft_threshold(np.array([-2.0, 2.0]), 2.0), [0.0, 0.0])


@settings(max_examples=200, deadline=None)
@given(x=st.floats(-5, 5), tau=st.floats(0, 3))
def test_soft_threshold_minimizes_prox_objective(x, tau):
    grid = np.linspace(-8, 8, 160_001)
    obj = 0.5 * (grid - x) ** 2 + tau * np.abs(grid)
    s = float(soft_threshold(np.array([x]), tau)[0])
    # grid spacing 1e-4 bounds the gap of the best grid point
    assert 0.5 * (s - x) ** 2 + tau * abs(s) <= obj.min() + 1e-8
    assert abs(s - grid[np.argmin(obj)]) <= 1e-4 + 1e-12


# solve_ve

def test_solve_ve_zero_sample():
    D = np.random.default_rng(0).standard_normal((6, 2))
    v, e, obj, conv, _ = solve_ve(np.zeros(6), D, PARAMS_835)
    assert not v.any() and not e.any() and obj == 0.0 and conv


def test_solve_ve_zero_basis():
    z = np.array([1.0, -0.2, 0.5, 3.0])
    v, e, obj, conv, _ = solve_ve(z, np.zeros((4, 2)), PARAMS_835)
    assert not v.any()
    assert np.array_equal(e, soft_threshold(z, 0.35))
    assert conv


@pytest.mark.parametrize("i", range(20))
def test_solve_ve_matches_frozen_prox_gradient_oracle(i):
    z, D = ve_instance(i)
    ref = ORACLE["instances"][i]
    v, e, obj, conv, _ = solve_ve(z, D, PARAMS_835)
    assert conv
    assert abs(obj - ref["objective"]) <= 1e-8
    np.testing.assert_allclose(v, ref["v"], atol=1e-6)


def test_oracle_reproduces_frozen_value():
    z, D = ve_instance(0)
    _, _, obj = prox_grad_ve(z, D, 1.0, 0.35, iters=ORACLE["iters"])
    assert obj == pytest.approx(ORACLE["instances"][0]["objective"], abs=1e-12)


@pytest.mark.parametrize("newton", [True, False])
def test_solve_ve_monotone_and_fixed_point(newton):
    rng = np.random.default_rng(4)
    params = SolverParams(lambda1=2.0, lambda2=0.2, d=4, ve_newton=newton, ve_max_iters=5000)
    for _ in range(30):
        D = rng.standard_normal((15, 4))
        z = D @ rng.standard_normal(4) + np.where(rng.random(15) < 0.2, 3 * rng.standard_normal(15), 0)
        trace = []
        v, e, obj, conv, _ = solve_ve(z, D, params, trace=trace)
        first = ve_objective(z, D, np.zeros(4), np.zeros(15), 2.0, 0.2)
        seq = np.array([first] + trace)
        assert np.all(np.diff(seq) <= 1e-12 * (1 + np.abs(seq[:-1])))
        assert conv
        assert ve_fixed_point_residual(z, D, v, e, 2.0, 0.2) <= 10 * params.ve_tol


def test_solve_ve_literal_alternation_agrees_with_accelerated():
    rng = np.random.default_rng(9)
    for _ in range(10):
        D = rng.standard_normal((10, 3))
        z = rng.standard_normal(10) * 2
        fast = solve_ve(z, D, SolverParams(lambda2=0.4, d=3))
        slow = solve_ve(z, D, SolverParams(lambda2=0.4, d=3, ve_newton=False, ve_max_iters=100_000,
                                           ve_tol=1e-12))
        assert abs(fast[2] - slow[2]) <= 1e-9


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), lam1=st.floats(0.1, 10), lam2=st.floats(0.01, 2),
       scale=st.floats(0.01, 100))
def test_solve_ve_bounds(seed, lam1, lam2, scale):
    rng = np.random.default_rng(seed)
    D = rng.standard_normal((9, 3))
    z = scale * rng.standard_normal(9)
    v, e, obj, _, _ = solve_ve(z, D, SolverParams(lambda1=lam1, lambda2=lam2, d=3))
    z1 = np.abs(z).sum()
    assert 0.5 * v @ v <= lam2 * z1 * (1 + 1e-12)
    assert np.abs(e).sum() <= z1 * (1 + 1e-12)
    assert obj <= lam2 * z1 * (1 + 1e-12)


def test_solve_ve_rejects_shape_mismatch():
    with pytest.raises(ValueError):
        solve_ve(np.zeros(5), np.zeros((4, 2)), PARAMS_835)


def test_solve_ve_reports_nonconvergence_at_tiny_cap():
    z, D = ve_instance(3)
    params = SolverParams(lambda2=0.35, d=3, ve_newton=False, ve_max_iters=1, ve_tol=1e-14)
    *_, conv, n_iter = solve_ve(z, D, params)
    assert n_iter == 1 and not conv


# solve_u

def test_solve_u_trivial():
    rng = np.random.default_rng(0)
    D, M = rng.standard_normal((5, 2)), rng.standard_normal((5, 2))
    assert not solve_u(np.zeros(5), D, M, 0.7).any()
    assert not solve_u(rng.standard_normal(5), D, D.copy(), 0.7).any()
    with pytest.raises(ValueError):
        solve_u(np.ones(5), D, M, 0.0)


@pytest.mark.parametrize("seed", range(10))
def test_solve_u_stationarity(seed):
    rng = np.random.default_rng(seed)
    y, D, M = rng.standard_normal(6), rng.standard_normal((6, 2)), rng.standard_normal((6, 2))
    lam3 = 0.7
    u = solve_u(y, D, M, lam3)
    res = u + lam3 * ((y @ y) * u - (D - M).T @ y)
    assert np.max(np.abs(res)) <= 1e-10


# accumulators

def _code(v, e, u):
    return SampleCode(v=np.asarray(v, float), e=np.asarray(e, float), u=np.asarray(u, float), point_loss=0.0)


def test_accumulators_zero_code():
    s = ModelState.initial(4, 2, seed=0)
    z = np.array([1.0, -2.0, 0.0, 0.5])
    update_accumulators(s, z, z, _code([0, 0], z, [0, 0]))
    assert not s.M.any() and not s.A.any() and not s.B.any()
    assert s.s_e1 == 3.5 and s.t == 1 and s.s_ze == 0.0


def test_accumulators_additive():
    s = ModelState.initial(4, 2, seed=0)
    z = np.array([1.0, 2.0, 3.0, 4.0])
    code = _code([0.5, -1.0], [0, 0, 1.0, 0], [0.1, 0.2])
    update_accumulators(s, z, z, code)
    update_accumulators(s, z, z, code)
    assert np.array_equal(s.A, 2 * np.outer(code.v, code.v))
    assert s.t == 2


def test_accumulators_match_code_log():
    ds = make_dataset(20, [3, 3], [25, 25], rho=0.1, seed=2)
    params = SolverParams.defaults_for(20, 4)
    rep = run_stream(ColumnStream(ds.Z), params, seed=3, log_codes=True)
    A = np.zeros((4, 4))
    B = np.zeros((20, 4))
    M = np.zeros((20, 4))
    for i, c in enumerate(rep.codes):
        A += np.outer(c.v, c.v)
        A.T[np.triu_indices(4, 1)] = A[np.triu_indices(4, 1)]
        B += np.outer(ds.Z[:, i] - c.e, c.v)
        M += np.outer(ds.Z[:, i], c.u)
    assert np.array_equal(rep.state.A, A)
    assert np.array_equal(rep.state.B, B)
    assert np.array_equal(rep.state.M, M)
    assert np.array_equal(rep.state.A, rep.state.A.T)
    assert np.all(np.linalg.eigvalsh(rep.state.A) >= -1e-10)
    assert rep.state.t == 50


def test_accumulators_validate_before_mutating():
    s = ModelState.initial(4, 2, seed=0)
    before = s.copy()
    with pytest.raises(ValueError):
        update_accumulators(s, np.zeros(4), np.zeros(4), _code([0, 0, 0], np.zeros(4), [0, 0]))
    assert s.t == 0 and np.array_equal(s.A, before.A)


# basis updates

def _random_acc(rng, p, d, n=40):
    V = rng.standard_normal((d, n))
    return V @ V.T, rng.standard_normal((p, d)), rng.standard_normal((p, d))


def test_closed_form_trivial():
    assert not update_basis_closed(np.zeros((3, 3)), np.zeros((5, 3)), np.zeros((5, 3)), 1.0, 0.5).any()
    M = np.random.default_rng(1).standard_normal((5, 3))
    A, B = np.eye(3), np.ones((5, 3))
    np.testing.assert_allclose(update_basis_closed(A, B, M, 0.0, 0.5), M, atol=1e-15)


@pytest.mark.parametrize("seed", range(5))
def test_closed_form_normal_equation(seed):
    rng = np.random.default_rng(seed)
    A, B, M = _random_acc(rng, 12, 4)
    D = update_basis_closed(A, B, M, 1.3, 0.8)
    res = np.linalg.norm(D @ (1.3 * A + 0.8 * np.eye(4)) - (1.3 * B + 0.8 * M))
    assert res <= 1e-10 * (np.linalg.norm(B) + np.linalg.norm(M) + 1)


def test_closed_form_minimizes_surrogate():
    ds = make_dataset(15, [3], [60], rho=0.1, seed=0)
    params = SolverParams.defaults_for(15, 4, basis_update="closed")
    rep = run_stream(ColumnStream(ds.Z), params, seed=1)
    s = rep.state
    lam3 = np.sqrt(s.t / s.p)
    g0 = surrogate_value(s, s.D, params.lambda1, params.lambda2, lam3)
    rng = np.random.default_rng(5)
    for _ in range(100):
        P = rng.standard_normal(s.D.shape)
        P /= np.linalg.norm(P)
        assert g0 <= surrogate_value(s, s.D + 1e-3 * P, params.lambda1, params.lambda2, lam3)


def test_bcd_single_column_is_exact():
    rng = np.random.default_rng(0)
    A, B, M = _random_acc(rng, 7, 1)
    D = update_basis_bcd(rng.standard_normal((7, 1)), A, B, M, 1.0, 0.6, passes=1)
    np.testing.assert_allclose(D, (B + 0.6 * M) / (A[0, 0] + 0.6), rtol=1e-14, atol=1e-15)


def test_bcd_fixed_point():
    rng = np.random.default_rng(1)
    A, B, M = _random_acc(rng, 10, 4)
    D = update_basis_closed(A, B, M, 1.0, 0.9)
    assert np.max(np.abs(update_basis_bcd(D, A, B, M, 1.0, 0.9) - D)) <= 1e-12


def test_bcd_converges_to_closed_form():
    rng = np.random.default_rng(2)
    A, B, M = _random_acc(rng, 20, 5)
    D = update_basis_bcd(rng.standard_normal((20, 5)), A, B, M, 1.0, 0.5, passes=200)
    assert np.linalg.norm(D - update_basis_closed(A, B, M, 1.0, 0.5)) <= 1e-8


def test_bcd_descends_surrogate_per_column():
    ds = make_dataset(12, [2, 2], [30, 30], rho=0.05, seed=4)
    params = SolverParams.defaults_for(12, 4, freeze_basis=True)
    s = run_stream(ColumnStream(ds.Z), params, seed=0).state
    lam3 = np.sqrt(s.t / s.p)
    D = s.D.copy()
    g = surrogate_value(s, D, 1.0, params.lambda2, lam3)
    for _ in range(3):
        for j in range(4):
            # a one-column sweep equals BCD restricted to column j
            Dj = D.copy()
            A_hat = s.A + lam3 * np.eye(4)
            B_hat = s.B + lam3 * s.M
            Dj[:, j] -= (Dj @ A_hat[:, j] - B_hat[:, j]) / A_hat[j, j]
            g_new = surrogate_value(s, Dj, 1.0, params.lambda2, lam3)
            assert g_new <= g + 1e-12 * abs(g)
            D, g = Dj, g_new
    np.testing.assert_allclose(D, update_basis_bcd(s.D, s.A, s.B, s.M, 1.0, lam3, passes=3), atol=1e-12)


def test_bcd_skips_degenerate_column():
    A = np.diag([1.0, 0.0])
    B = np.ones((3, 2))
    D0 = np.full((3, 2), 7.0)
    with pytest.warns(DegenerateColumnWarning):
        D = update_basis_bcd(D0, A, B, np.zeros((3, 2)), 1.0, 0.0)
    assert np.array_equal(D[:, 1], D0[:, 1])


# olrsc_step

def test_step_zero_sample_shrinks_basis():
    s = ModelState.initial(6, 2, seed=0)
    D0 = s.D.copy()
    s, code = olrsc_step(s, np.zeros(6), np.zeros(6), SolverParams.defaults_for(6, 2))
    assert not code.v.any() and not code.e.any() and not code.u.any()
    # With A = B = M = 0 one column sweep sends each column to zero.
    assert np.allclose(s.D, 0.0) and not np.allclose(D0, 0.0)


def test_step_from_zero_basis():
    s = ModelState.initial(5, 2, D0=np.zeros((5, 2)))
    z = np.array([1.0, -0.1, 0.4, 2.0, 0.0])
    params = SolverParams.defaults_for(5, 2)
    s, code = olrsc_step(s, z, z, params)
    assert not code.v.any() and not code.u.any()
    assert np.array_equal(code.e, soft_threshold(z, params.lambda2 / params.lambda1))


def test_single_subspace_recovery_matches_scripted_loop():
    # at this lambda2 = 1/sqrt(p) the plateau after 2000 samples drops below 0.99 for p >= 30
    ds = make_dataset(15, [5], [2000], rho=0.0, seed=11)
    params = SolverParams.defaults_for(15, 5)
    state = ModelState.initial(15, 5, seed=12)
    D0 = state.D.copy()
    rep = run_stream(ColumnStream(ds.Z), params, state)
    ev = expressed_variance(rep.state.D, ds.union_basis())
    assert ev >= 0.99
    ref = scripted_online(ds.Z[:, :300], D0, params.lambda1, params.lambda2)
    mine = run_stream(ColumnStream(ds.Z[:, :300]), params, ModelState.initial(15, 5, D0=D0)).state.D
    assert np.linalg.norm(mine - ref) <= 1e-5 * np.linalg.norm(ref)
