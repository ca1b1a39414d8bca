import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose

from fpidual.errors import InfeasibleError, InputError
from fpidual.solvers import (
    LpBall,
    ball_norm,
    constrained_ls_fw,
    krr_kkt_residual,
    lmo_lp,
    min_norm_interpolant,
    norm_constrained_krr,
    predict,
    project_lp,
)


def test_lmo_examples():
    assert_allclose(lmo_lp([3.0, 4.0], LpBall(2, 1)), [-0.6, -0.8])
    assert_allclose(lmo_lp([1.0, -5.0], LpBall(1, 2)), [0.0, 2.0])
    assert_allclose(lmo_lp([1.0, -1.0], LpBall(np.inf, 1)), [-1.0, 1.0])
    assert_allclose(lmo_lp([2.0, -2.0], LpBall(1, 1)), [-1.0, 0.0])
    assert not np.any(lmo_lp(np.zeros(3), LpBall(1.5, 1)))


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(-10, 10), min_size=2, max_size=6), st.sampled_from([1.0, 1.5, 2.0, 3.0, np.inf]),
       st.integers(0, 1000))
def test_lmo_beats_random_ball_points(g, p, seed):
    g = np.array(g)
    ball = LpBall(p, 1.5)
    s = lmo_lp(g, ball)
    assert ball_norm(s, ball) <= 1.5 * (1 + 1e-9)
    rng = np.random.default_rng(seed)
    Z = rng.standard_normal((100, g.size))
    for z in Z:
        z = z * 1.5 / ball_norm(z, ball)
        assert g @ s <= g @ z + 1e-9 * (1 + np.abs(g).sum())


def test_ball_validation():
    with pytest.raises(InputError):
        LpBall(0.5, 1)
    with pytest.raises(InputError):
        LpBall(2, 0)


def _project_l1_oracle(c, R):
    # Duchi et al. sort-and-threshold rule written out in full
    a = np.abs(c)
    if a.sum() <= R:
        return c.copy()
    u = np.sort(a)[::-1]
    cum = np.cumsum(u)
    k = max(j for j in range(1, u.size + 1) if u[j - 1] > (cum[j - 1] - R) / j)
    tau = (cum[k - 1] - R) / k
    return np.sign(c) * np.maximum(a - tau, 0)


def test_project_examples():
    c = np.array([0.1, -0.2])
    for p in (1, 1.5, 2, np.inf):
        assert_allclose(project_lp(c, LpBall(p, 1)), c)
    assert_allclose(project_lp(np.array([3.0, 4.0]), LpBall(2, 1)), [0.6, 0.8])
    assert_allclose(project_lp(np.array([3.0, 0.0]), LpBall(1, 1)), [1.0, 0.0])
    assert_allclose(project_lp(np.array([3.0, -0.5]), LpBall(np.inf, 1)), [1.0, -0.5])


def test_project_l1_matches_oracle():
    rng = np.random.default_rng(0)
    for _ in range(20):
        c = rng.standard_normal(9) * 3
        assert_allclose(project_lp(c, LpBall(1, 1.3)), _project_l1_oracle(c, 1.3), atol=1e-12)


@settings(max_examples=40, deadline=None)
@given(st.lists(st.floats(-20, 20), min_size=2, max_size=6), st.sampled_from([1.0, 1.5, 3.0]),
       st.integers(0, 1000))
def test_projection_variational_inequality(c, p, seed):
    c = np.array(c)
    ball = LpBall(p, 1.0)
    P = project_lp(c, ball)
    assert ball_norm(P, ball) <= 1 + 1e-8
    rng = np.random.default_rng(seed)
    for z in rng.standard_normal((50, c.size)):
        z = z * rng.random() / ball_norm(z, ball)
        assert (c - P) @ (z - P) <= 1e-7 * (1 + np.abs(c).sum())


def test_fw_realizable_interior():
    rng = np.random.default_rng(1)
    A = rng.standard_normal((50, 20))
    c0 = rng.standard_normal(20)
    c0 *= 0.5 * 20 ** 0.5 / np.linalg.norm(c0)
    y = A @ c0 / 20
    res = constrained_ls_fw(A, y, LpBall(2, 20 ** 0.5), tol=1e-10, warm_start=True)
    assert res.objective <= 1e-12
    assert res.certificate <= 1e-10 and res.certified
    assert not res.constraint_active


def test_fw_tiny_radius():
    rng = np.random.default_rng(2)
    A = rng.standard_normal((30, 10))
    y = rng.standard_normal(30)
    res = constrained_ls_fw(A, y, LpBall(1.5, 1e-12))
    assert np.max(np.abs(res.coefficients)) <= 1e-12
    assert_allclose(res.objective, y @ y / 30, rtol=1e-9)


def _ridge_oracle(B, y, R):
    # bisection on the ridge parameter of min ||y - Bc||^2 + mu ||c||^2 until ||c|| = R
    def sol(mu):
        return np.linalg.solve(B.T @ B + mu * np.eye(B.shape[1]), B.T @ y)
    lo, hi = 1e-14, 1e6
    for _ in range(300):
        mid = np.sqrt(lo * hi)
        if np.linalg.norm(sol(mid)) > R:
            lo = mid
        else:
            hi = mid
    return sol(hi)


@pytest.mark.parametrize("warm", [False, True])
def test_fw_matches_ridge_path(warm):
    rng = np.random.default_rng(3)
    n, m = 60, 40
    A = rng.standard_normal((n, m))
    y = rng.standard_normal(n)
    R = 2.0
    c_star = _ridge_oracle(A / m, y, R)
    best = np.sum((y - A @ c_star / m) ** 2) / n
    res = constrained_ls_fw(A, y, LpBall(2, R), tol=1e-9, warm_start=warm)
    assert res.certified
    assert abs(res.objective - best) <= 1e-6
    assert res.constraint_active


def test_fw_matches_cvxpy_p15():
    cp = pytest.importorskip("cvxpy")
    rng = np.random.default_rng(4)
    n, m = 40, 25
    A = rng.standard_normal((n, m))
    y = rng.standard_normal(n)
    R = m ** (1 / 1.5)
    c = cp.Variable(m)
    prob = cp.Problem(cp.Minimize(cp.sum_squares(y - A @ c / m) / n), [cp.norm(c, 1.5) <= R])
    prob.solve()
    res = constrained_ls_fw(A, y, LpBall(1.5, R), tol=1e-9, warm_start=True)
    assert res.certified
    assert_allclose(res.objective, prob.value, rtol=1e-5)
    # the gap certifies suboptimality from above
    assert res.objective - prob.value <= res.certificate + 1e-7


def test_fw_gap_bounds_suboptimality_with_small_budget():
    rng = np.random.default_rng(5)
    A = rng.standard_normal((40, 30))
    y = rng.standard_normal(40)
    ball = LpBall(1.5, 30.0)
    short = constrained_ls_fw(A, y, ball, max_iter=5, tol=1e-12)
    full = constrained_ls_fw(A, y, ball, tol=1e-10, warm_start=True)
    assert not short.certified
    assert short.objective - full.objective <= short.certificate + 1e-12
    assert np.all(np.diff(full.history) <= 1e-15)


def test_fw_input_errors():
    with pytest.raises(InputError):
        constrained_ls_fw(np.ones((3, 2)), np.ones(2), LpBall(2, 1))
    with pytest.raises(InputError):
        constrained_ls_fw(np.ones((3, 2)), np.ones(3), LpBall(2, 1), c0=[5.0, 5.0])


def test_min_norm_interpolant_examples():
    K = np.array([[2.0, 0.5], [0.5, 1.0]])
    y = np.array([1.0, -1.0])
    beta = min_norm_interpolant(K, y)
    assert_allclose(beta, np.linalg.solve(K, y))
    assert_allclose(predict(beta, K), y, atol=1e-12)
    assert not np.any(min_norm_interpolant(K, np.zeros(2)))


def test_min_norm_interpolant_singular():
    rng = np.random.default_rng(6)
    B = rng.standard_normal((8, 3))
    K = B @ B.T
    y = K @ rng.standard_normal(8)
    beta = min_norm_interpolant(K, y)
    assert_allclose(K @ beta, y, atol=1e-9)
    N = np.linalg.svd(K)[2][3:].T
    best = beta @ K @ beta
    for _ in range(100):
        other = beta + N @ rng.standard_normal(5)
        assert best <= other @ K @ other + 1e-9
    with pytest.raises(InfeasibleError):
        min_norm_interpolant(K, rng.standard_normal(8))


def test_krr_unconstrained_and_zero():
    rng = np.random.default_rng(7)
    B = rng.standard_normal((10, 10))
    K = B @ B.T
    y = rng.standard_normal(10)
    res = norm_constrained_krr(K, y, 1e6)
    assert not res.constraint_active
    assert_allclose(K @ res.coefficients, y, atol=1e-8)
    assert not np.any(norm_constrained_krr(K, np.zeros(10), 1.0).coefficients)


def test_krr_binding_case():
    rng = np.random.default_rng(8)
    B = rng.standard_normal((12, 12))
    K = B @ B.T / 12
    y = rng.standard_normal(12)
    R = 0.3
    res = norm_constrained_krr(K, y, R)
    assert res.constraint_active and res.certified
    norm = np.sqrt(res.coefficients @ K @ res.coefficients)
    assert_allclose(norm, R, rtol=1e-7)
    diag = krr_kkt_residual(K, y, res.coefficients, R)
    assert diag["angle_residual"] <= 1e-5
    L = np.linalg.cholesky(K + 1e-12 * np.eye(12))
    for _ in range(50):
        u = rng.standard_normal(12)
        # random beta with RKHS norm at most R
        beta = np.linalg.solve(L.T, u / np.linalg.norm(u)) * R * rng.random()
        assert res.objective <= np.mean((K @ beta - y) ** 2) + 1e-12


def test_krr_input_errors():
    with pytest.raises(InputError):
        norm_constrained_krr(np.eye(2), np.ones(3), 1.0)
    with pytest.raises(InputError):
        norm_constrained_krr(np.eye(2), np.ones(2), 0.0)


def test_predict_examples():
    K = np.array([[1.0, 0.2, 0.1], [0.2, 1.0, 0.3]])
    assert_allclose(predict([1.0, 0.0, 0.0], K), K[:, 0])
    assert not np.any(predict(np.zeros(3), K, family="features"))
    assert_allclose(predict([3.0, 3.0, 3.0], K, family="features"), K.sum(axis=1))
    with pytest.raises(InputError):
        predict(np.zeros(2), K)
    with pytest.raises(InputError):
        predict(np.zeros(3), K, family="trees")
