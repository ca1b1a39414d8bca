import itertools

import numpy as np
import pytest
from numpy.testing import assert_allclose

from fpidual.duality import (
    DualityInstance,
    lagrangian_inner_check,
    lhs_estimation_side,
    rhs_approximation_side,
    verify,
)
from fpidual.errors import InputError


def _instance(seed, N, M, **kw):
    rng = np.random.default_rng(seed)
    return DualityInstance(rng.standard_normal((N, M)), **kw)


def test_lhs_unconstrained_is_weighted_operator_norm():
    rng = np.random.default_rng(0)
    Phi = rng.standard_normal((7, 9))
    rho = rng.random(7)
    rho /= rho.sum()
    pi = rng.random(9)
    pi /= pi.sum()
    inst = DualityInstance(Phi, rho=rho, pi=pi, eps=np.inf, S=[0, 1])
    top = np.linalg.svd(np.sqrt(rho)[:, None] * Phi * np.sqrt(pi), compute_uv=False)[0]
    value, f, certified = lhs_estimation_side(inst)
    assert certified
    assert_allclose(value, top, rtol=1e-10)
    assert_allclose(np.sqrt(np.sum(rho * f**2)), value, rtol=1e-10)


def test_lhs_full_sample_is_zero():
    inst = _instance(1, 6, 4, S=np.arange(6))
    assert lhs_estimation_side(inst)[0] <= 1e-12


def test_svd_sides_agree():
    for seed in range(5):
        rng = np.random.default_rng(seed)
        inst = DualityInstance(rng.standard_normal((20, 30)), S=rng.choice(20, 5, replace=False))
        report = verify(inst)
        assert report.regime == "certified" and report.passed
        assert report.gap <= 1e-8
        assert report.lhs_route == report.rhs_route == "svd"


def test_rhs_without_penalty_is_dual_norm():
    rng = np.random.default_rng(2)
    Phi = rng.standard_normal((5, 6))
    inst = DualityInstance(Phi, p=1.5, q=np.inf, eps=np.inf, S=[0])
    value, b, _ = rhs_approximation_side(inst)
    # point masses are the extreme points of the prediction-side dual ball
    expected = max(np.mean(np.abs(Phi[x]) ** 3) ** (1 / 3) for x in range(5))
    assert_allclose(value, expected, rtol=1e-10)


def test_zero_features():
    inst = DualityInstance(np.zeros((4, 5)), S=[0, 1])
    assert rhs_approximation_side(inst)[0] == 0.0
    assert lhs_estimation_side(inst)[0] == 0.0


def _lhs_q1_oracle(inst):
    cp = pytest.importorskip("cvxpy")
    N, M = inst.Phi.shape
    a = cp.Variable(M)
    f = inst.Phi @ cp.multiply(inst.pi_w, a)
    S = np.flatnonzero(inst.nu_w > 0)
    cons = [cp.norm(cp.multiply(inst.pi_w ** (1 / inst.p), a), inst.p) <= 1]
    if S.size and np.isfinite(inst.eps):
        cons.append(cp.norm(cp.multiply(inst.nu_w[S] ** (1 / inst.r), f[S]), inst.r) <= inst.eps)
    best = 0.0
    for s in itertools.product((1.0, -1.0), repeat=N):
        prob = cp.Problem(cp.Maximize(cp.sum(cp.multiply(inst.rho_w * np.array(s), f))), cons)
        prob.solve()
        best = max(best, prob.value)
    return best


@pytest.mark.parametrize("p", [2.0, np.inf])
def test_enumeration_q1_both_sides(p):
    inst = _instance(3, 5, 6, p=p, q=1.0, S=[0, 2], eps=0.0)
    report = verify(inst, tol=1e-6)
    assert report.lhs_route == report.rhs_route == "enumerate"
    assert report.gap <= 1e-6 and report.passed
    assert_allclose(report.lhs, _lhs_q1_oracle(inst), rtol=1e-5)


def test_enumeration_qinf():
    inst = _instance(4, 6, 6, p=2.0, q=np.inf, S=[1, 3])
    report = verify(inst, tol=1e-6)
    assert report.lhs_route == "enumerate"
    assert report.gap <= 1e-6


def test_barron_unconstrained():
    rng = np.random.default_rng(5)
    Phi = rng.standard_normal((4, 5))
    inst = DualityInstance(Phi, q=1.0, eps=np.inf, space="barron")
    value = lhs_estimation_side(inst)[0]
    # extreme points of the l1 ball are signed single atoms
    assert_allclose(value, np.max(np.mean(np.abs(Phi), axis=0)), rtol=1e-9)
    report = verify(inst, tol=1e-6)
    assert report.gap <= 1e-6


def test_heuristic_route_small():
    inst = _instance(6, 10, 10, p=1.5, q=2.0, S=[0, 1, 2], eps=0.1)
    report = verify(inst, restarts=8)
    assert report.regime == "heuristic"
    assert report.lhs_route == report.rhs_route == "multistart"
    assert report.gap <= 0.02


def test_instance_validation():
    with pytest.raises(InputError):
        DualityInstance(np.eye(3), p=1.0)
    with pytest.raises(InputError):
        DualityInstance(np.eye(3), r=1.0)
    with pytest.raises(InputError):
        DualityInstance(np.eye(3), space="sobolev")
    with pytest.raises(InputError):
        DualityInstance(np.eye(3), rho=np.ones(2) / 2)
    with pytest.raises(InputError):
        verify(DualityInstance(np.eye(3)), tol=0)


def test_lagrangian_zero_and_span():
    inst = _instance(7, 8, 10, S=[0, 1, 2], eps=0.0)
    out = lagrangian_inner_check(np.zeros(10), inst)
    assert out["primal"] == 0.0 and out["dual"] == 0.0
    g = inst.Phi[[0, 1, 2]].T @ np.array([0.3, -1.0, 2.0])
    out = lagrangian_inner_check(g, inst)
    assert out["primal"] <= 1e-10 and abs(out["dual"]) <= 1e-10


def test_lagrangian_random():
    for seed in range(10):
        rng = np.random.default_rng(seed)
        inst = DualityInstance(rng.standard_normal((12, 15)), S=rng.choice(12, 4, replace=False),
                               eps=rng.choice([0.0, 0.1, 1.0]))
        out = lagrangian_inner_check(rng.standard_normal(15), inst)
        assert out["residual"] <= 1e-6
        assert out["weak_duality"] <= 1e-9 * max(1.0, out["primal"])


def test_lagrangian_requires_exact_side():
    with pytest.raises(InputError):
        lagrangian_inner_check(np.zeros(3), DualityInstance(np.eye(3), p=1.5, r=3.0, S=[0]))


@pytest.mark.parametrize("p", [1.0, np.inf])
def test_conic_inner_pair_matches_cvxpy(p):
    cp = pytest.importorskip("cvxpy")
    rng = np.random.default_rng(11)
    Phi = rng.standard_normal((6, 5))
    inst = DualityInstance(Phi, p=p, q=1.0, S=[0, 3], eps=0.3, space="fp" if p > 1 else "barron")
    inner = inst.inner()
    assert inner.conic
    for _ in range(3):
        g = rng.standard_normal(5)
        value, a, upper = inner.dual(g)
        assert (upper - value) <= 1e-9 * upper
        w = inner.w
        x = cp.Variable(5)
        f = Phi[[0, 3]] @ cp.multiply(w, x)
        cons = [cp.norm(cp.multiply(w ** (1 / p) if p == 1 else 1.0, x), p) <= 1,
                cp.norm(np.sqrt(0.5) * f, 2) <= 0.3]
        prob = cp.Problem(cp.Maximize((w * g) @ x), cons)
        prob.solve()
        assert_allclose(value, prob.value, rtol=1e-6)


def test_enumeration_with_slack_is_certified():
    inst = _instance(12, 5, 6, p=np.inf, q=1.0, S=[0, 2], eps=0.1)
    report = verify(inst, tol=1e-6)
    assert report.regime == "certified" and report.gap <= 1e-8
