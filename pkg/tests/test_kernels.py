import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose

from fpidual.errors import InputError
from fpidual.experiments import fibonacci_sphere, random_rotation
from fpidual.io import save_spectrum
from fpidual.kernels import (
    check_kernel,
    dual_kernel,
    mercer,
    minimax_lower_noiseless,
    minimax_lower_noisy,
    primal_kernel,
    spectral_tail,
    tail_sum,
)
from fpidual.measures import DiscreteMeasure, FeatureMap


def _random_psd(rng, n, rank=None):
    B = rng.standard_normal((n, rank or n))
    return B @ B.T


def test_primal_kernel_examples():
    M = 6
    assert_allclose(primal_kernel(np.eye(M), np.full(M, 1 / M)), np.eye(M) / M)
    assert_allclose(primal_kernel(np.ones((4, 1)), [1.0]), np.ones((4, 4)))
    with pytest.raises(InputError):
        primal_kernel(np.eye(3), np.full(2, 0.5))


def test_relu_kernel_diagonal():
    # E[max(v_1, 0)^2] over the uniform sphere equals 1/(2d)
    for d in (3, 4):
        rng = np.random.default_rng(d)
        V = rng.standard_normal((200000, d))
        V /= np.linalg.norm(V, axis=1, keepdims=True)
        x = np.eye(d)[:1]
        Phi = FeatureMap("relu")(x, V)
        K = primal_kernel(Phi, np.full(V.shape[0], 1 / V.shape[0]))
        assert_allclose(K[0, 0], 1 / (2 * d), rtol=1e-2)


def test_dual_kernel_examples():
    rng = np.random.default_rng(0)
    Phi = rng.standard_normal((5, 7))
    gamma = rng.random(5)
    gamma /= gamma.sum()
    assert_allclose(dual_kernel(Phi, gamma), primal_kernel(Phi.T, gamma))
    assert_allclose(dual_kernel(np.eye(4), np.full(4, 0.25)), np.eye(4) / 4)
    low = rng.standard_normal((6, 2)) @ rng.standard_normal((2, 8))
    assert np.linalg.matrix_rank(dual_kernel(low, np.full(6, 1 / 6)), tol=1e-10) == 2
    with pytest.raises(InputError):
        dual_kernel(Phi, np.full(4, 0.25))


def test_check_kernel():
    with pytest.raises(InputError):
        check_kernel(np.array([[1.0, 2.0], [0.0, 1.0]]))
    with pytest.raises(InputError):
        check_kernel(np.diag([1.0, -1.0]))
    with pytest.raises(InputError):
        check_kernel(np.ones((2, 3)))


def test_mercer_examples():
    N = 5
    dec = mercer(np.eye(N), np.full(N, 1 / N))
    assert_allclose(dec.eigenvalues, 1 / N)
    dec = mercer(np.ones((N, N)), np.full(N, 1 / N))
    assert_allclose(dec.eigenvalues, [1, 0, 0, 0, 0], atol=1e-14)
    assert_allclose(np.abs(dec.eigenvectors[:, 0]), 1.0)


def test_mercer_invariants():
    rng = np.random.default_rng(1)
    N = 12
    K = _random_psd(rng, N)
    gamma = rng.random(N)
    gamma /= gamma.sum()
    dec = mercer(K, gamma)
    assert np.all(np.diff(dec.eigenvalues) <= 0)
    assert_allclose(dec.trace, np.sum(gamma * np.diag(K)), rtol=1e-10)
    E = dec.eigenvectors
    assert_allclose(E.T @ (gamma[:, None] * E), np.eye(N), atol=1e-8)
    # eigen-equation of the integral operator
    assert_allclose(K @ (gamma[:, None] * E), E * dec.eigenvalues, atol=1e-8 * dec.eigenvalues[0])


def test_mercer_diagonal_case_reproduces_weights():
    w = np.array([0.1, 0.4, 0.2, 0.3])
    dec = mercer(primal_kernel(np.eye(4), w), np.full(4, 0.25))
    assert_allclose(dec.eigenvalues, np.sort(w)[::-1] / 4)


def test_mercer_off_support_extension():
    rng = np.random.default_rng(2)
    B = rng.standard_normal((6, 3))
    K = B @ B.T
    gamma = np.array([0.25, 0.25, 0.25, 0.25, 0.0, 0.0])
    dec = mercer(K, gamma)
    pos = dec.eigenvalues > 1e-10
    E = dec.eigenvectors[:, pos]
    assert_allclose(K @ (gamma[:, None] * E), E * dec.eigenvalues[pos], atol=1e-9)


def test_gram_duality_of_spectra():
    rng = np.random.default_rng(3)
    Phi = rng.standard_normal((7, 11))
    rho = rng.random(7)
    rho /= rho.sum()
    pi = rng.random(11)
    pi /= pi.sum()
    a = mercer(primal_kernel(Phi, pi), rho).eigenvalues
    b = mercer(dual_kernel(Phi, rho), pi).eigenvalues
    assert_allclose(a, b[:7], atol=1e-9)
    assert_allclose(b[7:], 0.0, atol=1e-9)


def test_spectral_tail_examples():
    rng = np.random.default_rng(4)
    K = _random_psd(rng, 8, rank=3)
    dec = mercer(K, np.full(8, 1 / 8))
    assert_allclose(spectral_tail(dec, 0), np.sqrt(dec.trace))
    assert spectral_tail(dec, 3) <= 1e-6 * np.sqrt(dec.trace)
    assert spectral_tail(dec, 20) == 0.0
    tails = [spectral_tail(dec, m) for m in range(9)]
    assert np.all(np.diff(tails) <= 0)
    for m in range(9):
        assert_allclose(tail_sum(dec, m) + dec.eigenvalues[:m].sum(), dec.trace, rtol=1e-10)
    with pytest.raises(InputError):
        tail_sum(dec, -1)


@settings(max_examples=25, deadline=None)
@given(st.integers(2, 10), st.integers(0, 2**31 - 1))
def test_tail_monotone_random(n, seed):
    rng = np.random.default_rng(seed)
    dec = mercer(_random_psd(rng, n), np.full(n, 1 / n))
    tails = dec.tails()
    assert np.all(np.diff(tails) <= 1e-15)
    assert_allclose(tails[0] ** 2, dec.trace, rtol=1e-10)


def test_minimax_lower_noiseless_candidates():
    rng = np.random.default_rng(5)
    Phi = rng.standard_normal((6, 9))
    pi = np.full(9, 1 / 9)
    g1 = DiscreteMeasure(np.arange(6.0))
    g2 = DiscreteMeasure(np.arange(6.0), [0.5, 0.5, 0, 0, 0, 0])
    single = minimax_lower_noiseless(Phi, pi, [g1], 2)
    assert_allclose(single, spectral_tail(mercer(dual_kernel(Phi, g1), pi), 2))
    assert minimax_lower_noiseless(Phi, pi, [g1, g1], 2) == single
    both = minimax_lower_noiseless(Phi, pi, [g1, g2], 2)
    assert both >= single
    with pytest.raises(InputError):
        minimax_lower_noiseless(Phi, pi, [], 2)


def test_minimax_lower_noisy_examples():
    rng = np.random.default_rng(6)
    Phi = rng.standard_normal((6, 9))
    pi = np.full(9, 1 / 9)
    g = DiscreteMeasure(np.arange(6.0))
    lam = minimax_lower_noiseless(Phi, pi, [g], 4)
    s_rho = np.sum(pi * np.diag(dual_kernel(Phi, g)))
    assert minimax_lower_noisy(Phi, pi, [g], 4, 0.0) == 0.0
    assert_allclose(minimax_lower_noisy(Phi, pi, [g], 4, 1e12), lam)
    assert_allclose(minimax_lower_noisy(Phi, pi, [g], 4, np.sqrt(s_rho)), lam, rtol=1e-12)
    assert_allclose(minimax_lower_noisy(Phi, pi, [g], 4, 0.1 * np.sqrt(s_rho)), 0.1 * lam)
    with pytest.raises(InputError):
        minimax_lower_noisy(Phi, pi, [g], 0, 1.0)


def test_relu_dual_tail_decay_slope():
    # rooted tails decay at half the un-rooted exponent 3/2 for relu on the 2-sphere
    N = 2048
    X = fibonacci_sphere(N) @ random_rotation(3, 1).T
    V = fibonacci_sphere(N)
    Phi = FeatureMap("relu")(X, V)
    ns = np.array([16, 32, 64, 128, 256, 512])
    vals = [minimax_lower_noiseless(Phi, np.full(N, 1 / N), [DiscreteMeasure(X)], n) for n in ns]
    slope = np.polyfit(np.log(ns), np.log(vals), 1)[0]
    assert abs(slope + 0.75) <= 0.3 * 0.75


def test_spectrum_csv(tmp_path):
    dec = mercer(np.diag([3.0, 1.0]), np.array([0.5, 0.5]))
    path = save_spectrum(dec, tmp_path / "s.csv")
    lines = path.read_text().strip().splitlines()
    assert lines[0] == "index,eigenvalue,tail_lambda"
    idx, ev, tail = map(float, lines[1].split(","))
    assert idx == 1.0
    assert_allclose(ev, 1.5)
    assert_allclose(tail, np.sqrt(0.5))
