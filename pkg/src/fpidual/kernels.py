"""Primal and dual kernels, weighted Mercer decompositions and spectral tails."""

from dataclasses import dataclass

import numpy as np

from .errors import InputError
from .measures import DiscreteMeasure

__all__ = [
    "PSD_TOL",
    "SpectralDecomposition",
    "primal_kernel",
    "dual_kernel",
    "check_kernel",
    "mercer",
    "spectral_tail",
    "tail_sum",
    "minimax_lower_noiseless",
    "minimax_lower_noisy",
]

PSD_TOL = 1e-10


def _w(measure):
    return measure.weights if isinstance(measure, DiscreteMeasure) else np.asarray(measure, float)


def primal_kernel(Phi, pi):
    """``K[i, l] = sum_j pi_j Phi[i, j] Phi[l, j]``."""
    Phi = np.asarray(Phi, dtype=float)
    w = _w(pi)
    if Phi.shape[1] != w.shape[0]:
        raise InputError(f"Phi has {Phi.shape[1]} columns but pi has {w.shape[0]} atoms")
    K = (Phi * w) @ Phi.T
    return 0.5 * (K + K.T)


def dual_kernel(Phi, gamma):
    """Kernel on the weight atoms, ``sum_i gamma_i Phi[i, v] Phi[i, v']``."""
    Phi = np.asarray(Phi, dtype=float)
    if Phi.shape[0] != _w(gamma).shape[0]:
        raise InputError(f"Phi has {Phi.shape[0]} rows but gamma has {_w(gamma).shape[0]} atoms")
    return primal_kernel(Phi.T, gamma)


def check_kernel(K, psd_tol=PSD_TOL):
    """Validate symmetry and positive semidefiniteness of a kernel matrix."""
    K = np.asarray(K, dtype=float)
    if K.ndim != 2 or K.shape[0] != K.shape[1]:
        raise InputError("kernel matrix must be square")
    scale = max(np.max(np.abs(K)), 1e-300)
    if np.max(np.abs(K - K.T)) > 1e-12 * scale:
        raise InputError("kernel matrix is not symmetric")
    ev = np.linalg.eigvalsh(0.5 * (K + K.T))
    if ev.size and ev[0] < -psd_tol * max(ev[-1], 0.0):
        raise InputError(f"kernel matrix is not PSD (min eigenvalue {ev[0]:.3e})")
    return K


@dataclass(frozen=True)
class SpectralDecomposition:
    """Eigenpairs of a kernel integral operator on a finite measure.

    Attributes
    ----------
    eigenvalues : ndarray
        Non-increasing, clamped at zero.
    eigenvectors : ndarray, shape (N, r)
        Eigenfunctions on all atoms, orthonormal in ``L^2(measure)``.
        Off the support they are extended by ``e(x) = K[x, S] w_S e_S / mu``
        for positive eigenvalues and set to zero otherwise.
    measure : DiscreteMeasure or ndarray
    """

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    measure: object

    @property
    def trace(self):
        return float(np.sum(self.eigenvalues))

    def tails(self):
        """Vector of ``Lambda(m)`` for ``m = 0..r``."""
        return _tails(self.eigenvalues)


def mercer(K, gamma, psd_tol=PSD_TOL):
    """Eigendecomposition of the integral operator of ``K`` in ``L^2(gamma)``.

    Diagonalizes ``D^{1/2} K D^{1/2}`` on the support of ``gamma`` and maps
    eigenvectors back with ``D^{-1/2}``.
    """
    K = np.asarray(K, dtype=float)
    w = _w(gamma)
    if K.shape != (w.shape[0], w.shape[0]):
        raise InputError("kernel and measure sizes disagree")
    S = np.flatnonzero(w > 0)
    sq = np.sqrt(w[S])
    A = sq[:, None] * K[np.ix_(S, S)] * sq[None, :]
    mu, U = np.linalg.eigh(0.5 * (A + A.T))
    mu, U = mu[::-1], U[:, ::-1]
    top = max(mu[0], 0.0) if mu.size else 0.0
    if mu.size and mu[-1] < -psd_tol * max(top, 1e-300) and top > 0:
        raise InputError(f"kernel not PSD on the measure support (eigenvalue {mu[-1]:.3e})")
    mu = np.where(mu < 0, 0.0, mu)
    E = np.zeros((w.shape[0], mu.size))
    E[S] = U / sq[:, None]
    off = np.setdiff1d(np.arange(w.shape[0]), S)
    if off.size:
        pos = mu > psd_tol * max(top, 1e-300)
        E[np.ix_(off, np.flatnonzero(pos))] = (
            K[np.ix_(off, S)] @ (w[S, None] * E[S][:, pos]) / mu[pos]
        )
    return SpectralDecomposition(mu, E, gamma)


def _tails(eigenvalues):
    lam = np.clip(np.asarray(eigenvalues, dtype=float), 0.0, None)
    # suffix sums from the small end keep relative accuracy of small tails
    suffix = np.concatenate([np.cumsum(lam[::-1])[::-1], [0.0]])
    return np.sqrt(suffix)


def tail_sum(decomp, m):
    """Un-rooted tail ``sum_{i > m} mu_i``."""
    lam = np.clip(decomp.eigenvalues if isinstance(decomp, SpectralDecomposition)
                  else np.asarray(decomp, float), 0.0, None)
    if m < 0:
        raise InputError("m must be nonnegative")
    return float(np.sum(lam[int(m):][::-1]))


def spectral_tail(decomp, m):
    """``Lambda(m) = sqrt(sum_{i > m} mu_i)`` (eigenvalues indexed from 1)."""
    return float(np.sqrt(tail_sum(decomp, m)))


def minimax_lower_noiseless(Phi, pi, gamma_candidates, m):
    """Largest dual-kernel tail over a family of input measures.

    For each candidate ``gamma`` the dual kernel is decomposed in
    ``L^2(pi)`` and its tail at ``m`` is taken. The maximum over a finite
    family is a lower estimate of the supremum over all input measures.
    """
    cands = list(gamma_candidates)
    if not cands:
        raise InputError("need at least one candidate measure")
    return max(spectral_tail(mercer(dual_kernel(Phi, g), pi), m) for g in cands)


def minimax_lower_noisy(Phi, pi, gamma_candidates, n, sigma):
    """Noisy lower bound ``min(1, sigma / sqrt(s_rho)) * Lambda_tilde(n)``.

    ``s_rho = sum_j pi_j k_rho(v_j, v_j)`` uses the first candidate as the
    data distribution ``rho``.
    """
    cands = list(gamma_candidates)
    if not cands:
        raise InputError("need at least one candidate measure")
    if n < 1 or sigma < 0:
        raise InputError("need n >= 1 and sigma >= 0")
    Phi = np.asarray(Phi, dtype=float)
    rho = _w(cands[0])
    s_rho = float(np.sum(_w(pi) * (rho @ Phi**2)))
    lam = minimax_lower_noiseless(Phi, pi, cands, n)
    if sigma == 0 or s_rho == 0:
        return 0.0 if sigma == 0 else lam
    return min(1.0, sigma / np.sqrt(s_rho)) * lam
