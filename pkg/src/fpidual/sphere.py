"""Dot-product kernels on the unit sphere and their harmonic spectra.

A rotation-invariant kernel ``k(x, x') = kappa(x . x')`` on ``S^{d-1}`` is
diagonal in spherical harmonics: degree ``k`` carries eigenvalue ``t_k`` with
multiplicity ``N(d, k)``. For random features ``sigma(x . v)`` with ``v``
uniform on the sphere, ``kappa(t) = E[sigma(u_1) sigma(t u_1 + sqrt(1-t^2) u_2)]``
where ``(u_1, u_2)`` are two coordinates of a uniform point.
"""

import math
import warnings
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
from scipy.special import gammaln, roots_legendre

from .errors import InputError
from .measures import FeatureMap

__all__ = [
    "multiplicity",
    "LegendreBasis",
    "legendre_eval",
    "sphere_weight",
    "DotProductProfile",
    "kappa_profile",
    "SphericalSpectrum",
    "eigenvalues_tk",
    "default_degree",
    "fit_decay_exponent",
    "dyadic",
    "upper_bound_curve",
    "eps_noise",
    "e_conc",
]


NOISE_FLOOR = 1e-14
DEFICIT_FLOOR = 1e-12


def multiplicity(d, k):
    """Dimension of degree-``k`` spherical harmonics on ``S^{d-1}`` (exact integer)."""
    d, k = int(d), int(k)
    if d < 2 or k < 0:
        raise InputError("need d >= 2 and k >= 0")
    if k == 0:
        return 1
    val = Fraction(2 * k + d - 2, k) * math.comb(k + d - 3, k - 1)
    if val.denominator != 1:
        raise ArithmeticError("non-integer multiplicity")
    return int(val)


@dataclass(frozen=True)
class LegendreBasis:
    """Legendre (Gegenbauer) polynomials for ``S^{d-1}`` normalized by ``P_k(1) = 1``."""

    d: int
    max_degree: int

    def __post_init__(self):
        if self.d < 2 or self.max_degree < 0:
            raise InputError("need d >= 2 and max_degree >= 0")

    def coefficients(self, k):
        """``(a, b)`` with ``P_{k+1} = a t P_k - b P_{k-1}``."""
        d = self.d
        if k == 0:
            return 1.0, 0.0
        return (2 * k + d - 2) / (k + d - 2), k / (k + d - 2)

    def evaluate(self, t, degree=None):
        """All ``P_0..P_K`` at ``t``; returns an array of shape ``(K+1,) + t.shape``."""
        K = self.max_degree if degree is None else int(degree)
        if K > self.max_degree:
            raise InputError("degree exceeds max_degree")
        t = np.asarray(t, dtype=float)
        P = np.empty((K + 1,) + t.shape)
        P[0] = 1.0
        if K >= 1:
            P[1] = t
        for k in range(1, K):
            a, b = self.coefficients(k)
            P[k + 1] = a * t * P[k] - b * P[k - 1]
        return P


def legendre_eval(basis, k, t):
    """``P_k(t)`` by the three-term recurrence."""
    return basis.evaluate(t, degree=k)[k]


def sphere_weight(d, t):
    """Density of ``x . v`` for uniform ``v`` on ``S^{d-1}``: ``c_d (1-t^2)^{(d-3)/2}``."""
    t = np.asarray(t, dtype=float)
    logc = gammaln(d / 2.0) - 0.5 * np.log(np.pi) - gammaln((d - 1) / 2.0)
    return np.exp(logc) * (1.0 - t**2) ** ((d - 3) / 2.0)


def _theta_rule(d, n):
    """Nodes ``theta`` in ``(0, pi)`` and weights for ``E[g(x . v)] = sum w g(cos theta)``."""
    x, w = roots_legendre(n)
    theta = 0.5 * np.pi * (x + 1.0)
    w = w * np.sin(theta) ** (d - 2)
    return theta, w / w.sum()


@dataclass(frozen=True)
class DotProductProfile:
    """Kernel profile ``kappa`` on ``[-1, 1]`` for a given activation and dimension.

    Attributes
    ----------
    d : int
    activation : str
    alpha : int
    method : str
        ``"closed"`` (relu, alpha = 1), ``"arc"`` (relu^alpha, one-dimensional
        angular integral) or ``"disk"`` (two-dimensional quadrature).
    nodes : int
        Per-axis quadrature size actually used.
    warning : str or None
        Set when the quadrature did not settle.
    """

    d: int
    activation: str
    alpha: int = 1
    method: str = "disk"
    nodes: int = 64
    warning: str = None
    _fn: object = field(default=None, repr=False, compare=False)

    def __call__(self, t):
        return self._fn(np.clip(np.asarray(t, dtype=float), -1.0, 1.0))

    @property
    def kappa1(self):
        return float(self(np.array([1.0]))[0])


def _relu_closed(d):
    def fn(t):
        th = np.arccos(t)
        return (np.sin(th) + (np.pi - th) * np.cos(th)) / (2.0 * np.pi * d)
    return fn


def _relu_arc(d, alpha, n):
    """relu^alpha profile via the Gaussian reduction.

    With ``g`` standard Gaussian in ``R^d``, homogeneity gives
    ``E_v[...] = E_g[...] / E|g|^{2 alpha}``; the Gaussian expectation reduces
    to a radial moment times an angular integral over the arc where both
    inner products are positive.
    """
    log_moment = alpha * np.log(2.0) + gammaln(d / 2.0 + alpha) - gammaln(d / 2.0)
    radial = 2.0**alpha * math.gamma(alpha + 1)
    x, w = roots_legendre(n)

    def fn(t):
        th = np.arccos(np.atleast_1d(t))
        lo = th - 0.5 * np.pi
        half = 0.5 * (0.5 * np.pi - lo)
        phi = lo[:, None] + half[:, None] * (x[None, :] + 1.0)
        val = (np.cos(phi) * np.cos(phi - th[:, None])).clip(0.0) ** alpha
        ang = half * (val @ w)
        return radial * ang / (2.0 * np.pi) / np.exp(log_moment)

    return fn


def _disk(sigma, d, n):
    """Tensor quadrature for ``E[sigma(u1) sigma(t u1 + s u2)]`` in angle variables."""
    if d == 2:
        x, w = roots_legendre(2 * n)
        phi = np.pi * (x + 1.0)
        w = w / w.sum()
        a = sigma(np.cos(phi))

        def fn(t):
            t = np.atleast_1d(t)
            s = np.sqrt(np.clip(1.0 - t**2, 0.0, None))
            b = sigma(t[:, None] * np.cos(phi)[None, :] + s[:, None] * np.sin(phi)[None, :])
            return b @ (w * a)

        return fn
    psi, wpsi = _theta_rule(d, n)
    x, wchi = roots_legendre(n)
    chi = 0.5 * np.pi * (x + 1.0)
    wchi = wchi * np.sin(chi) ** (d - 3)
    wchi = wchi / wchi.sum()
    u1 = np.cos(psi)
    r = np.sin(psi)
    a = sigma(u1) * wpsi
    c = np.cos(chi)

    def fn(t):
        t = np.atleast_1d(t)
        s = np.sqrt(np.clip(1.0 - t**2, 0.0, None))
        out = np.empty(t.shape)
        for start in range(0, t.size, 64):
            tt = t[start:start + 64, None, None]
            ss = s[start:start + 64, None, None]
            arg = tt * u1[None, :, None] + ss * r[None, :, None] * c[None, None, :]
            out[start:start + 64] = np.einsum("tij,i,j->t", sigma(arg), a, wchi)
        return out

    return fn


def kappa_profile(activation="relu", d=3, alpha=1, nodes=64, method=None, max_nodes=1024):
    """Build the dot-product kernel profile of ``sigma(x . v)`` features.

    Parameters
    ----------
    activation : str or FeatureMap
    d : int
        Ambient dimension (sphere ``S^{d-1}``).
    alpha : int
        relu power.
    nodes : int
        Initial per-axis quadrature size; doubled until values at a probe
        set change by less than 1e-12 relative (warning if 1e-8 is not met).
    method : {None, "closed", "arc", "disk"}
        Force a route; by default relu uses ``"closed"`` for alpha = 1 and
        ``"arc"`` otherwise, other activations use ``"disk"``.
    """
    if isinstance(activation, FeatureMap):
        fmap = activation
    else:
        fmap = FeatureMap(kind=activation, alpha=alpha)
    if fmap.kind == "tabulated":
        raise InputError("a tabulated map has no dot-product profile")
    d = int(d)
    if d < 2:
        raise InputError("need d >= 2")
    kind, alpha = fmap.kind, int(fmap.alpha)
    if method is None:
        method = ("closed" if alpha == 1 else "arc") if kind == "relu" else "disk"
    if method in ("closed", "arc") and kind != "relu":
        raise InputError(f"method {method!r} is only available for relu")
    if method == "closed":
        if alpha != 1:
            raise InputError("closed form only for alpha = 1")
        return DotProductProfile(d, kind, alpha, "closed", 0, None, _relu_closed(d))

    probe = np.cos(np.linspace(0.0, np.pi, 17))
    build = (lambda n: _relu_arc(d, alpha, n)) if method == "arc" else (
        lambda n: _disk(fmap.sigma, d, n))
    n = int(nodes)
    fn = build(n)
    old = fn(probe)
    change = np.inf
    while change >= 1e-12 and 2 * n <= max_nodes:
        fn2 = build(2 * n)
        new = fn2(probe)
        change = np.max(np.abs(new - old)) / max(np.max(np.abs(new)), 1e-300)
        n, fn, old = 2 * n, fn2, new
    warn = None
    if change > 1e-8:
        warn = f"kappa quadrature unsettled at {n} nodes (change {change:.1e})"
        warnings.warn(warn, RuntimeWarning, stacklevel=2)
    return DotProductProfile(d, kind, alpha, method, n, warn, fn)


def default_degree(profile, deficit_tol=1e-6, cap=400):
    """Smallest degree ``K`` whose trace deficit is below ``deficit_tol`` (capped)."""
    for K in (8, 16, 32, 64, 128, 256, cap):
        K = min(K, cap)
        spec = eigenvalues_tk(profile, K)
        if spec.deficit < deficit_tol:
            Ns = np.array([float(multiplicity(profile.d, k)) for k in range(K + 1)])
            partial = profile.kappa1 - np.cumsum(Ns * spec.t)
            ok = np.flatnonzero(partial < deficit_tol)
            return int(ok[0]) if ok.size else K
        if K == cap:
            return cap
    return cap


@dataclass(frozen=True)
class SphericalSpectrum:
    """Harmonic spectrum of a dot-product kernel truncated at degree ``K``.

    Attributes
    ----------
    d : int
    t : ndarray, shape (K+1,)
        Eigenvalues per degree.
    N : ndarray, shape (K+1,)
        Multiplicities (float copies of the exact integers).
    kappa1 : float
        ``kappa(1)``, the full trace.
    nodes : int
        Quadrature size used for ``t``.
    """

    d: int
    t: np.ndarray
    N: np.ndarray
    kappa1: float
    nodes: int = 0

    @property
    def K(self):
        return self.t.size - 1

    @property
    def partial_trace(self):
        return float(np.sum(self.N * self.t))

    @property
    def deficit(self):
        """``kappa(1) - sum_{k <= K} N(d,k) t_k``, zero below summation round-off."""
        gap = self.kappa1 - self.partial_trace
        return gap if gap > DEFICIT_FLOOR * abs(self.kappa1) else 0.0

    @property
    def count(self):
        """Number of eigenvalues (with multiplicity) represented."""
        return float(np.sum(self.N))

    def _blocks(self):
        order = np.argsort(-self.t, kind="stable")
        t = self.t[order]
        N = self.N[order]
        C = np.cumsum(N)
        # suffix[b] = sum of mass strictly after block b
        mass = N * t
        suffix = np.concatenate([np.cumsum(mass[::-1])[::-1][1:], [0.0]])
        return t, N, C, suffix

    def expanded(self, max_len=None):
        """Eigenvalues repeated by multiplicity, non-increasing."""
        t, N, _, _ = self._blocks()
        if max_len is not None and self.count > max_len:
            reps = np.minimum(N, max_len).astype(int)
            out = np.repeat(t, reps)[: int(max_len)]
            return out
        return np.repeat(t, N.astype(int))

    def tail_sum(self, m, include_deficit=True):
        """``sum_{j > m} lambda_j`` (vectorized in ``m``).

        The mass of degrees above ``K`` (the trace deficit) is added when
        ``include_deficit``; it is exact for ``m`` inside the tabulated range
        as long as the omitted degrees carry the smallest eigenvalues.
        Values of ``m`` beyond the tabulated count give ``nan``.
        """
        m = np.asarray(m, dtype=float)
        t, _, C, suffix = self._blocks()
        b = np.searchsorted(C, m, side="right")
        inside = b < C.size
        bb = np.minimum(b, C.size - 1)
        val = np.where(inside, (C[bb] - m) * t[bb] + suffix[bb], np.nan)
        val = np.where(m == C[-1], 0.0, val)
        if include_deficit:
            val = val + self.deficit
        return np.clip(val, 0.0, None)

    def tail(self, m, include_deficit=True):
        """``Lambda(m) = sqrt(sum_{j > m} lambda_j)``."""
        return np.sqrt(self.tail_sum(m, include_deficit))


def eigenvalues_tk(profile, K, nodes=None, max_nodes=16384, rtol=1e-10):
    """Per-degree eigenvalues ``t_k = E[kappa(x . v) P_k(x . v)]`` for ``k <= K``.

    The expectation over ``x . v`` is computed in the angle ``theta`` with
    Gauss-Legendre nodes (start ``4(K+1)``, doubled until the largest change
    is below ``rtol`` times ``max t_k``).
    """
    d, K = profile.d, int(K)
    if K < 0:
        raise InputError("K must be nonnegative")
    basis = LegendreBasis(d, K)
    n = int(nodes) if nodes is not None else 4 * (K + 1)

    def compute(n):
        theta, w = _theta_rule(d, n)
        tt = np.cos(theta)
        P = basis.evaluate(tt)
        return P @ (w * profile(tt))

    t_old = compute(n)
    while 2 * n <= max_nodes:
        t_new = compute(2 * n)
        change = np.max(np.abs(t_new - t_old)) / max(np.max(np.abs(t_new)), 1e-300)
        n, t_old = 2 * n, t_new
        if change < rtol:
            break
    t = t_old
    tmax = max(np.max(t), 0.0)
    if np.any(t < -1e-10 * tmax):
        k = int(np.argmin(t))
        raise ArithmeticError(f"negative eigenvalue t_{k} = {t[k]:.3e}; quadrature failure")
    # values this small are indistinguishable from quadrature round-off
    noise = NOISE_FLOOR * max(abs(profile.kappa1), tmax)
    t = np.where(t < noise, 0.0, t)
    N = np.array([float(multiplicity(d, k)) for k in range(K + 1)])
    return SphericalSpectrum(d, t, N, profile.kappa1, n)


def dyadic(lo=16, hi=4096):
    """Powers of two from ``lo`` to ``hi`` inclusive."""
    return 2 ** np.arange(int(np.log2(lo)), int(np.log2(hi)) + 1)


def fit_decay_exponent(spectrum, m_values=None, rooted=True, floor=1e-13):
    """Least-squares slope of the log tail against ``log m``.

    Parameters
    ----------
    spectrum : SphericalSpectrum, SpectralDecomposition or array
        Array input is read as an eigenvalue list.
    m_values : array_like, optional
        Defaults to dyadic ``m`` in ``[16, 4096]``.
    rooted : bool
        Fit ``Lambda(m) = sqrt(tail)`` (default) or the un-rooted tail sum.
    floor : float
        Tail sums at or below ``floor`` times the total trace are treated as
        underflowed and dropped.

    Returns
    -------
    slope, intercept, r2 : float
    """
    m = dyadic() if m_values is None else np.asarray(m_values, dtype=float)
    if isinstance(spectrum, SphericalSpectrum):
        tails = spectrum.tail_sum(m)
        total = spectrum.kappa1
    else:
        lam = getattr(spectrum, "eigenvalues", spectrum)
        lam = np.clip(np.sort(np.asarray(lam, dtype=float))[::-1], 0.0, None)
        suffix = np.concatenate([np.cumsum(lam[::-1])[::-1], [0.0]])
        mi = m.astype(int)
        tails = np.where(mi < suffix.size, suffix[np.minimum(mi, suffix.size - 1)], np.nan)
        total = suffix[0]
    ok = np.isfinite(tails) & (tails > floor * total)
    if ok.sum() < 4:
        raise InputError("fewer than 4 usable tail values for the fit")
    y = np.log(tails[ok])
    if rooted:
        y = 0.5 * y
    x = np.log(m[ok])
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    ss = np.sum((y - y.mean()) ** 2)
    r2 = 1.0 - np.sum(resid**2) / ss if ss > 0 else 1.0
    return float(slope), float(intercept), float(r2)


def eps_noise(n, sigma, delta, kappa1):
    """``(sigma^2 kappa(1) (1 + log(1/delta)) / n)^{1/4}``."""
    return (sigma**2 * kappa1 * (1.0 + np.log(1.0 / delta)) / n) ** 0.25


def e_conc(n, delta, kappa1):
    """``sqrt((kappa(1)^2 log^3 n + kappa(1) log(1/delta)) / n)``."""
    return np.sqrt((kappa1**2 * np.log(n) ** 3 + kappa1 * np.log(1.0 / delta)) / n)


def upper_bound_curve(spectrum, L_rule=None, n=1000, sigma=1.0, delta=0.05,
                      m_max=None, grid_size=4000):
    """Minimize ``sqrt(q_L L(m)) + sqrt(m) (eps(n,sigma,delta) + e(n,delta))`` over ``m``.

    Parameters
    ----------
    spectrum : SphericalSpectrum
        Supplies ``d``, ``kappa(1)`` and, without ``L_rule``, the tail sum
        used as ``L``.
    L_rule : callable, optional
        Non-increasing function of ``m`` (vectorized).
    m_max : int, optional
        Largest tabulated ``m`` (defaults to the spectrum's count when
        ``L_rule`` is None, else ``1e8``).

    Returns
    -------
    bound : float
    m_star : int
    q_L : float
    """
    d = spectrum.d
    if L_rule is None:
        L_rule = spectrum.tail_sum
        if m_max is None:
            m_max = spectrum.count - 1
    if m_max is None:
        m_max = 1e8
    m = np.unique(np.round(np.geomspace(1.0, float(m_max), grid_size)))
    L = np.asarray(L_rule(m), dtype=float)
    if np.any(np.diff(L) > 1e-12 * np.max(np.abs(L))):
        raise InputError("L_rule must be non-increasing")
    k = m[(d + 1) * m <= m_max]
    Lk, Lk2 = np.asarray(L_rule(k), float), np.asarray(L_rule((d + 1) * k), float)
    good = (Lk2 > 1e-14 * np.max(L)) & np.isfinite(Lk2)
    if not np.any(good):
        raise InputError("tabulated range too short to evaluate q_L")
    qL = float(np.max(Lk[good] / Lk2[good]))
    slack = eps_noise(n, sigma, delta, spectrum.kappa1) + e_conc(n, delta, spectrum.kappa1)
    vals = np.sqrt(qL * np.clip(L, 0.0, None)) + np.sqrt(m) * slack
    i = int(np.argmin(vals))
    return float(vals[i]), int(m[i]), qL
