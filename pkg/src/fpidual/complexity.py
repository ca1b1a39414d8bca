"""Information-based complexity of RKHS and F_{p,pi} balls on finite grids.

The complexity of a ball ``B`` at tolerance ``eps`` is

    I = sup { ||f||_{q, rho} : f in B, ||f||_{r, nu} <= eps }.

For RKHS balls with ``r = 2`` the feasible set is an intersection of two
ellipsoids and both ``q = 2`` and ``q = inf`` are solved exactly through a
one-parameter Lagrange dual. General ``F_{p,pi}`` balls are handled by a
multi-start ascent whose linear steps are exact convex programs.
"""

from dataclasses import dataclass, field

import numpy as np

from ._inner import RANK_RCOND, InnerProblem, ellipsoid_pair_quadratic, ellipsoid_pair_support, holder_direction, wnorm
from .errors import InputError
from .kernels import check_kernel

__all__ = [
    "DEFAULT_RESTARTS",
    "ComplexityQuery",
    "ComplexityResult",
    "power_function",
    "i_complexity",
    "i_complexity_rkhs",
    "i_complexity_fppi",
    "minimax_lower_noisy_generic",
    "rademacher_mc",
    "restart_rng",
]

DEFAULT_RESTARTS = 32
PINV_RCOND = 1e-10


def _weights(m, n=None):
    if m is None:
        return None if n is None else np.full(n, 1.0 / n)
    w = m.weights if hasattr(m, "weights") else np.asarray(m, dtype=float)
    return np.asarray(w, dtype=float)


def restart_rng(seed, index):
    """Independent generator for restart ``index`` of a run seeded by ``seed``."""
    return np.random.default_rng(np.random.SeedSequence([int(seed), int(index)]))


@dataclass
class ComplexityQuery:
    """Inputs of an I-complexity evaluation.

    Exactly one of ``K`` (RKHS ball) or ``Phi`` (F_{p,pi} ball) is given.

    Parameters
    ----------
    nu : DiscreteMeasure, ndarray or None
        Fitting measure on the grid; ``None`` (or zero weights) means no
        fitting constraint.
    eps : float
        Fitting tolerance.
    q : float
        Prediction exponent, ``inf`` for the grid maximum.
    rho : DiscreteMeasure, ndarray or None
        Prediction measure; uniform on the grid when omitted.
    r : float
        Fitting exponent, ``r > 1``.
    K : ndarray, optional
        Kernel matrix on the grid.
    Phi, pi, p : optional
        Feature matrix, weight measure and coefficient exponent.
    radius : float
        Radius of the space ball.
    """

    nu: object = None
    eps: float = 0.0
    q: float = np.inf
    rho: object = None
    r: float = 2.0
    K: np.ndarray = None
    Phi: np.ndarray = None
    pi: object = None
    p: float = 2.0
    radius: float = 1.0

    def __post_init__(self):
        if (self.K is None) == (self.Phi is None):
            raise InputError("give exactly one of K or Phi")
        if not self.eps >= 0:
            raise InputError("eps must be nonnegative")
        if not self.r > 1:
            raise InputError("fitting exponent r must exceed 1")
        if not self.q >= 1:
            raise InputError("prediction exponent q must be >= 1")
        if not self.radius > 0:
            raise InputError("radius must be positive")
        if self.Phi is not None and not (self.p >= 1):
            raise InputError("coefficient exponent p must be at least 1")
        N = self.grid_size
        self.nu_w = np.zeros(N) if self.nu is None else _weights(self.nu)
        self.rho_w = _weights(self.rho, N)
        if self.nu_w.shape != (N,) or self.rho_w.shape != (N,):
            raise InputError("measures must live on the evaluation grid")

    @property
    def space(self):
        return "rkhs" if self.K is not None else "fp"

    @property
    def grid_size(self):
        return (self.K if self.K is not None else self.Phi).shape[0]

    def prediction_norm(self, f):
        return wnorm(np.asarray(f)[self.rho_w > 0], self.rho_w[self.rho_w > 0], self.q)

    def fit_norm(self, f):
        S = self.nu_w > 0
        return wnorm(np.asarray(f)[S], self.nu_w[S], self.r)

    def with_(self, **kw):
        fields = dict(nu=self.nu, eps=self.eps, q=self.q, rho=self.rho, r=self.r, K=self.K,
                      Phi=self.Phi, pi=self.pi, p=self.p, radius=self.radius)
        fields.update(kw)
        return ComplexityQuery(**fields)


@dataclass
class ComplexityResult:
    """Value, feasible witness on the grid, and how it was obtained."""

    value: float
    witness: np.ndarray
    certified: bool
    method: str
    extra: dict = field(default_factory=dict)


def power_function(K, S, x):
    """``sqrt(k(x,x) - k_x(S)^T K_SS^+ k_x(S))``, clamped at zero.

    Pseudo-inverse cutoff ``1e-10`` relative to the largest eigenvalue.
    """
    K = np.asarray(K, dtype=float)
    S = np.asarray(S, dtype=int).ravel()
    kxx = K[x, x]
    if S.size == 0:
        return float(np.sqrt(max(kxx, 0.0)))
    kS = K[S, x]
    val = kxx - kS @ np.linalg.pinv(K[np.ix_(S, S)], rcond=PINV_RCOND, hermitian=True) @ kS
    return float(np.sqrt(max(val, 0.0)))


def _factor(K):
    """``K = B B^T`` on the numerical range of ``K``."""
    ev, U = np.linalg.eigh(0.5 * (K + K.T))
    top = max(ev[-1], 0.0) if ev.size else 0.0
    keep = ev > PINV_RCOND * top if top > 0 else np.zeros(ev.size, bool)
    return U[:, keep] * np.sqrt(ev[keep])


def i_complexity(query, restarts=DEFAULT_RESTARTS, seed=0):
    """Dispatch to the RKHS or F_{p,pi} route."""
    if query.space == "rkhs":
        return i_complexity_rkhs(query, restarts=restarts, seed=seed)
    return i_complexity_fppi(query, restarts=restarts, seed=seed)


def i_complexity_rkhs(query, restarts=DEFAULT_RESTARTS, seed=0):
    """I-complexity of an RKHS ball.

    With ``f = B z`` and ``||z|| <= radius`` the fitting constraint is the
    ellipsoid ``z^T B^T D_nu B z <= eps^2``. ``q = inf`` takes the largest
    two-ellipsoid support value over grid points, ``q = 2`` the largest
    quadratic value. Other ``(q, r)`` fall back to the F_{2,pi} route.
    """
    if query.space != "rkhs":
        raise InputError("query is not an RKHS query")
    K = check_kernel(query.K)
    B = _factor(K)
    N = K.shape[0]
    if B.shape[1] == 0:
        return ComplexityResult(0.0, np.zeros(N), True, "rkhs-degenerate")
    if query.r != 2 or query.q not in (2.0, np.inf):
        rank = B.shape[1]
        fq = query.with_(K=None, Phi=B * np.sqrt(rank), pi=np.full(rank, 1.0 / rank), p=2.0)
        res = i_complexity_fppi(fq, restarts=restarts, seed=seed)
        res.method = "rkhs-as-fp:" + res.method
        return res
    R, eps = query.radius, query.eps
    S = query.nu_w > 0
    Bs = np.sqrt(query.nu_w[S])[:, None] * B[S]
    if Bs.shape[0]:
        _, sv, Vt = np.linalg.svd(Bs, full_matrices=True)
        gvals = np.zeros(B.shape[1])
        gvals[: sv.size] = sv**2
    else:
        Vt, gvals = np.eye(B.shape[1]), np.zeros(B.shape[1])
        eps = np.inf
    Bv = B @ Vt.T
    if query.q == np.inf:
        rows = np.flatnonzero(query.rho_w > 0)
        best = (-1.0, None, 0.0, 0)
        for x in rows:
            val, z, bound = ellipsoid_pair_support(Bv[x], gvals, R, eps)
            if val > best[0]:
                best = (val, z, bound, x)
        _, z, bound, x = best
        f = Bv @ z
        value = query.prediction_norm(f)
        extra = {"bound": bound, "argmax": int(x)}
    else:
        Br = np.sqrt(query.rho_w)[:, None] * Bv
        val, z, bound = ellipsoid_pair_quadratic(Br.T @ Br, gvals, R, eps)
        f = Bv @ z
        value = query.prediction_norm(f)
        bound = float(np.sqrt(max(bound, 0.0)))
        extra = {"bound": bound}
    certified = bound - value <= 1e-8 * max(1.0, bound)
    return ComplexityResult(float(value), f, bool(certified), f"rkhs-q{query.q:g}", extra)


def _fp_inner(query):
    return InnerProblem(query.Phi, _weights(query.pi, query.Phi.shape[1]), query.nu_w,
                        query.p, query.r, query.eps / query.radius)


def _fp_closed_form(query):
    """``p = q = 2``, ``eps = 0``: top singular value on the constraint nullspace."""
    Phi = np.asarray(query.Phi, dtype=float)
    w = _weights(query.pi, Phi.shape[1])
    J = w > 0
    A = Phi[:, J] * np.sqrt(w[J])[None, :]
    S = query.nu_w > 0
    if np.any(S):
        _, s, Vt = np.linalg.svd(A[S], full_matrices=True)
        rank = int(np.sum(s > RANK_RCOND * s[0])) if s.size and s[0] > 0 else 0
        Nb = Vt[rank:].T
    else:
        Nb = np.eye(A.shape[1])
    a = np.zeros(Phi.shape[1])
    if Nb.shape[1] == 0:
        return 0.0, np.zeros(Phi.shape[0]), a
    C = np.sqrt(query.rho_w)[:, None] * (A @ Nb)
    _, s, Vt = np.linalg.svd(C, full_matrices=False)
    u = query.radius * (Nb @ Vt[0])
    a[J] = u / np.sqrt(w[J])
    f = A @ u
    return float(query.radius * s[0]), f, a


def _ascend(inner, query, b0, max_iter=500, rtol=1e-12):
    """Alternate Hölder steps on the prediction side with exact support steps."""
    Phi = np.asarray(query.Phi, dtype=float)[:, inner.J]
    rho = query.rho_w
    keep = rho > 0
    b = b0
    best_val, best_a, c = -1.0, None, None
    for _ in range(max_iter):
        g = Phi.T @ (rho * b)
        _, a, _, c = inner.dual_warm(g, c)
        a = inner.make_feasible(a)
        f = Phi @ (inner.w * a)
        val = wnorm(f[keep], rho[keep], query.q)
        if val <= best_val * (1 + rtol):
            break
        best_val, best_a = val, a
        b = np.zeros_like(rho)
        b[keep] = holder_direction(f[keep], rho[keep], query.q)
    return best_val, best_a


def i_complexity_fppi(query, restarts=DEFAULT_RESTARTS, seed=0):
    """I-complexity of an F_{p,pi} ball.

    ``p = q = 2`` with ``eps = 0`` is solved in closed form (certified).
    Otherwise each restart draws a random prediction-side direction and
    ascends; every step is a convex support problem solved exactly, so
    values increase monotonically. The best witness is returned as a lower
    estimate.
    """
    if query.space != "fp":
        raise InputError("query is not an F_{p,pi} query")
    if query.p == 2 and query.q == 2 and query.eps == 0:
        val, f, a = _fp_closed_form(query)
        return ComplexityResult(val, f, True, "fp-svd", {"coefficients": a})
    Phi = np.asarray(query.Phi, dtype=float)
    inner = _fp_inner(query)
    N = Phi.shape[0]
    best_val, best_a = -1.0, None
    values = []
    for k in range(restarts):
        rng = restart_rng(seed, k)
        b0 = rng.standard_normal(N)
        val, a = _ascend(inner, query, b0)
        values.append(val)
        if val > best_val:
            best_val, best_a = val, a
    a_full = np.zeros(Phi.shape[1])
    a_full[inner.J] = query.radius * best_a
    f = Phi[:, inner.J] @ (inner.w * a_full[inner.J])
    return ComplexityResult(query.prediction_norm(f), f, False, "fp-multistart",
                            {"coefficients": a_full, "restart_values": np.array(values) * query.radius})


def minimax_lower_noisy_generic(query, n, sigma, restarts=DEFAULT_RESTARTS, seed=0):
    """Complexity with the fitting measure set to the prediction measure and ``eps = sigma / sqrt(n)``."""
    if n < 1 or sigma < 0:
        raise InputError("need n >= 1 and sigma >= 0")
    q = query.with_(nu=query.rho_w, eps=sigma / np.sqrt(n))
    return i_complexity(q, restarts=restarts, seed=seed).value


def rademacher_mc(Phi, q, rho, sample, draws=1000, seed=0):
    """Monte-Carlo Rademacher average ``(1/n) E ||sum_i xi_i phi(., v_i)||_{q, rho}``.

    Parameters
    ----------
    Phi : ndarray, shape (N, M)
        Feature matrix on the input grid.
    q : float
    rho : DiscreteMeasure or ndarray
    sample : array of int
        Indices of the drawn weight atoms ``v_1..v_n``.
    draws : int
        Number of sign vectors, at least 100.

    Returns
    -------
    mean, stderr : float
    """
    if draws < 100:
        raise InputError("need at least 100 draws")
    Phi = np.asarray(Phi, dtype=float)
    w = _weights(rho)
    idx = np.asarray(sample, dtype=int)
    n = idx.size
    if n == 0:
        raise InputError("empty weight sample")
    rng = np.random.default_rng(seed)
    xi = rng.choice([-1.0, 1.0], size=(draws, n))
    F = xi @ Phi[:, idx].T / n
    keep = w > 0
    vals = np.array([wnorm(row[keep], w[keep], q) for row in F])
    return float(vals.mean()), float(vals.std(ddof=1) / np.sqrt(draws))
