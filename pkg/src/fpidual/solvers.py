"""Optimization primitives: lp-ball oracles, Frank-Wolfe least squares, kernel fits."""

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from ._optim import conjugate, damped_newton
from .errors import ConvergenceError, InfeasibleError, InputError

__all__ = [
    "LpBall",
    "FitResult",
    "lmo_lp",
    "project_lp",
    "ball_norm",
    "constrained_ls_fw",
    "min_norm_interpolant",
    "norm_constrained_krr",
    "krr_kkt_residual",
    "predict",
    "PINV_RCOND",
]

PINV_RCOND = 1e-10


@dataclass(frozen=True)
class LpBall:
    """``{c : (sum_j w_j |c_j|^p)^(1/p) <= radius}`` (``w = 1`` when ``weights`` is None)."""

    p: float
    radius: float
    weights: np.ndarray = None

    def __post_init__(self):
        if not self.p >= 1:
            raise InputError("ball exponent must be >= 1")
        if not self.radius > 0:
            raise InputError("ball radius must be positive")
        if self.weights is not None:
            w = np.asarray(self.weights, dtype=float)
            if np.any(w <= 0):
                raise InputError("ball weights must be positive")
            object.__setattr__(self, "weights", w)


def ball_norm(c, ball):
    """Norm of ``c`` in the geometry of ``ball``."""
    c = np.abs(np.asarray(c, dtype=float))
    p = float(ball.p)
    if np.isinf(p):
        return float(np.max(c, initial=0.0))
    w = 1.0 if ball.weights is None else ball.weights
    top = np.max(c, initial=0.0)
    if top == 0:
        return 0.0
    return float(top * np.sum(w * (c / top) ** p) ** (1.0 / p))


def _dual_norm(g, ball):
    """Norm of ``g`` dual to ``ball_norm`` (so that ``min <g, c> = -radius * dual``)."""
    p = float(ball.p)
    if ball.weights is None:
        return ball_norm(g, LpBall(conjugate(p), 1.0))
    if np.isinf(p):
        return float(np.sum(np.abs(g)))
    scaled = np.asarray(g, dtype=float) * ball.weights ** (-1.0 / p)
    return ball_norm(scaled, LpBall(conjugate(p), 1.0))


def lmo_lp(g, ball):
    """Linear minimization oracle ``argmin_{c in ball} <g, c>``.

    ``p = 1`` returns a signed coordinate vertex (lowest index on ties),
    ``p = inf`` a sign vector, otherwise the Hölder-dual direction. A zero
    gradient returns the zero vector.
    """
    g = np.asarray(g, dtype=float)
    if not np.all(np.isfinite(g)):
        raise InputError("gradient must be finite")
    out = np.zeros_like(g)
    if not np.any(g):
        return out
    p, R = float(ball.p), float(ball.radius)
    scale = 1.0 if ball.weights is None or np.isinf(p) else ball.weights ** (-1.0 / p)
    gt = g * scale
    if p == 1.0:
        i = int(np.argmax(np.abs(gt)))
        out[i] = -R * np.sign(gt[i])
    elif np.isinf(p):
        out = -R * np.sign(gt)
    else:
        pc = conjugate(p)
        top = np.max(np.abs(gt))
        u = np.abs(gt) / top
        nrm = np.sum(u**pc) ** (1.0 / pc)
        out = -R * np.sign(gt) * (u / nrm) ** (pc - 1.0)
    return out * scale


def _simplex_threshold(a, R):
    """Threshold ``tau`` with ``sum max(a - tau, 0) = R`` for ``a >= 0`` (sort rule)."""
    u = np.sort(a)[::-1]
    css = np.cumsum(u)
    k = np.arange(1, u.size + 1)
    rho = np.flatnonzero(u - (css - R) / k > 0)[-1]
    return (css[rho] - R) / (rho + 1.0)


def _scalar_roots(c, coef, p, max_iter=200):
    """Solve ``z + coef * z^(p-1) = c`` for ``z in [0, c]`` by safeguarded Newton."""
    z = np.where(coef > 0, c / (1.0 + coef), c)
    lo = np.zeros_like(c)
    hi = c.copy()
    for it in range(max_iter):
        zp = np.maximum(z, 1e-300)
        f = z + coef * zp ** (p - 1.0) - c
        lo = np.where(f < 0, z, lo)
        hi = np.where(f > 0, z, hi)
        df = 1.0 + coef * (p - 1.0) * zp ** (p - 2.0)
        z_new = z - f / df
        bad = ~((z_new > lo) & (z_new < hi))
        z_new = np.where(bad, 0.5 * (lo + hi), z_new)
        done = np.abs(z_new - z) <= 1e-15 * np.maximum(c, 1e-300)
        z = z_new
        if np.all(done | (hi - lo <= 1e-15 * np.maximum(c, 1e-300))):
            return z
    resid = np.max(np.abs(z + coef * z ** (p - 1.0) - c))
    raise ConvergenceError(f"projection Newton did not converge in {max_iter} steps "
                           f"(residual {resid:.3e})")


def project_lp(c, ball):
    """Euclidean projection onto an lp ball.

    ``p = 2`` scales radially, ``p = 1`` uses sort-and-threshold, ``p = inf``
    clips; other ``p > 1`` solve the KKT system coordinatewise by Newton's
    method inside a root search on the multiplier.
    """
    c = np.asarray(c, dtype=float)
    p, R = float(ball.p), float(ball.radius)
    if ball_norm(c, ball) <= R:
        return c.copy()
    a = np.abs(c)
    s = np.sign(c)
    w = np.ones_like(a) if ball.weights is None else ball.weights
    if np.isinf(p):
        return s * np.minimum(a, R)
    if p == 2.0 and ball.weights is None:
        return c * (R / np.linalg.norm(c))
    if p == 1.0:
        if ball.weights is None:
            return s * np.maximum(a - _simplex_threshold(a, R), 0.0)

        def excess(mu):
            return np.sum(w * np.maximum(a - mu * w, 0.0)) - R

        mu = brentq(excess, 0.0, np.max(a / w), xtol=1e-15, rtol=1e-15)
        return s * np.maximum(a - mu * w, 0.0)

    def solve(mu):
        if p == 2.0:
            return a / (1.0 + 2.0 * mu * w)
        return _scalar_roots(a, mu * p * w, p)

    def excess(log_mu):
        z = solve(np.exp(log_mu))
        return np.log(max(np.sum(w * z**p), 1e-300)) / p - np.log(R)

    hi = 0.0
    while excess(hi) > 0:
        hi += 2.0
    lo = -2.0
    while excess(lo) < 0:
        lo -= 2.0
    log_mu = brentq(excess, lo, hi, xtol=1e-14, rtol=1e-15)
    z = solve(np.exp(log_mu))
    z *= R / ball_norm(z, ball)
    return s * z


@dataclass
class FitResult:
    """Solver output.

    Attributes
    ----------
    coefficients : ndarray
    objective : float
        Final objective value.
    iterations : int
    certificate : float
        Frank-Wolfe gap or KKT residual.
    constraint_active : bool
    certified : bool
        Whether the certificate met the requested tolerance.
    history : list of float
        Objective trace.
    """

    coefficients: np.ndarray
    objective: float
    iterations: int
    certificate: float
    constraint_active: bool
    certified: bool = True
    history: list = field(default_factory=list)
    extra: dict = field(default_factory=dict)


def _fw_gap(grad, c, ball):
    return float(grad @ c + ball.radius * _dual_norm(grad, ball))


def constrained_ls_fw(A, y, ball, max_iter=100000, tol=1e-6, c0=None, warm_start=False,
                      record_every=1):
    """Frank-Wolfe for ``min_{c in ball} (1/n) ||y - A c / m||^2``.

    Parameters
    ----------
    A : ndarray, shape (n, m)
        Feature rows ``phi(x_i, v_j)``.
    y : ndarray, shape (n,)
    ball : LpBall
    max_iter : int
    tol : float
        Stop once the Frank-Wolfe gap (an upper bound on suboptimality) is
        at most ``tol``.
    c0 : ndarray, optional
        Feasible starting point (default zero).
    warm_start : bool
        Start from the least-squares solution when it is feasible, and
        otherwise from the minimizer of the multiplier-penalized problem
        whose solution lies on the sphere (found by damped Newton steps and
        a root search on the multiplier). Frank-Wolfe iterations then only
        need to certify or polish that point.

    Returns
    -------
    FitResult
    """
    A = np.asarray(A, dtype=float)
    y = np.asarray(y, dtype=float)
    n, m = A.shape
    if y.shape != (n,):
        raise InputError("y must have one entry per row of A")
    if not tol > 0:
        raise InputError("tol must be positive")
    if warm_start and c0 is None:
        c0 = _ls_warm_start(A / m, y, ball)
    c = np.zeros(m) if c0 is None else np.array(c0, dtype=float)
    if ball_norm(c, ball) > ball.radius * (1 + 1e-12):
        raise InputError("starting point is infeasible")
    r = y - A @ c / m
    obj = float(r @ r) / n
    history = [obj]
    scale = 2.0 / (n * m)
    gap = np.inf
    it = 0
    while it < max_iter:
        grad = -scale * (A.T @ r)
        s = lmo_lp(grad, ball)
        d = s - c
        gap = float(-(grad @ d))
        if gap <= tol:
            break
        q = A @ d / m
        qq = float(q @ q)
        if qq <= 0:
            break
        gamma = min(max(float(r @ q) / qq, 0.0), 1.0)
        c = c + gamma * d
        r = r - gamma * q
        it += 1
        if it % 200 == 0:
            r = y - A @ c / m
        obj = float(r @ r) / n
        if it % record_every == 0:
            history.append(obj)
    r = y - A @ c / m
    obj = float(r @ r) / n
    grad = -scale * (A.T @ r)
    gap = max(_fw_gap(grad, c, ball), 0.0)
    active = ball_norm(c, ball) >= ball.radius * (1 - 1e-6)
    return FitResult(c, obj, it, gap, bool(active), bool(gap <= tol), history,
                     {"warm_start": bool(warm_start)})


def _ls_warm_start(B, y, ball):
    """Accurate starting point for ``min (1/n)||y - B c||^2`` over ``ball``."""
    n, m = B.shape
    p, R = float(ball.p), float(ball.radius)
    c_ls = np.linalg.lstsq(B, y, rcond=None)[0]
    nrm = ball_norm(c_ls, ball)
    if nrm <= R:
        return c_ls
    radial = c_ls * (R / nrm)
    if not 1.0 < p < np.inf:
        return radial
    w = np.ones(m) if ball.weights is None else ball.weights
    G = 2.0 * (B.T @ B) / n
    h = 2.0 * (B.T @ y) / n
    gtol = 1e-13 * max(np.max(np.abs(h)), 1e-300)
    state = {"c": radial}

    def solve(mu):
        def fun(c):
            return 0.5 * c @ G @ c - h @ c + mu * np.sum(w * np.abs(c) ** p) / p

        def grad(c):
            return G @ c - h + mu * w * np.sign(c) * np.abs(c) ** (p - 1.0)

        def hess(c):
            a = np.maximum(np.abs(c), 1e-12 * max(np.max(np.abs(c)), 1e-300))
            return G + np.diag(mu * (p - 1.0) * w * a ** (p - 2.0))

        c, _ = damped_newton(fun, grad, hess, state["c"], gtol=gtol, max_iter=100)
        state["c"] = c
        return c

    def excess(log_mu):
        c = solve(np.exp(log_mu))
        return np.log(max(ball_norm(c, ball), 1e-300)) - np.log(R)

    g0 = _dual_norm(h, ball)
    log_mu = np.log(max(g0, 1e-300)) - (p - 1.0) * np.log(R)
    lo, hi = log_mu - 2.0, log_mu + 2.0
    for _ in range(40):
        if excess(lo) > 0:
            break
        lo -= 2.0
    for _ in range(40):
        if excess(hi) < 0:
            break
        hi += 2.0
    try:
        log_mu = brentq(excess, lo, hi, xtol=1e-9, rtol=1e-12)
    except ValueError:
        return radial
    c = solve(np.exp(log_mu))
    nrm = ball_norm(c, ball)
    return c * (R / nrm) if nrm > 0 else radial


def _eig_psd(K):
    K = np.asarray(K, dtype=float)
    lam, U = np.linalg.eigh(0.5 * (K + K.T))
    keep = lam > PINV_RCOND * max(lam[-1], 0.0) if lam.size else lam > 0
    return lam, U, keep


def min_norm_interpolant(K_SS, y):
    """Minimum-RKHS-norm interpolant coefficients ``beta = K^+ y``.

    Raises
    ------
    InfeasibleError
        If ``y`` is not in the range of ``K_SS`` (relative residual > 1e-9).
    """
    y = np.asarray(y, dtype=float)
    lam, U, keep = _eig_psd(K_SS)
    if K_SS.shape != (y.size, y.size):
        raise InputError("kernel and targets differ in size")
    z = U.T @ y
    beta = U[:, keep] @ (z[keep] / lam[keep])
    res = np.linalg.norm(np.asarray(K_SS) @ beta - y)
    if res > 1e-9 * max(np.linalg.norm(y), 1e-300):
        raise InfeasibleError(f"targets outside the range of the kernel matrix (residual {res:.3e})")
    return beta


def krr_kkt_residual(K, y, beta, radius):
    """KKT diagnostics for ``min (1/n)||K beta - y||^2`` s.t. ``beta' K beta <= radius^2``.

    Returns
    -------
    dict with ``norm``, ``grad_residual`` (max-norm of the loss gradient in
    function space) and ``angle_residual`` (``1 - cos`` of the angle between
    the descent direction and the norm gradient).
    """
    K = np.asarray(K, dtype=float)
    n = y.size
    f = K @ beta
    norm = float(np.sqrt(max(beta @ f, 0.0)))
    g_loss = (2.0 / n) * (f - y)  # gradient of the loss with respect to f on the sample
    # gradients as functions in the RKHS: loss -> K g_loss coefficients g_loss,
    # norm^2 -> 2 beta; compare in the RKHS inner product
    a = -g_loss
    b = beta
    aa = float(a @ K @ a)
    bb = float(b @ K @ b)
    ab = float(a @ K @ b)
    grad_res = float(np.sqrt(max(aa, 0.0)))
    if aa > 0 and bb > 0:
        angle = 1.0 - ab / np.sqrt(aa * bb)
    else:
        angle = 0.0 if aa == 0 else 1.0
    return {"norm": norm, "grad_residual": grad_res, "angle_residual": float(max(angle, 0.0))}


def norm_constrained_krr(K_SS, y, radius):
    """``min_{||f||_H <= radius} (1/n) sum (f(x_i) - y_i)^2`` over ``f = sum beta_i k(x_i, .)``.

    The unconstrained minimum-norm least-squares solution is returned when it
    is feasible. Otherwise the ridge path ``(K + n mu I) beta = y`` is
    bisected in ``log mu`` until ``| ||f_mu||_H - radius | <= 1e-8 radius``.
    """
    K = np.asarray(K_SS, dtype=float)
    y = np.asarray(y, dtype=float)
    n = y.size
    if K.shape != (n, n):
        raise InputError("kernel and targets differ in size")
    if not radius > 0:
        raise InputError("radius must be positive")
    lam, U, keep = _eig_psd(K)
    z = U.T @ y
    lp, zp = lam[keep], z[keep]
    norm0 = float(np.sqrt(np.sum(zp**2 / lp))) if lp.size else 0.0
    if norm0 <= radius:
        beta = U[:, keep] @ (zp / lp)
        mu = 0.0
        active = False
        iters = 0
    else:
        def excess(log_mu):
            nm = n * np.exp(log_mu)
            return np.sqrt(np.sum(lp * zp**2 / (lp + nm) ** 2)) - radius

        lo, hi = np.log(PINV_RCOND * lp.max() / n), np.log(lp.max() / n) + 2.0
        while excess(hi) > 0:
            hi += 5.0
        k = 0
        while excess(lo) < 0:
            lo -= 5.0
            k += 1
            if k > 40:
                raise ConvergenceError("ridge bracket failure: norm stays below radius")
        iters = 0
        while True:
            mid = 0.5 * (lo + hi)
            e = excess(mid)
            iters += 1
            if abs(e) <= 1e-10 * radius or hi - lo < 1e-15:
                break
            if e > 0:
                lo = mid
            else:
                hi = mid
            if iters > 500:
                raise ConvergenceError("ridge bisection did not converge")
        mu = float(np.exp(mid))
        beta = U[:, keep] @ (lp * zp / (lp + n * mu) / lp)
        active = True
    diag = krr_kkt_residual(K, y, beta, radius)
    r = K @ beta - y
    obj = float(r @ r) / n
    if active:
        cert = max(abs(diag["norm"] - radius) / radius, diag["angle_residual"])
        ok = abs(diag["norm"] - radius) <= 1e-8 * radius and diag["angle_residual"] <= 1e-5
    else:
        cert = diag["grad_residual"]
        ok = cert <= 1e-7
    return FitResult(beta, obj, iters, float(cert), active, bool(ok),
                     extra={"mu": mu, **diag})


def predict(coefficients, rows, family="kernel"):
    """Evaluate a fitted model at new atoms.

    Parameters
    ----------
    coefficients : ndarray
        ``beta`` (kernel) or ``c`` (random features).
    rows : ndarray, shape (n_eval, n_coef)
        ``k(x, x_i)`` rows or feature rows ``phi(x, v_j)``.
    family : {"kernel", "features"}
        Features are averaged with the ``1/m`` scaling.
    """
    coefficients = np.asarray(coefficients, dtype=float)
    rows = np.atleast_2d(np.asarray(rows, dtype=float))
    if rows.shape[1] != coefficients.size:
        raise InputError("rows and coefficients disagree in length")
    if family == "kernel":
        return rows @ coefficients
    if family == "features":
        return rows @ coefficients / coefficients.size
    raise InputError(f"unknown family {family!r}")
