"""Small numerical helpers shared by the solver modules."""

import numpy as np
from scipy.linalg import cho_factor, cho_solve

__all__ = ["conjugate", "psi", "damped_newton", "golden_section"]


def conjugate(p):
    """Hölder conjugate exponent of ``p`` (with 1 <-> inf)."""
    p = float(p)
    if p == 1.0:
        return np.inf
    if np.isinf(p):
        return 1.0
    return p / (p - 1.0)


def psi(s, p):
    """Duality map ``sign(s)|s|^(p-1)`` (gradient of ``|s|^p / p``)."""
    s = np.asarray(s, dtype=float)
    if p == 2.0:
        return s.copy()
    return np.sign(s) * np.abs(s) ** (p - 1.0)


def damped_newton(fun, grad, hess, x0, gtol=1e-13, max_iter=200, stall_iter=8):
    """Minimize a smooth convex function with a Levenberg-damped Newton method.

    Parameters
    ----------
    fun, grad, hess : callable
        Objective, gradient and Hessian.
    x0 : ndarray
        Starting point.
    gtol : float
        Stop once the max-norm of the gradient falls below ``gtol``.
    max_iter : int
        Iteration budget.
    stall_iter : int
        Stop after this many iterations without halving the best gradient norm.

    Returns
    -------
    x : ndarray
        Final iterate.
    gnorm : float
        Max-norm of the gradient at ``x``.
    """
    x = np.array(x0, dtype=float)
    fx = fun(x)
    damp = 1e-12
    best, stalled = np.inf, 0
    for _ in range(max_iter):
        g = grad(x)
        gnorm = np.max(np.abs(g)) if g.size else 0.0
        if gnorm <= gtol:
            return x, gnorm
        # non-smooth points (|x|^p with p < 2 at 0) can stall progress at roundoff
        if gnorm < 0.5 * best:
            best, stalled = gnorm, 0
        else:
            stalled += 1
            if stalled >= stall_iter:
                break
        H = hess(x)
        scale = max(np.max(np.abs(np.diag(H))), 1e-300)
        accepted = False
        for _ in range(60):
            try:
                # convex objectives only, so the damped Hessian is positive definite
                step = cho_solve(cho_factor(H + damp * scale * np.eye(len(x))), -g)
            except np.linalg.LinAlgError:
                damp *= 10.0
                continue
            t = 1.0
            slope = g @ step
            while t > 1e-12:
                x_new = x + t * step
                f_new = fun(x_new)
                if np.isfinite(f_new) and f_new <= fx + 1e-4 * t * slope:
                    accepted = True
                    break
                t *= 0.5
            if accepted:
                break
            damp *= 10.0
        if not accepted:
            break
        moved = np.max(np.abs(x_new - x)) <= 1e-16 * (1.0 + np.max(np.abs(x)))
        x, fx = x_new, f_new
        damp = max(damp * 0.1, 1e-14) if t == 1.0 else damp
        if moved:
            break
    g = grad(x)
    return x, (np.max(np.abs(g)) if g.size else 0.0)


def golden_section(f, lo, hi, tol=1e-10, max_iter=200):
    """Minimize a unimodal scalar function on ``[lo, hi]``.

    Returns the best abscissa found and its value.
    """
    invphi = (np.sqrt(5.0) - 1.0) / 2.0
    a, b = float(lo), float(hi)
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc, fd = f(c), f(d)
    for _ in range(max_iter):
        if b - a <= tol:
            break
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = f(d)
    cands = [(fc, c), (fd, d), (f(a), a), (f(b), b)]
    fbest, xbest = min(cands)
    return xbest, fbest
