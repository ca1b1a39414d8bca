"""Convex inner problems shared by the complexity and duality modules.

For a function ``g`` on the weight atoms the primal problem is

    P(g) = min_c ||g - Phi^T D_nu c||_{p', pi} + eps * ||c||_{r', nu}

and its dual is the support value

    max <g, a>_pi   subject to ||a||_{p, pi} <= 1,  ||Phi D_pi a||_{r, nu} <= eps.

Everything is restricted to the supports of ``pi`` and ``nu``.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq, linprog, minimize

from ._optim import conjugate, golden_section, psi
from .errors import InputError

RANK_RCOND = 1e-10
CONIC_GAP_TOL = 1e-9
LOG_KAPPA_SPAN = 40.0


def wnorm(x, w, p):
    """Weighted ``(sum w |x|^p)^(1/p)``; ``p = inf`` is the max over entries."""
    x = np.abs(np.asarray(x, dtype=float))
    if x.size == 0:
        return 0.0
    top = np.max(x)
    if top == 0:
        return 0.0
    if np.isinf(p):
        return float(top)
    return float(top * np.sum(w * (x / top) ** p) ** (1.0 / p))


def holder_direction(x, w, p):
    """Maximizer of ``<b, x>_w`` over ``||b||_{p', w} <= 1``, with ``p`` the exponent of ``x``.

    ``p = inf`` picks a signed point mass ``delta / w`` at the largest entry.
    """
    x = np.asarray(x, dtype=float)
    b = np.zeros_like(x)
    nrm = wnorm(x, w, p)
    if nrm == 0:
        return b
    if np.isinf(p):
        i = int(np.argmax(np.abs(x)))
        b[i] = np.sign(x[i]) / w[i]
        return b
    if p == 1.0:
        return np.sign(x)
    return psi(x / nrm, p)


# ---------------------------------------------------------------- two ellipsoids


def _pair_curve(beta2, gvals, R, eps):
    def phi(log_kappa):
        k = np.exp(log_kappa)
        m = 1.0 / R**2 + k * gvals / eps**2
        return (1.0 + k) * float(np.sum(beta2 / m))

    return phi


def ellipsoid_pair_support(beta, gvals, R=1.0, eps=1.0, null_tol=RANK_RCOND):
    """``max beta^T z`` over ``||z|| <= R`` and ``sum g_i z_i^2 <= eps^2``.

    Coordinates are taken in an eigenbasis of the second quadratic form.
    The Lagrange dual is reduced to one multiplier ratio ``kappa`` and
    minimized by golden section in ``log kappa``.

    Returns
    -------
    value : float
        ``beta^T z`` of the feasible witness.
    z : ndarray
        Feasible witness.
    bound : float
        Dual upper bound; ``bound - value`` certifies the witness.
    """
    beta = np.asarray(beta, dtype=float)
    gvals = np.clip(np.asarray(gvals, dtype=float), 0.0, None)
    gmax = np.max(gvals, initial=0.0)
    null = gvals <= null_tol * gmax if gmax > 0 else np.ones_like(gvals, dtype=bool)
    if not np.any(beta):
        return 0.0, np.zeros_like(beta), 0.0
    if eps == 0:
        zb = np.where(null, beta, 0.0)
        nb = np.linalg.norm(zb)
        if nb == 0:
            return 0.0, np.zeros_like(beta), 0.0
        return R * nb, R * zb / nb, R * nb
    if np.isinf(eps) or np.sum(gvals * beta**2) * R**2 <= eps**2 * np.sum(beta**2):
        z = R * beta / np.linalg.norm(beta)
        if np.isinf(eps) or gvals @ z**2 <= eps**2:
            v = R * np.linalg.norm(beta)
            return v, z, v
    beta2 = beta**2
    phi = _pair_curve(beta2, gvals, R, eps)
    lk, val = golden_section(phi, -LOG_KAPPA_SPAN, LOG_KAPPA_SPAN, tol=1e-10)
    cands = [(val, lk)]
    if not np.any(beta2[null]):
        # the unit-ball constraint may be slack: kappa -> infinity
        top = float(np.sum(beta2[~null] * eps**2 / gvals[~null]))
        cands.append((top, np.inf))
    val, lk = min(cands)
    if np.isfinite(lk):
        lk = _refine_balance(lambda t: beta / (1.0 / R**2 + np.exp(t) * gvals / eps**2),
                             gvals, R, eps, lk)
        val = min(val, phi(lk))
    if np.isinf(lk):
        z = np.where(null, 0.0, beta * eps**2 / np.where(null, 1.0, gvals))
    else:
        k = np.exp(lk)
        z = beta / (1.0 / R**2 + k * gvals / eps**2)
    scale = max(np.linalg.norm(z) / R, np.sqrt(gvals @ z**2) / eps)
    z = z / scale
    return float(beta @ z), z, float(np.sqrt(max(val, 0.0)))


def _balance(z, gvals, R, eps):
    a, b = np.sum(z**2) / R**2, np.sum(gvals * z**2) / eps**2
    if a == 0 or b == 0:
        return a - b
    return np.log(a) - np.log(b)


def _refine_balance(zfun, gvals, R, eps, lk, width=1.0):
    """Root of the constraint-balance condition near ``lk`` (golden section is
    only accurate to about the square root of machine precision)."""
    F = lambda t: _balance(zfun(t), gvals, R, eps)
    lo, hi = lk - width, lk + width
    flo, fhi = F(lo), F(hi)
    if not (np.isfinite(flo) and np.isfinite(fhi)) or flo * fhi > 0:
        return lk
    return brentq(F, lo, hi, xtol=1e-15, rtol=1e-15)


def ellipsoid_pair_quadratic(P, gvals, R=1.0, eps=1.0, null_tol=RANK_RCOND):
    """``max z^T P z`` over ``||z|| <= R`` and ``sum g_i z_i^2 <= eps^2``.

    ``P`` is PSD and expressed in the eigenbasis of the second form. The
    semidefinite dual ``min a R^2 + b eps^2`` subject to ``a I + b G >= P``
    is reduced to a scalar minimization of a generalized top eigenvalue.
    Returns ``(value, z, bound)`` with ``value = z^T P z`` for a feasible
    ``z`` and ``bound`` the dual upper bound.
    """
    P = 0.5 * (P + P.T)
    gvals = np.clip(np.asarray(gvals, dtype=float), 0.0, None)
    n = gvals.size
    gmax = np.max(gvals, initial=0.0)
    null = gvals <= null_tol * gmax if gmax > 0 else np.ones(n, dtype=bool)
    if n == 0 or not np.any(P):
        return 0.0, np.zeros(n), 0.0
    if eps == 0 or np.isinf(eps):
        keep = null if eps == 0 else np.ones(n, dtype=bool)
        z = np.zeros(n)
        if not np.any(keep):
            return 0.0, z, 0.0
        ev, U = np.linalg.eigh(P[np.ix_(keep, keep)])
        z[keep] = R * U[:, -1]
        v = max(float(z @ P @ z), 0.0)
        return v, z, max(float(ev[-1]), 0.0) * R**2

    def pencil(log_kappa):
        k = np.exp(log_kappa)
        m = 1.0 / R**2 + k * gvals / eps**2
        s = 1.0 / np.sqrt(m)
        ev, U = np.linalg.eigh(s[:, None] * P * s[None, :])
        return ev, U, s, k

    def phi(log_kappa):
        ev, _, _, k = pencil(log_kappa)
        return (1.0 + k) * ev[-1]

    lk, val = golden_section(phi, -LOG_KAPPA_SPAN, LOG_KAPPA_SPAN, tol=1e-10)
    ev, U, s, k = pencil(lk)
    if n == 1 or ev[-2] < ev[-1] * (1 - 1e-6):
        def top(t):
            _, U_, s_, _ = pencil(t)
            return s_ * U_[:, -1]
        lk = _refine_balance(top, gvals, R, eps, lk, width=1e-3)
        val = min(val, phi(lk))
        ev, U, s, k = pencil(lk)

    def excess(z):
        return np.sum(z**2) / R**2 - np.sum(gvals * z**2) / eps**2

    z1 = s * U[:, -1]
    z = z1
    if n > 1 and ev[-2] >= ev[-1] * (1 - 1e-6):
        z2 = s * U[:, -2]
        e11, e22 = excess(z1), excess(z2)
        e12 = np.sum(z1 * z2) / R**2 - np.sum(gvals * z1 * z2) / eps**2
        if e11 * e22 < 0:
            # solve e11 + 2 t e12 + t^2 e22 = 0 for the mixing ratio t
            disc = max(e12**2 - e11 * e22, 0.0)
            t = (-e12 + np.sqrt(disc)) / e22
            z = z1 + t * z2
    scale = max(np.linalg.norm(z) / R, np.sqrt(gvals @ z**2) / eps)
    if scale > 0:
        z = z / scale
    return float(z @ P @ z), z, float(val)


# ---------------------------------------------------------------- inner problem


@dataclass
class InnerProblem:
    """Data of the inner primal/dual pair on supported atoms.

    Parameters
    ----------
    Phi : ndarray, shape (N, M)
    pi : ndarray, shape (M,)
        Weights on the weight atoms (need not sum to one).
    nu : ndarray or None, shape (N,)
        Fitting weights; ``None`` or all-zero means no fitting constraint.
    p, r : float
        Coefficient and fitting exponents.
    eps : float
        Fitting tolerance (``inf`` disables the constraint).
    """

    Phi: np.ndarray
    pi: np.ndarray
    nu: np.ndarray
    p: float
    r: float = 2.0
    eps: float = 0.0
    J: np.ndarray = field(init=False)
    I: np.ndarray = field(init=False)

    def __post_init__(self):
        self.Phi = np.asarray(self.Phi, dtype=float)
        self.pi = np.asarray(self.pi, dtype=float)
        N, M = self.Phi.shape
        self.nu = np.zeros(N) if self.nu is None else np.asarray(self.nu, dtype=float)
        if self.pi.shape != (M,) or self.nu.shape != (N,):
            raise InputError("measure sizes do not match the feature matrix")
        if not (self.p > 1 or self.p == 1) or not self.r > 1:
            raise InputError("need p >= 1 and r > 1")
        if self.eps < 0:
            raise InputError("eps must be nonnegative")
        self.J = np.flatnonzero(self.pi > 0)
        self.I = np.flatnonzero(self.nu > 0) if np.isfinite(self.eps) else np.array([], int)
        self.w = self.pi[self.J]
        self.nuS = self.nu[self.I]
        self.PhiS = self.Phi[np.ix_(self.I, self.J)]
        self.pc = conjugate(self.p)
        self.rc = conjugate(self.r)

    @property
    def constrained(self):
        return self.I.size > 0

    @property
    def conic(self):
        """Polyhedral coefficient ball with a smooth fitting constraint (``p`` in {1, inf})."""
        return (self.p in (1.0, np.inf) and self.constrained and self.eps > 0
                and np.isfinite(self.r))

    def fit_norm(self, a):
        """``||Phi D_pi a||_{r, nu}`` for ``a`` on supported weight atoms."""
        if not self.constrained:
            return 0.0
        return wnorm(self.PhiS @ (self.w * a), self.nuS, self.r)

    def coeff_norm(self, a):
        return wnorm(a, self.w, self.p)

    def make_feasible(self, a):
        """Shrink ``a`` (never enlarge) onto the feasible set.

        With ``eps = 0`` the fitting constraint is enforced by projecting onto
        the nullspace of the constraint rows first.
        """
        a = np.asarray(a, dtype=float)
        if self.constrained and self.eps == 0:
            C = self.PhiS * self.w[None, :]
            a = a - np.linalg.pinv(C, rcond=RANK_RCOND) @ (C @ a)
        s = self.coeff_norm(a)
        if self.constrained and self.eps > 0:
            s = max(s, self.fit_norm(a) / self.eps)
        return a / s if s > 1.0 else a

    def objective(self, g, c):
        e = g - self.PhiS.T @ (self.nuS * c)
        val = wnorm(e, self.w, self.pc)
        if self.constrained and self.eps > 0:
            val += self.eps * wnorm(c, self.nuS, self.rc)
        return val

    # ------------------------------------------------------------------ routes

    def _two_two(self):
        A = np.sqrt(self.w)[:, None] * self.PhiS.T * np.sqrt(self.nuS)[None, :]
        U, s, Vt = np.linalg.svd(A, full_matrices=True)
        keep = s > RANK_RCOND * s[0] if s.size and s[0] > 0 else np.zeros(s.size, bool)
        return A, U, s, Vt, keep

    def primal(self, g, c0=None):
        """Minimize the inner objective over ``c``; returns ``(value, c)``.

        ``c0`` warm-starts the smooth route and is ignored elsewhere.
        """
        g = np.asarray(g, dtype=float)
        if not self.constrained:
            return wnorm(g, self.w, self.pc), np.zeros(0)
        if self.pc == 2 and (self.eps == 0 or self.rc == 2):
            return self._primal_l2(g)
        if (self.pc in (1.0, np.inf)) and (self.eps == 0 or self.rc == 1.0):
            return self._primal_lp(g)
        if self.conic:
            return self._primal_conic(g)
        return self._primal_smooth(g, c0)

    def _primal_l2(self, g):
        A, U, s, Vt, keep = self._two_two()
        h = np.sqrt(self.w) * g
        r = int(np.sum(keep))
        hr = U[:, :r].T @ h
        hperp = h - U[:, :r] @ hr
        hperp2 = float(hperp @ hperp)
        sk = s[:r]
        if self.eps == 0:
            u = Vt[:r].T @ (hr / sk) if r else np.zeros(A.shape[1])
            return float(np.sqrt(hperp2)), u / np.sqrt(self.nuS)
        nh = np.linalg.norm(h)
        eps = self.eps
        if nh == 0 or np.linalg.norm(sk * hr) <= eps * nh:
            return float(nh), np.zeros(A.shape[1])
        if hperp2 <= (1e-24 * nh**2) and eps * np.linalg.norm(hr / sk**2) <= np.linalg.norm(hr / sk):
            u = Vt[:r].T @ (hr / sk)
            return float(eps * np.linalg.norm(u)), u / np.sqrt(self.nuS)

        def F(log_tau):
            tau = np.exp(log_tau)
            e2 = np.sum((tau * hr / (sk**2 + tau)) ** 2) + hperp2
            u2 = np.sum((sk * hr / (sk**2 + tau)) ** 2)
            return np.log(eps) + 0.5 * np.log(e2) - log_tau - 0.5 * np.log(u2)

        lo, hi = np.log(sk[-1] ** 2) - 5.0, np.log(sk[0] ** 2) + 5.0
        while F(lo) < 0:
            lo -= 5.0
        while F(hi) > 0:
            hi += 5.0
        tau = np.exp(brentq(F, lo, hi, xtol=1e-14, rtol=1e-15))
        ur = sk * hr / (sk**2 + tau)
        u = Vt[:r].T @ ur
        e = np.sqrt(np.sum((tau * hr / (sk**2 + tau)) ** 2) + hperp2)
        return float(e + eps * np.linalg.norm(ur)), u / np.sqrt(self.nuS)

    def _primal_lp(self, g):
        # variables: c (k), t (M or 1), s (k, only with eps > 0)
        k, M = self.I.size, self.J.size
        Bt = self.PhiS.T * self.nuS[None, :]
        use_s = self.eps > 0
        if self.pc == 1.0:
            nt = M
            cost_t = self.w
            T = np.eye(M)
        else:
            nt = 1
            cost_t = np.ones(1)
            T = np.ones((M, 1))
        ns = k if use_s else 0
        cost = np.concatenate([np.zeros(k), cost_t, self.eps * self.nuS if use_s else []])
        rows = [np.hstack([-Bt, -T, np.zeros((M, ns))]), np.hstack([Bt, -T, np.zeros((M, ns))])]
        rhs = [-g, g]
        if use_s:
            rows += [np.hstack([np.eye(k), np.zeros((k, nt)), -np.eye(k)]),
                     np.hstack([-np.eye(k), np.zeros((k, nt)), -np.eye(k)])]
            rhs += [np.zeros(k), np.zeros(k)]
        bounds = [(None, None)] * k + [(0, None)] * (nt + ns)
        res = linprog(cost, A_ub=np.vstack(rows), b_ub=np.concatenate(rhs), bounds=bounds,
                      method="highs")
        if res.status != 0:
            raise RuntimeError(f"inner LP failed: {res.message}")
        c = res.x[:k]
        return self.objective(g, c), c

    def _primal_smooth(self, g, c0=None):
        Bt = self.PhiS.T * self.nuS[None, :]
        pc, rc, eps = self.pc, self.rc, self.eps

        def fun(c):
            e = g - Bt @ c
            val = wnorm(e, self.w, pc)
            grad = np.zeros_like(c)
            if val > 0:
                grad -= Bt.T @ (self.w * psi(e / val, pc))
            if eps > 0:
                cn = wnorm(c, self.nuS, rc)
                val += eps * cn
                if cn > 0:
                    grad += eps * self.nuS * psi(c / cn, rc)
            return val, grad

        c_ls = np.linalg.lstsq(Bt * np.sqrt(self.w)[:, None], np.sqrt(self.w) * g, rcond=None)[0]
        best_val, best_c = self.objective(g, np.zeros_like(c_ls)), np.zeros_like(c_ls)
        starts = (c_ls, 0.5 * c_ls) if c0 is None else (np.asarray(c0, dtype=float),)
        for start in starts:
            res = minimize(fun, start, jac=True, method="BFGS",
                           options={"gtol": 1e-12, "maxiter": 5000})
            if res.fun < best_val:
                best_val, best_c = float(res.fun), res.x
        return best_val, best_c

    def dual_from_primal(self, g, c):
        """Feasible dual point built from the primal residual (a lower bound)."""
        e = g - self.PhiS.T @ (self.nuS * c) if self.constrained else np.asarray(g, float)
        ne = wnorm(e, self.w, self.pc)
        if ne == 0:
            return np.zeros_like(e), 0.0
        if np.isinf(self.pc):
            a = np.zeros_like(e)
            i = int(np.argmax(np.abs(e)))
            a[i] = np.sign(e[i]) / self.w[i]
        elif self.pc == 1.0:
            a = np.sign(e)
        else:
            a = psi(e / ne, self.pc)
        a = self.make_feasible(a)
        return a, float(self.w @ (a * g))

    def dual(self, g):
        """Maximize ``<g, a>_pi`` over the feasible set; returns ``(value, a, bound)``."""
        return self.dual_warm(g)[:3]

    def dual_warm(self, g, c0=None):
        """Like :meth:`dual` but also returns the primal coefficients (``None`` on exact routes).

        ``c0`` warm-starts the primal when the dual is recovered from it.
        """
        g = np.asarray(g, dtype=float)
        if self.p == 2 and (not self.constrained or self.eps == 0 or self.r == 2):
            return (*self._dual_l2(g), None)
        if self.p in (1.0, np.inf) and (not self.constrained or self.eps == 0 or np.isinf(self.r)):
            return (*self._dual_lp(g), None)
        if self.conic:
            return (*self._dual_conic(g), None)
        val, c = self.primal(g, c0)
        a, lb = self.dual_from_primal(g, c)
        return lb, a, val, c

    def _dual_l2(self, g):
        sw = np.sqrt(self.w)
        beta = sw * g
        if not self.constrained:
            n = np.linalg.norm(beta)
            a = beta / n / sw if n > 0 else np.zeros_like(g)
            return float(n), a, float(n)
        A, U, s, Vt, keep = self._two_two()
        gv = np.zeros(U.shape[0])
        gv[: s.size] = s**2
        val, zc, bound = ellipsoid_pair_support(U.T @ beta, gv, 1.0, self.eps)
        a = (U @ zc) / sw
        return val, a, bound

    def _dual_lp(self, g):
        M = self.J.size
        C = self.PhiS * self.w[None, :]
        if self.p == np.inf:
            cost = -self.w * g
            bounds = [(-1.0, 1.0)] * M
            A_ub = b_ub = None
            nv = M
            expand = lambda x: x
        else:
            cost = -np.concatenate([self.w * g, -self.w * g])
            bounds = [(0, None)] * (2 * M)
            A_ub, b_ub = np.concatenate([self.w, self.w])[None, :], np.ones(1)
            nv = 2 * M
            expand = lambda x: x[:M] - x[M:]
        A_eq = b_eq = None
        if self.constrained:
            Cx = C if nv == M else np.hstack([C, -C])
            if self.eps == 0:
                A_eq, b_eq = Cx, np.zeros(Cx.shape[0])
            else:
                extra = np.vstack([Cx, -Cx])
                rhs = np.full(extra.shape[0], self.eps)
                A_ub = extra if A_ub is None else np.vstack([A_ub, extra])
                b_ub = rhs if b_ub is None else np.concatenate([b_ub, rhs])
        res = linprog(cost, A_ub=A_ub, b_ub=b_ub, A_eq=A_eq, b_eq=b_eq, bounds=bounds,
                      method="highs")
        if res.status != 0:
            raise RuntimeError(f"support LP failed: {res.message}")
        a = expand(res.x)
        return float(self.w @ (a * g)), a, float(-res.fun)

    # SLSQP on smooth reformulations. Both sides are small (|S| and the number
    # of weight atoms are enumeration-sized), and the pair is certified by the
    # computed gap rather than by construction.

    def _primal_conic(self, g):
        k, M = self.I.size, self.J.size
        Bt = self.PhiS.T * self.nuS[None, :]
        rc, nuS = self.rc, self.nuS
        nt = M if self.pc == 1.0 else 1
        cost = np.concatenate([np.zeros(k), self.w if nt == M else np.ones(1), [self.eps]])
        T = np.eye(M) if nt == M else np.ones((M, 1))

        def cone_jac(x):
            # the cone is written unsquared: the squared form has a zero gradient at its apex
            c = x[:k]
            n = wnorm(c, nuS, rc)
            dc = -nuS * psi(c / n, rc) if n > 0 else np.zeros(k)
            return np.concatenate([dc, np.zeros(nt), [1.0]])[None, :]

        G = np.hstack([Bt, T, np.zeros((M, 1))])
        H = np.hstack([-Bt, T, np.zeros((M, 1))])
        cons = [
            {"type": "ineq", "fun": lambda x: G @ x - g, "jac": lambda x: G},
            {"type": "ineq", "fun": lambda x: H @ x + g, "jac": lambda x: H},
            {"type": "ineq", "fun": lambda x: np.array([x[-1] - wnorm(x[:k], nuS, rc)]),
             "jac": cone_jac},
        ]
        _, c_lp = self._primal_lp_at(g, 0.0)
        e = np.abs(g - Bt @ c_lp)
        x0 = np.concatenate([c_lp, e if nt == M else [e.max()], [wnorm(c_lp, nuS, rc) * 1.001]])
        bounds = [(None, None)] * k + [(0, None)] * (nt + 1)
        res = minimize(lambda x: cost @ x, x0, jac=lambda x: cost, method="SLSQP",
                       constraints=cons, bounds=bounds, options={"ftol": 1e-15, "maxiter": 2000})
        c = res.x[:k]
        val = self.objective(g, c)
        zero = self.objective(g, np.zeros(k))
        lp_val = self.objective(g, c_lp)
        if zero < val:
            val, c = zero, np.zeros(k)
        if lp_val < val:
            val, c = lp_val, c_lp
        return float(val), c

    def _primal_lp_at(self, g, eps):
        saved = self.eps
        self.eps = eps
        try:
            return self._primal_lp(g)
        finally:
            self.eps = saved

    def _dual_conic(self, g):
        M = self.J.size
        C = self.PhiS * self.w[None, :]
        r, nuS, eps = self.r, self.nuS, self.eps
        if self.p == np.inf:
            E = np.eye(M)
            bounds = [(-1.0, 1.0)] * M
            lin = []
        else:
            E = np.hstack([np.eye(M), -np.eye(M)])
            bounds = [(0.0, None)] * (2 * M)
            ww = np.concatenate([self.w, self.w])
            lin = [{"type": "ineq", "fun": lambda x: np.array([1.0 - ww @ x]),
                    "jac": lambda x: -ww[None, :]}]
        CE = C @ E
        obj = -(self.w * g) @ E
        cons = lin + [{
            "type": "ineq",
            "fun": lambda x: np.array([eps**r - nuS @ np.abs(CE @ x) ** r]),
            "jac": lambda x: (-r * (nuS * psi(CE @ x, r)) @ CE)[None, :],
        }]
        res = minimize(lambda x: obj @ x, np.zeros(E.shape[1]), jac=lambda x: obj,
                       method="SLSQP", constraints=cons, bounds=bounds,
                       options={"ftol": 1e-15, "maxiter": 2000})
        a = self.make_feasible(E @ res.x)
        val = float(self.w @ (a * g))
        upper, _ = self._primal_conic(g)
        return max(val, 0.0), a, max(upper, val)
