"""Finite measures, feature maps, and the norms of random-feature spaces.

Every measure is a finite list of atoms with probability weights. Functions
on the input space are arrays indexed by the input atoms (grid functions);
coefficient functions are arrays indexed by the weight atoms.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linprog
from scipy.special import erf

from ._optim import conjugate, damped_newton, psi
from .errors import InfeasibleError, InputError

__all__ = [
    "DiscreteMeasure",
    "FeatureMap",
    "ACTIVATIONS",
    "eval_feature_matrix",
    "synthesize",
    "coeff_norm",
    "function_norm",
    "fp_norm",
    "barron_norm",
    "barron_attaining_measure",
    "SPAN_TOL",
    "PINV_RCOND",
]

SPAN_TOL = 1e-9
PINV_RCOND = 1e-10


@dataclass(frozen=True)
class DiscreteMeasure:
    """Probability measure supported on finitely many atoms.

    Parameters
    ----------
    points : array_like, shape (n, d)
        Atom locations. A 1-d input is read as ``n`` scalar atoms.
    weights : array_like, shape (n,), optional
        Nonnegative weights summing to one. Uniform when omitted.
    """

    points: np.ndarray
    weights: np.ndarray = field(default=None)

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim == 1:
            pts = pts[:, None]
        if pts.ndim != 2 or pts.shape[0] == 0:
            raise InputError("a measure needs a nonempty (n, d) array of points")
        if self.weights is None:
            w = np.full(pts.shape[0], 1.0 / pts.shape[0])
        else:
            w = np.asarray(self.weights, dtype=float).ravel()
        if w.shape[0] != pts.shape[0]:
            raise InputError("weights and points differ in length")
        if np.any(w < 0) or not np.all(np.isfinite(w)):
            raise InputError("weights must be finite and nonnegative")
        if abs(w.sum() - 1.0) > 1e-12:
            raise InputError(f"weights sum to {w.sum()!r}, not 1")
        pts.setflags(write=False)
        w = w.copy()
        w.setflags(write=False)
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "weights", w)

    @property
    def size(self):
        return self.points.shape[0]

    @property
    def dim(self):
        return self.points.shape[1]

    @property
    def support(self):
        """Indices of atoms with positive weight."""
        return np.flatnonzero(self.weights > 0)

    @classmethod
    def uniform(cls, points):
        return cls(points)

    @classmethod
    def normalized(cls, points, mass):
        """Build a measure from nonnegative masses, rescaled to total one."""
        mass = np.asarray(mass, dtype=float)
        total = mass.sum()
        if total <= 0:
            raise InputError("total mass must be positive")
        w = mass / total
        # absorb rounding so the sum is one to machine precision
        w[np.argmax(w)] += 1.0 - w.sum()
        return cls(points, w)

    @classmethod
    def empirical(cls, points, indices):
        """Empirical measure on ``points[indices]`` kept on the full grid.

        Repeated indices accumulate mass; atoms not drawn get weight zero.
        """
        pts = np.asarray(points, dtype=float)
        n = pts.shape[0] if pts.ndim > 1 else len(pts)
        idx = np.asarray(indices, dtype=int).ravel()
        if idx.size == 0:
            raise InputError("empirical measure needs at least one index")
        counts = np.bincount(idx, minlength=n).astype(float)
        return cls.normalized(pts, counts)


ACTIVATIONS = ("relu", "tanh", "softplus", "arctan", "gelu", "constant")


def _activation(kind, alpha=1):
    if kind == "relu":
        if alpha == 1:
            return lambda z: np.maximum(z, 0.0)
        return lambda z: np.maximum(z, 0.0) ** alpha
    if kind == "tanh":
        return np.tanh
    if kind == "softplus":
        return lambda z: np.logaddexp(0.0, z)
    if kind == "arctan":
        return np.arctan
    if kind == "gelu":
        return lambda z: 0.5 * z * (1.0 + erf(z / np.sqrt(2.0)))
    if kind == "constant":
        return lambda z: np.ones_like(np.asarray(z, dtype=float))
    raise InputError(f"unknown activation {kind!r}; choose from {ACTIVATIONS}")


@dataclass(frozen=True)
class FeatureMap:
    """Feature function ``phi(x, v)``.

    Either ``sigma(x . v)`` for a named activation, or a tabulated matrix
    whose rows index input atoms and columns index weight atoms.

    Parameters
    ----------
    kind : str
        One of ``ACTIVATIONS`` or ``"tabulated"``.
    alpha : int
        Power for ``relu`` (``max(z, 0) ** alpha``).
    matrix : ndarray, optional
        Table for ``kind="tabulated"``.
    """

    kind: str = "relu"
    alpha: int = 1
    matrix: np.ndarray = None

    def __post_init__(self):
        if self.kind == "tabulated":
            if self.matrix is None:
                raise InputError("tabulated feature map needs a matrix")
            mat = np.array(self.matrix, dtype=float)
            if mat.ndim != 2:
                raise InputError("tabulated feature matrix must be 2-d")
            mat.setflags(write=False)
            object.__setattr__(self, "matrix", mat)
        else:
            _activation(self.kind, self.alpha)
            if self.kind == "relu" and (int(self.alpha) != self.alpha or self.alpha < 1):
                raise InputError("relu power alpha must be a positive integer")

    @classmethod
    def tabulated(cls, matrix):
        return cls(kind="tabulated", matrix=matrix)

    def sigma(self, z):
        """Apply the activation elementwise."""
        return _activation(self.kind, int(self.alpha))(np.asarray(z, dtype=float))

    def __call__(self, x, v):
        """Evaluate ``phi`` on arrays of input points and weight points."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        v = np.atleast_2d(np.asarray(v, dtype=float))
        if x.shape[1] != v.shape[1]:
            raise InputError(f"input dim {x.shape[1]} != weight dim {v.shape[1]}")
        return self.sigma(x @ v.T)


def eval_feature_matrix(fmap, X, V):
    """Feature matrix ``Phi[i, j] = phi(x_i, v_j)``.

    Parameters
    ----------
    fmap : FeatureMap
    X, V : DiscreteMeasure
        Input and weight measures.

    Returns
    -------
    ndarray, shape (X.size, V.size)
    """
    if fmap.kind == "tabulated":
        if fmap.matrix.shape != (X.size, V.size):
            raise InputError(
                f"tabulated matrix {fmap.matrix.shape} does not match measures "
                f"({X.size}, {V.size})"
            )
        return fmap.matrix
    return fmap(X.points, V.points)


def synthesize(a, Phi, pi):
    """Grid values of ``f_a(x_i) = sum_j pi_j a_j Phi[i, j]``."""
    a = np.asarray(a, dtype=float)
    Phi = np.asarray(Phi, dtype=float)
    w = _weights(pi)
    if a.shape != (Phi.shape[1],) or w.shape != a.shape:
        raise InputError("coefficient length must match the weight atoms")
    return Phi @ (w * a)


def _weights(measure):
    if isinstance(measure, DiscreteMeasure):
        return measure.weights
    return np.asarray(measure, dtype=float)


def _weighted_lp(values, w, p):
    values = np.asarray(values, dtype=float)
    w = _weights(w)
    if values.shape != w.shape:
        raise InputError("values and weights differ in length")
    p = float(p)
    if p < 1:
        raise InputError(f"exponent must be >= 1, got {p}")
    if np.isinf(p):
        mask = w > 0
        return float(np.max(np.abs(values[mask]))) if mask.any() else 0.0
    absval = np.abs(values)
    top = np.max(absval, initial=0.0)
    if top == 0.0:
        return 0.0
    # scale first to avoid overflow for large p
    return float(top * np.sum(w * (absval / top) ** p) ** (1.0 / p))


def coeff_norm(a, pi, p):
    """Weighted norm ``(sum_j pi_j |a_j|^p)^(1/p)``; max over the support for ``p = inf``."""
    return _weighted_lp(a, pi, p)


def function_norm(f, rho, q):
    """``L^q(rho)`` norm of a grid function; ``q = inf`` is the max over the support."""
    return _weighted_lp(f, rho, q)


def _check_span(A, f):
    """Raise unless ``f`` is in the column span of ``A`` (relative 1e-9)."""
    sol, *_ = np.linalg.lstsq(A, f, rcond=None)
    res = np.linalg.norm(A @ sol - f)
    scale = max(np.linalg.norm(f), np.finfo(float).tiny)
    if np.linalg.norm(f) > 0 and res > SPAN_TOL * scale:
        raise InfeasibleError(f"target outside the representable span (rel. residual {res / scale:.3e})")


def fp_norm(f, Phi, pi, p, full_output=False):
    """Norm of ``f`` in the ``F_{p,pi}`` space on a finite grid.

    Minimizes ``||a||_{p,pi}`` subject to ``sum_j pi_j a_j Phi[:, j] = f``.

    Parameters
    ----------
    f : ndarray, shape (N,)
    Phi : ndarray, shape (N, M)
    pi : DiscreteMeasure or ndarray
        Weight measure (only its weights are used).
    p : float
        Exponent in ``(1, inf]``.
    full_output : bool
        Also return a dict with the feasibility residual and the relative
        duality gap of the returned pair.

    Returns
    -------
    value : float
    a : ndarray, shape (M,)
        Attaining coefficients (zero off the support of ``pi``).
    info : dict, optional
    """
    f = np.asarray(f, dtype=float)
    Phi = np.asarray(Phi, dtype=float)
    w = _weights(pi)
    p = float(p)
    if p <= 1:
        raise InputError("fp_norm needs p > 1; use barron_norm for the l1 case")
    if Phi.shape != (f.shape[0], w.shape[0]):
        raise InputError("shape mismatch between f, Phi and pi")
    J = np.flatnonzero(w > 0)
    wJ = w[J]
    A = Phi[:, J] * wJ
    _check_span(A, f)
    a = np.zeros(w.shape[0])
    lam = None
    if not np.any(f):
        value = 0.0
    elif p == 2.0:
        B = Phi[:, J] * np.sqrt(wJ)
        b = np.linalg.pinv(B, rcond=PINV_RCOND) @ f
        a[J] = b / np.sqrt(wJ)
        lam = np.linalg.pinv(B @ B.T, rcond=PINV_RCOND, hermitian=True) @ f
    elif np.isinf(p):
        a[J], lam = _linf_min(A, f)
    else:
        a[J], lam = _lp_min_dual_newton(Phi[:, J], wJ, f, p)
    value = coeff_norm(a, w, p)
    if not full_output:
        return value, a
    residual = float(np.max(np.abs(synthesize(a, Phi, w) - f), initial=0.0))
    gap = 0.0
    if lam is not None:
        s = Phi[:, J].T @ lam
        dnorm = coeff_norm(s, wJ, conjugate(p))
        dual = float(lam @ f) / dnorm if dnorm > 0 else 0.0
        gap = abs(value - dual) / max(value, 1e-300)
    return value, a, {"residual": residual, "gap": gap}


def _linf_min(A, f):
    """min t s.t. |a_j| <= t, A a = f, as a linear program."""
    N, M = A.shape
    c = np.zeros(M + 1)
    c[-1] = 1.0
    eye = np.eye(M)
    ones = np.ones((M, 1))
    A_ub = np.block([[eye, -ones], [-eye, -ones]])
    b_ub = np.zeros(2 * M)
    A_eq = np.hstack([A, np.zeros((N, 1))])
    res = linprog(c, A_ub=A_ub, b_ub=b_ub, A_eq=A_eq, b_eq=f,
                  bounds=[(None, None)] * (M + 1), method="highs")
    if res.status != 0:
        raise InfeasibleError(f"sup-norm representation LP failed: {res.message}")
    return res.x[:M], np.asarray(res.eqlin.marginals, dtype=float)


def _lp_min_dual_newton(PhiJ, wJ, f, p):
    """Minimize ``||a||_{p,w}`` on ``PhiJ diag(w) a = f`` through the dual.

    The dual objective ``h(lam) = sum_j w_j |s_j|^{p'}/p' - lam.f`` with
    ``s = PhiJ^T lam`` is smooth and convex; its minimizer gives
    ``a = psi_{p'}(s)``.
    """
    pc = conjugate(p)

    def h(lam):
        s = PhiJ.T @ lam
        return np.sum(wJ * np.abs(s) ** pc) / pc - lam @ f

    def grad(lam):
        s = PhiJ.T @ lam
        return PhiJ @ (wJ * psi(s, pc)) - f

    def hess(lam):
        s = PhiJ.T @ lam
        mag = np.abs(s)
        floor = 1e-10 * max(np.max(mag), 1e-300)
        d = (pc - 1.0) * wJ * np.maximum(mag, floor) ** (pc - 2.0)
        return (PhiJ * d) @ PhiJ.T

    K = (PhiJ * wJ) @ PhiJ.T
    lam0 = np.linalg.pinv(K, rcond=PINV_RCOND, hermitian=True) @ f
    scale = max(np.max(np.abs(f)), 1e-300)
    lam, _ = damped_newton(h, grad, hess, lam0, gtol=1e-14 * scale, max_iter=500)
    a = psi(PhiJ.T @ lam, pc)
    # remove the last round-off part of the residual with a least-norm correction
    B = PhiJ * np.sqrt(wJ)
    r = f - PhiJ @ (wJ * a)
    a = a + (np.linalg.pinv(B, rcond=PINV_RCOND) @ r) / np.sqrt(wJ)
    return a, lam


def barron_norm(f, Phi, full_output=False):
    """Minimal l1 weight combination ``min ||w||_1`` subject to ``Phi w = f``.

    Solved as a linear program (HiGHS). With ``full_output`` the returned dict
    holds the LP dual vector, the duality gap and the dual infeasibility.

    Returns
    -------
    value : float
    w : ndarray, shape (M,)
    info : dict, optional
    """
    f = np.asarray(f, dtype=float)
    Phi = np.asarray(Phi, dtype=float)
    N, M = Phi.shape
    if f.shape != (N,):
        raise InputError("shape mismatch between f and Phi")
    _check_span(Phi, f)
    if not np.any(f):
        w = np.zeros(M)
        info = {"dual": np.zeros(N), "gap": 0.0, "dual_infeasibility": 0.0, "residual": 0.0}
        return (0.0, w, info) if full_output else (0.0, w)
    res = linprog(np.ones(2 * M), A_eq=np.hstack([Phi, -Phi]), b_eq=f,
                  bounds=[(0, None)] * (2 * M), method="highs")
    if res.status != 0:
        raise InfeasibleError(f"basis pursuit LP failed: {res.message}")
    w = res.x[:M] - res.x[M:]
    value = float(np.sum(np.abs(w)))
    if not full_output:
        return value, w
    y = np.asarray(res.eqlin.marginals, dtype=float)
    info = {
        "dual": y,
        "gap": abs(value - float(y @ f)),
        "dual_infeasibility": float(max(np.max(np.abs(Phi.T @ y)) - 1.0, 0.0)),
        "residual": float(np.max(np.abs(Phi @ w - f))),
    }
    return value, w, info


def barron_attaining_measure(w, points=None):
    """Weight measure and coefficients that realize the l1 norm of ``w``.

    ``pi*`` is proportional to ``|w|`` and ``a*_j = sign(w_j) ||w||_1`` on its
    support, so ``||a*||_{p,pi*} = ||w||_1`` for every ``p``.

    Parameters
    ----------
    w : ndarray, shape (M,)
        Signed atom weights.
    points : ndarray, optional
        Weight-atom locations; defaults to the atom indices.

    Returns
    -------
    pi_star : DiscreteMeasure or None
        ``None`` when ``w`` is identically zero.
    a_star : ndarray, shape (M,)
        Coefficients on all atoms (zero where ``pi*`` vanishes).
    """
    w = np.asarray(w, dtype=float)
    pts = np.arange(w.shape[0], dtype=float) if points is None else points
    total = np.sum(np.abs(w))
    if total == 0:
        return None, np.zeros_like(w)
    pi_star = DiscreteMeasure.normalized(pts, np.abs(w))
    a_star = np.sign(w) * total
    return pi_star, a_star
