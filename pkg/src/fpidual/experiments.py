"""Synthetic targets, sampled data sets and end-to-end sweeps on sphere grids.

Every random quantity is drawn from a stream keyed by
``(seed, cell, trial, purpose)``, so a record depends only on the
configuration and never on the order in which cells or trials run.
"""

import csv
import json
import logging
import math
import time
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np
from scipy.spatial import cKDTree

from .complexity import ComplexityQuery, i_complexity_rkhs
from .errors import ConvergenceError, InfeasibleError, InputError
from .io import to_jsonable
from .measures import DiscreteMeasure, FeatureMap, coeff_norm
from .solvers import LpBall, constrained_ls_fw, norm_constrained_krr
from .sphere import default_degree, eigenvalues_tk, kappa_profile, upper_bound_curve

__all__ = [
    "CSV_COLUMNS",
    "ExperimentConfig",
    "RunRecord",
    "Target",
    "Dataset",
    "stream",
    "fibonacci_sphere",
    "repelled_sphere",
    "sphere_grid",
    "mesh_norm",
    "random_rotation",
    "gen_target",
    "gen_dataset",
    "run_learning_curve",
    "run_approximation",
    "run_cod_study",
    "run",
    "emit",
    "load_records",
]

log = logging.getLogger(__name__)

CSV_COLUMNS = ("d", "activation", "p", "q", "n", "m", "sigma", "trial", "l2_error",
               "linf_error", "lower_bound", "upper_bound", "seconds")

# purposes of the random streams
TARGET, DATA, FEATURES, GRID = 0, 1, 2, 3

MODES = ("learn-curve", "approximation", "cod-study")
TARGET_KINDS = ("gaussian", "spike", "cap", "matched-cap")
_TRIAL_ERRORS = (ConvergenceError, InfeasibleError, ArithmeticError, RuntimeError,
                 np.linalg.LinAlgError)


def stream(seed, cell, trial, purpose):
    """Generator for one ``(seed, cell, trial, purpose)`` combination."""
    return np.random.default_rng(np.random.SeedSequence([int(seed), int(cell), int(trial),
                                                         int(purpose)]))


# ---------------------------------------------------------------- sphere grids


def fibonacci_sphere(n):
    """Golden-angle spiral of ``n`` nearly uniform points on the 2-sphere."""
    if n < 1:
        raise InputError("need at least one point")
    i = np.arange(n) + 0.5
    z = 1.0 - 2.0 * i / n
    r = np.sqrt(np.clip(1.0 - z * z, 0.0, None))
    theta = np.pi * (1.0 + np.sqrt(5.0)) * i
    return np.column_stack([r * np.cos(theta), r * np.sin(theta), z])


def repelled_sphere(n, d, seed=0, iters=40, neighbors=8):
    """Random points on ``S^{d-1}`` spread out by nearest-neighbour repulsion.

    Each sweep pushes every point away from its ``neighbors`` nearest
    points (inverse-square weights) by a fraction of the typical spacing
    and re-projects onto the sphere.
    """
    if n < 1 or d < 2:
        raise InputError("need n >= 1 and d >= 2")
    rng = np.random.default_rng(np.random.SeedSequence([int(seed), int(n), int(d)]))
    X = rng.standard_normal((n, d))
    X /= np.linalg.norm(X, axis=1, keepdims=True)
    k = min(neighbors, n - 1)
    if k < 1:
        return X
    spacing = (2.0 * np.pi ** (d / 2) / math.gamma(d / 2) / n) ** (1.0 / (d - 1))
    for _ in range(iters):
        dist, idx = cKDTree(X).query(X, k=k + 1)
        diff = X[:, None, :] - X[idx[:, 1:]]
        wts = 1.0 / np.maximum(dist[:, 1:], 1e-12) ** 3
        push = np.sum(diff * wts[:, :, None], axis=1)
        push /= np.maximum(np.linalg.norm(push, axis=1, keepdims=True), 1e-300)
        X = X + 0.1 * spacing * push
        X /= np.linalg.norm(X, axis=1, keepdims=True)
    return X


def random_rotation(d, seed):
    """Haar-random orthogonal matrix (used to decouple test grids from training grids)."""
    rng = np.random.default_rng(np.random.SeedSequence([int(seed), int(d), GRID]))
    Q, R = np.linalg.qr(rng.standard_normal((d, d)))
    return Q * np.sign(np.diag(R))[None, :]


def mesh_norm(points, probes=20000, seed=0):
    """Largest distance from a random probe on the sphere to the nearest grid point.

    A Monte-Carlo lower estimate of the covering radius.
    """
    points = np.asarray(points, dtype=float)
    rng = np.random.default_rng(np.random.SeedSequence([int(seed), GRID]))
    P = rng.standard_normal((int(probes), points.shape[1]))
    P /= np.linalg.norm(P, axis=1, keepdims=True)
    dist, _ = cKDTree(points).query(P)
    return float(np.max(dist))


def sphere_grid(n, d, seed=0, rotate=False):
    """Quasi-uniform grid on ``S^{d-1}`` with uniform weights.

    Fibonacci points for ``d = 3`` and repelled random points otherwise.
    ``rotate`` applies a seeded random rotation, which gives a grid whose
    atoms differ from the unrotated one.

    Returns
    -------
    measure : DiscreteMeasure
    mesh : float
        Estimated mesh norm.
    """
    X = fibonacci_sphere(n) if d == 3 else repelled_sphere(n, d, seed=seed)
    if rotate:
        X = X @ random_rotation(d, seed).T
    return DiscreteMeasure(X), mesh_norm(X, seed=seed)


# ---------------------------------------------------------------- configuration


@dataclass
class ExperimentConfig:
    """Sweep description.

    JSON layout (all sections optional)::

        {"mode": "learn-curve" | "approximation" | "cod-study",
         "space": {"d", "activation", "alpha", "p", "q", "N", "M", "K"},
         "sampling": {"n", "m", "sigma", "delta", "n_test"},
         "estimator": {"radius", "tol", "max_iter"},
         "targets": {"kind", "count", "reuse_features", "cap_size"},
         "run": {"trials", "seed"},
         "bounds": {"M_q", "R_q", "R"},
         "output": {"csv", "json"}}

    ``n`` and ``m`` may be scalars or lists. ``radius`` is the constant
    ``C`` in the coefficient ball ``||c||_p <= C m^{1/p}`` for random
    features and the RKHS radius for the kernel study. ``bounds`` holds
    reference constants that are echoed into the output but not used.
    """

    mode: str = "learn-curve"
    d: int = 3
    activation: str = "relu"
    alpha: int = 1
    p: float = 2.0
    q: float = 2.0
    N: int = 2048
    M: int = 4096
    K: int = None
    n: tuple = (64, 256, 1024)
    m: tuple = (512,)
    sigma: float = 0.0
    delta: float = 0.05
    n_test: int = 4096
    radius: float = 1.0
    tol: float = 1e-6
    max_iter: int = 100000
    target: str = "gaussian"
    n_targets: int = 5
    reuse_features: bool = True
    cap_size: int = 32
    trials: int = 10
    seed: int = 0
    bounds: dict = field(default_factory=dict)
    csv: str = None
    json: str = None

    _SECTIONS = {
        "space": ("d", "activation", "alpha", "p", "q", "N", "M", "K"),
        "sampling": ("n", "m", "sigma", "delta", "n_test"),
        "estimator": ("radius", "tol", "max_iter"),
        "targets": {"kind": "target", "count": "n_targets", "reuse_features": "reuse_features",
                    "cap_size": "cap_size"},
        "run": ("trials", "seed"),
        "output": ("csv", "json"),
    }

    def __post_init__(self):
        self.n = tuple(int(v) for v in np.atleast_1d(self.n))
        self.m = tuple(int(v) for v in np.atleast_1d(self.m))
        self.p = float(self.p)
        self.q = float(self.q)
        self.validate()

    def validate(self):
        if self.mode not in MODES:
            raise InputError(f"mode must be one of {MODES}")
        counts = dict(d=self.d, N=self.N, M=self.M, n_test=self.n_test, trials=self.trials,
                      max_iter=self.max_iter, n_targets=self.n_targets, cap_size=self.cap_size)
        for name, v in counts.items():
            if int(v) != v or v < 1:
                raise InputError(f"{name} must be a positive integer")
        if not self.n or not self.m or min(self.n) < 1 or min(self.m) < 1:
            raise InputError("sample and feature counts must be positive")
        if self.d < 2:
            raise InputError("need d >= 2")
        if not self.sigma >= 0:
            raise InputError("sigma must be nonnegative")
        if not 0 < self.delta < 1:
            raise InputError("delta must lie in (0, 1)")
        if not self.p >= 1:
            raise InputError("p must be >= 1")
        if not self.radius > 0 or not self.tol > 0:
            raise InputError("radius and tol must be positive")
        if self.target not in TARGET_KINDS:
            raise InputError(f"target kind must be one of {TARGET_KINDS}")
        if self.K is not None and self.K < 1:
            raise InputError("K must be positive")
        FeatureMap(kind=self.activation, alpha=self.alpha)

    @classmethod
    def from_dict(cls, data):
        """Build from the nested layout (flat keys are accepted too)."""
        if not isinstance(data, dict):
            raise InputError("config must be a JSON object")
        kw = {}
        known = {f.name for f in fields(cls)}
        for key, value in data.items():
            if key in cls._SECTIONS:
                if not isinstance(value, dict):
                    raise InputError(f"section {key!r} must be an object")
                names = cls._SECTIONS[key]
                mapping = names if isinstance(names, dict) else {k: k for k in names}
                for sub, v in value.items():
                    if sub not in mapping:
                        raise InputError(f"unknown key {key}.{sub}")
                    kw[mapping[sub]] = v
            elif key == "bounds":
                kw["bounds"] = dict(value)
            elif key in known:
                kw[key] = value
            else:
                raise InputError(f"unknown config key {key!r}")
        if "q" in kw and isinstance(kw["q"], str):
            kw["q"] = float(kw["q"])
        try:
            return cls(**kw)
        except (TypeError, ValueError) as exc:
            raise InputError(f"bad config: {exc}") from exc

    @classmethod
    def from_file(cls, path):
        path = Path(path)
        try:
            data = json.loads(path.read_text())
        except OSError as exc:
            raise InputError(f"cannot read {path}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise InputError(f"{path}: invalid JSON ({exc})") from exc
        return cls.from_dict(data)

    def to_dict(self):
        out = {"mode": self.mode}
        for sec, names in self._SECTIONS.items():
            mapping = names if isinstance(names, dict) else {k: k for k in names}
            out[sec] = {sub: getattr(self, attr) for sub, attr in mapping.items()}
        out["sampling"]["n"] = list(self.n)
        out["sampling"]["m"] = list(self.m)
        out["bounds"] = dict(self.bounds)
        return to_jsonable(out)

    def replace(self, **kw):
        data = {f.name: getattr(self, f.name) for f in fields(self)}
        data.update(kw)
        return ExperimentConfig(**data)

    @property
    def feature_map(self):
        return FeatureMap(kind=self.activation, alpha=self.alpha)


@dataclass
class RunRecord:
    """One ``(cell, trial)`` outcome.

    The CSV columns are the first thirteen fields. ``certificate`` (solver
    gap or KKT residual) and ``status`` (``"ok"`` or the failure message)
    travel only in JSON.
    """

    d: int
    activation: str
    p: float
    q: float
    n: int
    m: int
    sigma: float
    trial: int
    l2_error: float
    linf_error: float
    lower_bound: float = float("nan")
    upper_bound: float = float("nan")
    seconds: float = 0.0
    certificate: float = float("nan")
    status: str = "ok"

    def __post_init__(self):
        for f in fields(self):
            kind = {"int": int, "float": float, "str": str}.get(f.type, f.type)
            setattr(self, f.name, kind(getattr(self, f.name)))
        if self.l2_error < 0 or self.linf_error < 0:
            raise InputError("errors must be nonnegative")

    @property
    def ok(self):
        return self.status == "ok"


# ---------------------------------------------------------------- targets and data


@dataclass
class Target:
    """``f*(x) = sum_j pi_j a_j phi(x, v_j)`` with ``||a||_{p, pi} = norm``."""

    fmap: FeatureMap
    V: np.ndarray
    pi: np.ndarray
    a: np.ndarray
    p: float

    @property
    def norm(self):
        return coeff_norm(self.a, self.pi, self.p)

    @property
    def support(self):
        return np.flatnonzero(self.a)

    def __call__(self, X):
        S = self.support
        return self.fmap(X, self.V[S]) @ (self.pi[S] * self.a[S])


def gen_target(fmap, V, p, seed, kind="gaussian", cap_size=32):
    """Random target on the unit sphere of ``F_{p, pi}``.

    Parameters
    ----------
    fmap : FeatureMap
    V : DiscreteMeasure
        Weight grid with weights ``pi``.
    p : float
    seed : int or numpy Generator
    kind : {"gaussian", "spike", "cap", "matched-cap"}
        Gaussian coefficients on every atom, a single atom drawn from
        ``pi``, or a constant on the ``cap_size`` atoms nearest to a random
        atom (``"matched-cap"`` is the same shape, the name marks a cap whose
        size the caller ties to the feature count).

    Returns
    -------
    Target
        Coefficients rescaled so that ``coeff_norm(a, pi, p) = 1``.
    """
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    pi = np.asarray(V.weights, dtype=float)
    M = pi.size
    a = np.zeros(M)
    if kind == "gaussian":
        a[pi > 0] = rng.standard_normal(int(np.sum(pi > 0)))
    elif kind == "spike":
        a[rng.choice(M, p=pi)] = 1.0
    elif kind in ("cap", "matched-cap"):
        center = V.points[rng.choice(M, p=pi)]
        k = int(min(max(cap_size, 1), np.sum(pi > 0)))
        score = np.where(pi > 0, V.points @ center, -np.inf)
        a[np.argsort(-score, kind="stable")[:k]] = 1.0
    else:
        raise InputError(f"unknown target kind {kind!r}")
    a /= coeff_norm(a, pi, p)
    return Target(fmap, np.asarray(V.points), pi, a, float(p))


@dataclass
class Dataset:
    indices: np.ndarray
    x: np.ndarray
    y: np.ndarray
    clean: np.ndarray


def gen_dataset(target, rho, n, sigma, seed):
    """``n`` i.i.d. atoms of ``rho`` (inverse CDF) with labels ``f*(x) + N(0, sigma^2)``."""
    if n < 1:
        raise InputError("need n >= 1")
    if sigma < 0:
        raise InputError("sigma must be nonnegative")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    cdf = np.cumsum(rho.weights)
    idx = np.searchsorted(cdf, rng.random(int(n)) * cdf[-1], side="right")
    idx = np.minimum(idx, rho.size - 1)
    x = rho.points[idx]
    clean = target(x) if callable(target) else np.asarray(target, dtype=float)[idx]
    y = clean + sigma * rng.standard_normal(int(n)) if sigma > 0 else clean.copy()
    return Dataset(idx, x, y, clean)


# ---------------------------------------------------------------- sweeps


def _grids(cfg):
    V, _ = sphere_grid(cfg.M, cfg.d, seed=cfg.seed)
    X, _ = sphere_grid(cfg.N, cfg.d, seed=cfg.seed + 1, rotate=True)
    T, _ = sphere_grid(cfg.n_test, cfg.d, seed=cfg.seed + 2, rotate=True)
    return V, X, T


def _errors(pred, truth):
    e = pred - truth
    return float(np.sqrt(np.mean(e * e))), float(np.max(np.abs(e)))


def _failed(base, exc):
    log.warning("trial failed: %s", exc)
    return RunRecord(**base, l2_error=float("nan"), linf_error=float("nan"),
                     status=f"{type(exc).__name__}: {exc}")


def _draw_features(V, m, rng):
    return rng.choice(V.size, size=int(m), p=V.weights)


def run_learning_curve(cfg):
    """Constrained least squares on random features for every ``(n, m)`` and trial.

    The target of trial ``t`` is shared by all cells. Features depend on
    ``(m, t)`` only, so curves in ``n`` reuse one feature draw. Errors are
    measured on an independent rotated test grid.
    """
    fmap = cfg.feature_map
    V, X, T = _grids(cfg)
    records = []
    for mi, m in enumerate(cfg.m):
        for ni, n in enumerate(cfg.n):
            cell = mi * len(cfg.n) + ni
            for t in range(cfg.trials):
                base = dict(d=cfg.d, activation=cfg.activation, p=cfg.p, q=cfg.q, n=n, m=m,
                            sigma=cfg.sigma, trial=t)
                start = time.perf_counter()
                try:
                    target = gen_target(fmap, V, cfg.p, stream(cfg.seed, 0, t, TARGET),
                                        cfg.target, cfg.cap_size)
                    idx = _draw_features(V, m, stream(cfg.seed, 1000 + mi, t, FEATURES))
                    data = gen_dataset(target, X, n, cfg.sigma, stream(cfg.seed, cell, t, DATA))
                    ball = LpBall(cfg.p, cfg.radius * m ** (1.0 / cfg.p))
                    A = fmap(data.x, V.points[idx])
                    fit = constrained_ls_fw(A, data.y, ball, max_iter=cfg.max_iter, tol=cfg.tol,
                                            warm_start=True, record_every=1000)
                    pred = fmap(T.points, V.points[idx]) @ fit.coefficients / m
                    l2, linf = _errors(pred, target(T.points))
                    status = "ok" if fit.certified else "uncertified"
                    records.append(RunRecord(**base, l2_error=l2, linf_error=linf,
                                             seconds=time.perf_counter() - start,
                                             certificate=fit.certificate, status=status))
                except _TRIAL_ERRORS as exc:
                    records.append(_failed(base, exc))
    return records


def run_approximation(cfg):
    """Best constrained random-feature fit of ``n_targets`` targets per feature draw.

    For each ``m`` and trial, features are drawn from ``pi`` and each target
    is fitted by least squares on the test grid itself (no sampling noise),
    so the error is the approximation error at that ``m``. A record holds
    the largest error over the targets and the largest solver gap.

    With ``reuse_features`` one draw serves every target; otherwise each
    target gets its own draw. Target kind ``"matched-cap"`` uses caps of
    ``ceil(M / m)`` atoms, i.e. caps whose mass matches the feature sampling
    resolution.
    """
    fmap = cfg.feature_map
    V, _, T = _grids(cfg)
    records = []
    for mi, m in enumerate(cfg.m):
        ball = LpBall(cfg.p, cfg.radius * m ** (1.0 / cfg.p))
        cap = math.ceil(cfg.M / m) if cfg.target == "matched-cap" else cfg.cap_size
        for t in range(cfg.trials):
            base = dict(d=cfg.d, activation=cfg.activation, p=cfg.p, q=cfg.q, n=cfg.n_test,
                        m=m, sigma=0.0, trial=t)
            start = time.perf_counter()
            try:
                l2s, linfs, gaps = [], [], []
                shared = None
                for k in range(cfg.n_targets):
                    target = gen_target(fmap, V, cfg.p, stream(cfg.seed, mi, t, 10 * k + TARGET),
                                        cfg.target, cap)
                    if cfg.reuse_features:
                        if shared is None:
                            idx = _draw_features(V, m, stream(cfg.seed, mi, t, FEATURES))
                            shared = (idx, fmap(T.points, V.points[idx]))
                        idx, A = shared
                    else:
                        idx = _draw_features(V, m, stream(cfg.seed, mi, t, 10 * k + FEATURES))
                        A = fmap(T.points, V.points[idx])
                    f = target(T.points)
                    fit = constrained_ls_fw(A, f, ball, max_iter=cfg.max_iter, tol=cfg.tol,
                                            warm_start=True, record_every=1000)
                    l2, linf = _errors(A @ fit.coefficients / m, f)
                    l2s.append(l2)
                    linfs.append(linf)
                    gaps.append(fit.certificate)
                status = "ok" if max(gaps) <= cfg.tol else "uncertified"
                records.append(RunRecord(**base, l2_error=max(l2s), linf_error=max(linfs),
                                         seconds=time.perf_counter() - start,
                                         certificate=max(gaps), status=status))
            except _TRIAL_ERRORS as exc:
                records.append(_failed(base, exc))
    return records


def _rkhs_target(K, seed, centers=20):
    """Kernel expansion with unit RKHS norm on a random set of grid atoms."""
    rng = np.random.default_rng(seed)
    S = rng.choice(K.shape[0], size=min(centers, K.shape[0]), replace=False)
    beta = rng.standard_normal(S.size)
    beta /= np.sqrt(beta @ K[np.ix_(S, S)] @ beta)
    return K[:, S] @ beta


def run_cod_study(cfg):
    """Norm-constrained kernel regression with the dot-product kernel of the activation.

    Training atoms are drawn from a quasi-uniform grid ``X`` of ``N`` atoms,
    which is also the evaluation grid for the ``L^infinity`` error. Each
    record carries

    * ``l2_error``, ``linf_error``: errors of the fit on the grid;
    * ``lower_bound``: spectral tail ``Lambda(n)``, multiplied by
      ``min(1, sigma / sqrt(kappa(1)))`` when ``sigma > 0``;
    * ``upper_bound``: the spectral upper curve at ``(n, sigma, delta)``;
    * ``certificate``: the computed I-complexity of the unit RKHS ball with
      the sampled atoms as fitting measure and ``eps = sigma / sqrt(n)``
      (grid maximum as prediction norm). JSON output only.

    Bound columns carry no calibrated constants.
    """
    profile = kappa_profile(cfg.activation, cfg.d, cfg.alpha)
    K_deg = cfg.K if cfg.K is not None else default_degree(profile)
    spectrum = eigenvalues_tk(profile, K_deg)
    X, _ = sphere_grid(cfg.N, cfg.d, seed=cfg.seed + 1, rotate=True)
    K = profile(np.clip(X.points @ X.points.T, -1.0, 1.0))
    K = 0.5 * (K + K.T)
    records = []
    for ni, n in enumerate(cfg.n):
        lam = spectrum.tail(n)
        lower = lam if cfg.sigma == 0 else min(1.0, cfg.sigma / np.sqrt(spectrum.kappa1)) * lam
        upper, _, _ = upper_bound_curve(spectrum, n=n, sigma=cfg.sigma, delta=cfg.delta)
        for t in range(cfg.trials):
            base = dict(d=cfg.d, activation=cfg.activation, p=2.0, q=np.inf, n=n, m=0,
                        sigma=cfg.sigma, trial=t)
            start = time.perf_counter()
            try:
                f = _rkhs_target(K, stream(cfg.seed, 0, t, TARGET)) * cfg.radius
                data = gen_dataset(f, X, n, cfg.sigma, stream(cfg.seed, ni, t, DATA))
                S = data.indices
                fit = norm_constrained_krr(K[np.ix_(S, S)], data.y, cfg.radius)
                l2, linf = _errors(K[:, S] @ fit.coefficients, f)
                nu = np.bincount(S, minlength=X.size) / n
                query = ComplexityQuery(nu=nu, eps=cfg.sigma / np.sqrt(n), q=np.inf, rho=X,
                                        K=K, radius=cfg.radius)
                icx = i_complexity_rkhs(query).value
                records.append(RunRecord(**base, l2_error=l2, linf_error=linf, lower_bound=lower,
                                         upper_bound=upper, seconds=time.perf_counter() - start,
                                         certificate=icx))
            except _TRIAL_ERRORS as exc:
                records.append(_failed(base, exc))
    return records


def run(cfg):
    """Dispatch on ``cfg.mode``."""
    return {"learn-curve": run_learning_curve, "approximation": run_approximation,
            "cod-study": run_cod_study}[cfg.mode](cfg)


# ---------------------------------------------------------------- output


def _csv_value(v):
    if isinstance(v, float):
        return repr(v)
    return str(v)


def emit(records, fmt, path, config=None):
    """Write records as CSV (fixed column order) or JSON (every field, plus the config)."""
    path = Path(path)
    try:
        if fmt == "csv":
            with path.open("w", newline="") as fh:
                w = csv.writer(fh)
                w.writerow(CSV_COLUMNS)
                for r in records:
                    w.writerow([_csv_value(getattr(r, c)) for c in CSV_COLUMNS])
        elif fmt == "json":
            payload = {"records": [_record_json(r) for r in records]}
            if config is not None:
                payload["config"] = config.to_dict()
            path.write_text(json.dumps(payload, indent=1))
        else:
            raise InputError(f"unknown format {fmt!r}")
    except OSError as exc:
        raise InputError(f"cannot write {path}: {exc}") from exc
    return path


def _record_json(r):
    # non-finite floats go out as strings so the file stays strict JSON
    return to_jsonable(asdict(r))


def _parse(name, value):
    # RunRecord coerces types; only the column name needs checking here
    if name not in _FIELDS:
        raise InputError(f"unknown record field {name!r}")
    return value


_FIELDS = {f.name for f in fields(RunRecord)}


def load_records(path):
    """Read records written by :func:`emit` (format chosen by file suffix)."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc}") from exc
    if path.suffix == ".json":
        rows = json.loads(text)["records"]
        return [RunRecord(**{k: _parse(k, v) for k, v in row.items()}) for row in rows]
    reader = csv.DictReader(text.splitlines())
    if tuple(reader.fieldnames or ()) != CSV_COLUMNS:
        raise InputError(f"{path}: unexpected header {reader.fieldnames}")
    return [RunRecord(**{k: _parse(k, v) for k, v in row.items()}) for row in reader]
