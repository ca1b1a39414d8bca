"""Command line entry point ``fpidual``.

Subcommands::

    fpidual spectrum    --activation relu --d 3 --alpha 1 --degree 200
    fpidual dual-check  --config instance.json
    fpidual complexity  --config query.json
    fpidual fit         --features A.csv --targets y.csv --p 1.5 --radius 10
    fpidual learn-curve --config sweep.json
    fpidual cod-study   --config sweep.json

Configs are JSON files. ``--seed``, ``--trials`` and ``--out`` override
the config. Exit codes: 0 success, 1 gate failure, 2 input error.
"""

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import io
from .complexity import ComplexityQuery, i_complexity
from .duality import DualityInstance, verify
from .errors import InputError
from .experiments import ExperimentConfig, emit, run
from .kernels import mercer
from .measures import DiscreteMeasure
from .solvers import LpBall, constrained_ls_fw, norm_constrained_krr
from .sphere import default_degree, dyadic, eigenvalues_tk, kappa_profile

EXIT_OK, EXIT_GATE, EXIT_INPUT = 0, 1, 2

log = logging.getLogger("fpidual")


def _load_config(path):
    if path is None:
        return {}
    path = Path(path)
    try:
        data = json.loads(path.read_text())
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}: invalid JSON ({exc})") from exc
    if not isinstance(data, dict):
        raise InputError(f"{path}: config must be a JSON object")
    return data


def _out_dir(args):
    out = Path(args.out)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise InputError(f"cannot create {out}: {exc}") from exc
    return out


def _write_json(payload, path):
    try:
        Path(path).write_text(json.dumps(io.to_jsonable(payload), indent=2))
    except OSError as exc:
        raise InputError(f"cannot write {path}: {exc}") from exc
    print(path)


def _exponent(value):
    return float("inf") if str(value).lower() in ("inf", "infinity") else float(value)


def _measure_weights(spec, size, base):
    """``None``, a list of weights, or a CSV path (relative to the config)."""
    if spec is None:
        return None
    if isinstance(spec, str):
        w = io.load_measure(base / spec).weights
    else:
        w = np.asarray(spec, dtype=float)
    if w.shape != (size,):
        raise InputError(f"measure has {w.size} atoms, expected {size}")
    return w


def _matrix(cfg, key, base):
    spec = cfg.get(key)
    if spec is None:
        return None
    if isinstance(spec, str):
        return io.load_matrix(base / spec)
    return np.atleast_2d(np.asarray(spec, dtype=float))


# ---------------------------------------------------------------- subcommands


def cmd_spectrum(args):
    out = _out_dir(args)
    if args.kernel:
        K = io.load_matrix(args.kernel)
        gamma = io.load_measure(args.measure) if args.measure else DiscreteMeasure(
            np.arange(K.shape[0], dtype=float))
        path = io.save_spectrum(mercer(K, gamma), out / "spectrum.csv")
        print(path)
        return EXIT_OK
    profile = kappa_profile(args.activation, args.d, args.alpha)
    degree = args.degree if args.degree is not None else default_degree(profile)
    spec = eigenvalues_tk(profile, degree)
    m = dyadic(1, max(2, 2 ** int(np.log2(max(spec.count - 1, 2)))))
    print(io.save_sphere_eigenvalues(spec, out / "sphere_eigenvalues.csv"))
    print(io.save_sphere_tails(m, spec.tail(m), out / "sphere_tails.csv"))
    return EXIT_OK


def _duality_instance(cfg, args, base):
    Phi = _matrix(cfg, "Phi", base)
    if Phi is None:
        N, M = int(cfg.get("N", 25)), int(cfg.get("M", 25))
        rng = np.random.default_rng(args.seed if args.seed is not None else cfg.get("seed", 0))
        Phi = rng.standard_normal((N, M))
        S = cfg.get("S")
        if S is None:
            S = rng.choice(N, size=min(int(cfg.get("sample_size", 8)), N), replace=False)
    else:
        S = cfg.get("S")
    N, M = Phi.shape
    return DualityInstance(
        Phi,
        rho=_measure_weights(cfg.get("rho"), N, base),
        pi=_measure_weights(cfg.get("pi"), M, base),
        p=_exponent(cfg.get("p", 2)),
        q=_exponent(cfg.get("q", 2)),
        r=_exponent(cfg.get("r", 2)),
        nu=_measure_weights(cfg.get("nu"), N, base),
        eps=_exponent(cfg.get("eps", 0.0)),
        S=S,
        space=cfg.get("space", "fp"),
    )


def cmd_dual_check(args):
    cfg = _load_config(args.config)
    base = Path(args.config).parent if args.config else Path(".")
    inst = _duality_instance(cfg, args, base)
    report = verify(inst, tol=float(cfg.get("tol", 1e-8)), restarts=int(cfg.get("restarts", 64)),
                    seed=args.seed if args.seed is not None else int(cfg.get("seed", 0)),
                    heuristic_tol=float(cfg.get("heuristic_tol", 0.02)))
    _write_json(report.as_dict(), _out_dir(args) / "duality_report.json")
    return EXIT_OK if report.passed else EXIT_GATE


def cmd_complexity(args):
    cfg = _load_config(args.config)
    base = Path(args.config).parent if args.config else Path(".")
    K, Phi = _matrix(cfg, "K", base), _matrix(cfg, "Phi", base)
    if (K is None) == (Phi is None):
        raise InputError("complexity config needs exactly one of 'K' or 'Phi'")
    N = (K if K is not None else Phi).shape[0]
    nu = _measure_weights(cfg.get("nu"), N, base)
    if nu is None and cfg.get("S") is not None:
        nu = np.zeros(N)
        S = np.unique(np.asarray(cfg["S"], dtype=int))
        nu[S] = 1.0 / S.size
    query = ComplexityQuery(
        nu=nu, eps=float(cfg.get("eps", 0.0)), q=_exponent(cfg.get("q", "inf")),
        rho=_measure_weights(cfg.get("rho"), N, base), r=_exponent(cfg.get("r", 2)),
        K=K, Phi=Phi,
        pi=None if Phi is None else _measure_weights(cfg.get("pi"), Phi.shape[1], base),
        p=_exponent(cfg.get("p", 2)), radius=float(cfg.get("radius", 1.0)))
    res = i_complexity(query, restarts=int(cfg.get("restarts", 32)),
                       seed=args.seed if args.seed is not None else int(cfg.get("seed", 0)))
    out = _out_dir(args)
    witness = io.save_grid_function(res.witness, out / "witness.csv")
    _write_json({"value": res.value, "certified": res.certified, "method": res.method,
                 "witness_file": str(witness)}, out / "complexity.json")
    return EXIT_OK


def cmd_fit(args):
    cfg = _load_config(args.config)
    base = Path(args.config).parent if args.config else Path(".")
    feats = args.features or cfg.get("features")
    targs = args.targets or cfg.get("targets")
    if not feats or not targs:
        raise InputError("fit needs a features CSV and a targets CSV")
    A = io.load_matrix(base / feats if not args.features else feats)
    y_path = base / targs if not args.targets else Path(targs)
    y = io.load_grid_function(y_path, size=A.shape[0])
    kind = args.kind or cfg.get("kind", "features")
    radius = args.radius if args.radius is not None else cfg.get("radius")
    if kind == "kernel":
        if A.shape[0] != A.shape[1]:
            raise InputError("kernel fit needs a square kernel matrix")
        res = norm_constrained_krr(A, y, float(radius if radius is not None else 1.0))
    elif kind == "features":
        p = _exponent(args.p if args.p is not None else cfg.get("p", 2))
        m = A.shape[1]
        R = float(radius) if radius is not None else m ** (1.0 / p)
        res = constrained_ls_fw(A, y, LpBall(p, R), tol=float(cfg.get("tol", 1e-6)),
                                max_iter=int(cfg.get("max_iter", 100000)), warm_start=True)
    else:
        raise InputError(f"unknown fit kind {kind!r}")
    path = io.save_fit_result(res, _out_dir(args) / "fit.json")
    print(path)
    return EXIT_OK if res.certified else EXIT_GATE


def _sweep(args, mode):
    data = _load_config(args.config)
    cfg = ExperimentConfig.from_dict(data)
    if mode == "cod-study":
        cfg = cfg.replace(mode="cod-study")
    elif cfg.mode == "cod-study":
        raise InputError("use the cod-study subcommand for cod-study configs")
    overrides = {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.trials is not None:
        overrides["trials"] = args.trials
    if overrides:
        cfg = cfg.replace(**overrides)
    records = run(cfg)
    out = _out_dir(args)
    csv_path = Path(cfg.csv) if cfg.csv and not args.out_given else out / f"{cfg.mode}.csv"
    json_path = Path(cfg.json) if cfg.json and not args.out_given else out / f"{cfg.mode}.json"
    print(emit(records, "csv", csv_path))
    print(emit(records, "json", json_path, config=cfg))
    bad = [r for r in records if not r.ok]
    if bad:
        log.warning("%d of %d trials failed or were not certified", len(bad), len(records))
        return EXIT_GATE
    return EXIT_OK


def cmd_learn_curve(args):
    return _sweep(args, "learn-curve")


def cmd_cod_study(args):
    return _sweep(args, "cod-study")


# ---------------------------------------------------------------- parser


def build_parser():
    parser = argparse.ArgumentParser(prog="fpidual", description=__doc__.split("\n")[0])
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, config_required=False):
        p.add_argument("--config", required=config_required, help="JSON config file")
        p.add_argument("--seed", type=int, help="override the config seed")
        p.add_argument("--trials", type=int, help="override the number of trials")
        p.add_argument("--out", default=None, help="output directory (default: current)")
        return p

    p = common(sub.add_parser("spectrum", help="kernel or sphere spectrum"))
    p.add_argument("--activation", default="relu")
    p.add_argument("--d", type=int, default=3)
    p.add_argument("--alpha", type=int, default=1)
    p.add_argument("--degree", type=int, default=None, help="largest harmonic degree")
    p.add_argument("--kernel", help="kernel matrix CSV (generic spectrum)")
    p.add_argument("--measure", help="measure CSV for --kernel")
    p.set_defaults(func=cmd_spectrum)

    p = common(sub.add_parser("dual-check", help="verify the dual equivalence on one instance"))
    p.set_defaults(func=cmd_dual_check)

    p = common(sub.add_parser("complexity", help="I-complexity of a ball"), config_required=True)
    p.set_defaults(func=cmd_complexity)

    p = common(sub.add_parser("fit", help="constrained least squares or kernel fit"))
    p.add_argument("--features", help="feature (or kernel) matrix CSV")
    p.add_argument("--targets", help="targets CSV (atom_index,value)")
    p.add_argument("--kind", choices=("features", "kernel"))
    p.add_argument("--p", help="coefficient exponent")
    p.add_argument("--radius", type=float)
    p.set_defaults(func=cmd_fit)

    p = common(sub.add_parser("learn-curve", help="random-feature learning or approximation sweep"),
               config_required=True)
    p.set_defaults(func=cmd_learn_curve)

    p = common(sub.add_parser("cod-study", help="kernel L-infinity study on sphere grids"),
               config_required=True)
    p.set_defaults(func=cmd_cod_study)
    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INPUT if exc.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    args.out_given = args.out is not None
    if args.out is None:
        args.out = "."
    if args.trials is not None and args.trials < 1:
        print("error: --trials must be positive", file=sys.stderr)
        return EXIT_INPUT
    try:
        return args.func(args)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
