"""Flat-file formats: measures, matrices, grid functions, spectra and fit results."""

import csv
import json
from dataclasses import asdict
from pathlib import Path

import numpy as np

from .errors import InputError
from .measures import DiscreteMeasure

__all__ = [
    "load_measure",
    "save_measure",
    "load_matrix",
    "save_matrix",
    "load_grid_function",
    "save_grid_function",
    "save_spectrum",
    "save_sphere_eigenvalues",
    "save_sphere_tails",
    "save_fit_result",
    "to_jsonable",
]


def _read_rows(path):
    path = Path(path)
    try:
        with path.open(newline="") as fh:
            rows = [r for r in csv.reader(fh) if r and not r[0].lstrip().startswith("#")]
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc}") from exc
    if rows and not _is_number(rows[0][0]):
        rows = rows[1:]
    try:
        return np.array([[float(v) for v in r] for r in rows], dtype=float)
    except ValueError as exc:
        raise InputError(f"non-numeric entry in {path}: {exc}") from exc


def _is_number(s):
    try:
        float(s)
    except ValueError:
        return False
    return True


def _write_rows(path, header, rows):
    path = Path(path)
    try:
        with path.open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(header)
            w.writerows(rows)
    except OSError as exc:
        raise InputError(f"cannot write {path}: {exc}") from exc
    return path


def _fmt(x):
    return repr(float(x))


def load_measure(path):
    """Measure CSV: one atom per row, coordinates then the weight."""
    data = _read_rows(path)
    if data.ndim != 2 or data.shape[1] < 2:
        raise InputError(f"{path}: need at least one coordinate column and a weight column")
    return DiscreteMeasure(data[:, :-1], data[:, -1])


def save_measure(measure, path):
    d = measure.points.shape[1]
    header = [f"x{i}" for i in range(d)] + ["weight"]
    rows = [[_fmt(v) for v in pt] + [_fmt(w)] for pt, w in zip(measure.points, measure.weights)]
    return _write_rows(path, header, rows)


def load_matrix(path):
    """Dense matrix CSV (an optional non-numeric header row is skipped)."""
    data = _read_rows(path)
    if data.ndim != 2 or data.size == 0:
        raise InputError(f"{path}: empty matrix")
    return data


def save_matrix(M, path):
    M = np.atleast_2d(np.asarray(M, dtype=float))
    return _write_rows(path, [f"c{j}" for j in range(M.shape[1])],
                       [[_fmt(v) for v in row] for row in M])


def load_grid_function(path, size=None):
    """GridFunction CSV with header ``atom_index,value``; missing atoms are zero."""
    data = _read_rows(path)
    if data.size == 0:
        return np.zeros(size or 0)
    if data.shape[1] != 2:
        raise InputError(f"{path}: expected columns atom_index,value")
    idx = data[:, 0].astype(int)
    if np.any(idx < 0) or np.any(idx != data[:, 0]):
        raise InputError(f"{path}: atom indices must be nonnegative integers")
    n = size if size is not None else int(idx.max()) + 1
    if idx.max() >= n:
        raise InputError(f"{path}: atom index {idx.max()} outside grid of size {n}")
    f = np.zeros(n)
    f[idx] = data[:, 1]
    return f


def save_grid_function(f, path):
    return _write_rows(path, ["atom_index", "value"],
                       [[i, _fmt(v)] for i, v in enumerate(np.asarray(f, dtype=float))])


def save_spectrum(decomp, path):
    """Kernel spectrum CSV ``index,eigenvalue,tail_lambda`` (index from 1, tail after it)."""
    lam = np.asarray(decomp.eigenvalues, dtype=float)
    tails = decomp.tails()
    rows = [[i + 1, _fmt(lam[i]), _fmt(tails[i + 1])] for i in range(lam.size)]
    return _write_rows(path, ["index", "eigenvalue", "tail_lambda"], rows)


def save_sphere_eigenvalues(spectrum, path):
    """Distinct sphere eigenvalues ``k,N(d,k),t_k``."""
    rows = [[k, int(spectrum.N[k]), _fmt(spectrum.t[k])] for k in range(spectrum.t.size)]
    return _write_rows(path, ["k", "N(d,k)", "t_k"], rows)


def save_sphere_tails(m_values, tails, path):
    """Tail curve ``m,lambda_tail``."""
    return _write_rows(path, ["m", "lambda_tail"],
                       [[int(m), _fmt(t)] for m, t in zip(m_values, tails)])


def to_jsonable(obj):
    """Convert numpy scalars/arrays (recursively) to JSON-ready values."""
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [to_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        if np.isfinite(x):
            return x
        return "inf" if x > 0 else ("-inf" if x < 0 else "nan")
    return obj


def save_fit_result(result, path, coefficients_path=None):
    """FitResult JSON ``{objective, certificate, iterations, coefficients_file, ...}``."""
    path = Path(path)
    coefficients_path = Path(coefficients_path or path.with_suffix(".coefficients.csv"))
    save_grid_function(result.coefficients, coefficients_path)
    payload = asdict(result)
    payload.pop("coefficients")
    payload.pop("history", None)
    payload["coefficients_file"] = str(coefficients_path)
    try:
        path.write_text(json.dumps(to_jsonable(payload), indent=2))
    except OSError as exc:
        raise InputError(f"cannot write {path}: {exc}") from exc
    return path
