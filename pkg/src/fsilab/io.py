"""Deterministic CSV writing and schema-checked reading."""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

TRACE_HEADER = ("t", "p", "p_dot", "p_ddot", "alpha", "beta", "eta", "eta_flux", "jump")


class SchemaError(ValueError):
    pass


def format_value(v, precision: int = 17) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, str):
        return v
    v = float(v)
    if math.isnan(v):
        return "nan"
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    return f"{v:.{precision}g}"


def write_csv(path, header: Sequence[str], rows: Iterable[Sequence], precision: int = 17) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            if len(row) != len(header):
                raise SchemaError(f"row has {len(row)} fields, header {len(header)}")
            w.writerow([format_value(v, precision) for v in row])
    return path


def write_columns(path, columns: dict[str, np.ndarray], precision: int = 17) -> Path:
    header = tuple(columns)
    arrays = [np.asarray(columns[h]) for h in header]
    return write_csv(path, header, zip(*arrays), precision)


def read_csv(path, expected_header: Sequence[str] | None = None, numeric: bool = True) -> dict[str, np.ndarray]:
    """Read a CSV into float columns (``true``/``false`` become 1/0).

    With ``numeric=False`` a column that does not parse as numbers is
    returned as an array of strings instead of raising.
    """
    path = Path(path)
    try:
        fh = path.open(newline="")
    except OSError as exc:
        raise SchemaError(f"cannot read {path}: {exc.strerror}") from exc
    with fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise SchemaError(f"{path}: empty file") from None
        if expected_header is not None and tuple(header) != tuple(expected_header):
            raise SchemaError(f"{path}: header {','.join(header)!r} does not match "
                              f"expected {','.join(expected_header)!r}")
        raw: list[list[str]] = [[] for _ in header]
        for lineno, row in enumerate(reader, start=2):
            if len(row) != len(header):
                raise SchemaError(f"{path}:{lineno}: expected {len(header)} fields, got {len(row)}")
            for j, s in enumerate(row):
                raw[j].append(s)
    out = {}
    for h, col in zip(header, raw):
        try:
            out[h] = np.asarray([float({"true": "1", "false": "0"}.get(s, s)) for s in col])
        except ValueError:
            if numeric:
                raise SchemaError(f"{path}: column {h!r} is not numeric") from None
            out[h] = np.asarray(col)
    return out


def trace_columns(sol) -> dict[str, np.ndarray]:
    tr = sol.traces
    return {
        "t": tr.grid.t,
        "p": sol.traj.p,
        "p_dot": sol.traj.p_dot,
        "p_ddot": sol.traj.p_ddot,
        "alpha": tr.alpha,
        "beta": tr.beta,
        "eta": tr.eta,
        "eta_flux": tr.eta_flux,
        "jump": tr.jump,
    }


def write_trace(path, sol, precision: int = 17) -> Path:
    return write_columns(path, trace_columns(sol), precision)


def write_json(path, data: dict) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)

    def clean(v):
        if isinstance(v, dict):
            return {k: clean(x) for k, x in v.items()}
        if isinstance(v, (list, tuple, np.ndarray)):
            return [clean(x) for x in v]
        if isinstance(v, (np.bool_, bool)):
            return bool(v)
        if isinstance(v, (np.integer,)):
            return int(v)
        if isinstance(v, (float, np.floating)):
            v = float(v)
            return v if math.isfinite(v) else str(v)
        return v

    path.write_text(json.dumps(clean(data), indent=2, sort_keys=True) + "\n")
    return path
