"""Deterministic CSV and JSON writers."""
from __future__ import annotations

import json
import math
import os

import numpy as np

SCHEMA_VERSION = "1.0"

METADATA_KEYS = ("config_hash", "schema_version", "guard_flags", "tolerances", "verdicts")


def fmt(x):
    """17 significant digits; integers and non-finite values spelled plainly."""
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    if x == 0.0:
        return "0"  # also folds -0.0, which would otherwise break byte equality
    return format(x, ".17g")


def split_complex(name, values):
    v = np.asarray(values)
    if np.iscomplexobj(v):
        return {f"{name}_re": v.real, f"{name}_im": v.imag}
    return {name: v}


def write_csv(path, columns):
    """``columns`` is an ordered mapping name -> 1d array; complex arrays get _re/_im columns."""
    flat = {}
    for k, v in columns.items():
        flat.update(split_complex(k, v))
    names = list(flat)
    arrs = [np.asarray(flat[n], dtype=float).ravel() for n in names]
    n = {a.size for a in arrs}
    if len(n) != 1:
        raise ValueError(f"ragged CSV columns: {dict(zip(names, [a.size for a in arrs]))}")
    lines = [",".join(names)]
    for row in zip(*arrs):
        lines.append(",".join(fmt(x) for x in row))
    _write(path, "\n".join(lines) + "\n")


def read_csv(path):
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().strip().split(",")
        data = np.loadtxt(fh, delimiter=",", ndmin=2)
    return {h: data[:, i] for i, h in enumerate(header)}


def write_table(path, header, rows):
    """Mixed text/number rows (used for bound-state tables)."""
    lines = [",".join(header)]
    for r in rows:
        lines.append(",".join(fmt(x) if isinstance(x, (float, np.floating)) else str(x) for x in r))
    _write(path, "\n".join(lines) + "\n")


def jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (complex, np.complexfloating)):
        return {"re": jsonable(obj.real), "im": jsonable(obj.imag)}
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if not math.isfinite(x):
            return fmt(x)
        return 0.0 if x == 0.0 else x
    return obj


def dumps(obj):
    return json.dumps(jsonable(obj), sort_keys=True, indent=2, allow_nan=False) + "\n"


def write_json(path, obj):
    _write(path, dumps(obj))


def metadata(config_hash, guard_flags=None, tolerances=None, verdicts=None, **extra):
    meta = {
        "config_hash": config_hash,
        "schema_version": SCHEMA_VERSION,
        "guard_flags": guard_flags or {},
        "tolerances": tolerances or {},
        "verdicts": verdicts or {},
    }
    clash = set(extra) & set(meta)
    if clash:
        raise ValueError(f"reserved metadata keys {sorted(clash)}")
    meta.update(extra)
    return meta


def _write(path, text):
    d = os.path.dirname(path)
    if d:
        os.makedirs(d, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)
