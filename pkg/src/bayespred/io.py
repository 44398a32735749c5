"""Round-trip-safe CSV/JSON helpers and observation ingestion."""
from __future__ import annotations

import csv
import hashlib
import json
import math
from pathlib import Path

import numpy as np

from .errors import ConfigurationError
from .measures import AtomTag


def fmt(v) -> str:
    """Numbers with 17 significant digits; anything else via ``str``."""
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".17g")
    if isinstance(v, AtomTag):
        return repr(v)
    return str(v)


def write_csv(path, header, rows):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(v) for v in row])


def jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return jsonable(obj.tolist())
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        f = float(obj)
        return f if math.isfinite(f) else str(f)
    if isinstance(obj, AtomTag):
        return repr(obj)
    return obj


def write_json(path, obj):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(jsonable(obj), indent=2, sort_keys=True) + "\n")


def digest(data) -> str:
    """Stable short hash of a data sequence."""
    blob = json.dumps(jsonable(list(data)), sort_keys=True).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


def _parse_number(s, where):
    try:
        v = float(s)
    except ValueError:
        raise ConfigurationError(f"{where}: {s!r} is not a number") from None
    if not math.isfinite(v):
        raise ConfigurationError(f"{where}: non-finite value {s!r}")
    return v


def read_observations(path, kind="real", with_y=False):
    """Read observations from a headered CSV or a JSONL file.

    ``kind`` is ``categorical`` (integers), ``real`` (one float column) or
    ``vector`` (all remaining columns).  With ``with_y`` the last CSV column
    (or the JSONL field ``y``) is returned separately as 0/1.
    Returns ``(xs, ys)`` with ``ys`` None unless requested.
    """
    path = Path(path)
    if not path.exists():
        raise ConfigurationError(f"data file {path} does not exist")
    records = []
    try:
        if path.suffix.lower() in (".jsonl", ".ndjson"):
            for i, line in enumerate(path.read_text().splitlines(), start=1):
                if not line.strip():
                    continue
                try:
                    rec = json.loads(line)
                except json.JSONDecodeError as exc:
                    raise ConfigurationError(f"{path}:{i}: malformed JSON ({exc.msg})") from None
                if not isinstance(rec, dict) or "x" not in rec:
                    raise ConfigurationError(f"{path}:{i}: each record needs a field 'x'")
                x = rec["x"]
                x = list(x) if isinstance(x, list) else [x]
                if with_y and "y" not in rec:
                    raise ConfigurationError(f"{path}:{i}: missing field 'y'")
                records.append((i, [str(v) for v in x], rec.get("y")))
        else:
            with path.open(newline="") as fh:
                rows = list(csv.reader(fh))
            if not rows:
                raise ConfigurationError(f"{path}: empty file (a header row is required)")
            width = len(rows[0])
            for i, row in enumerate(rows[1:], start=2):
                if not row:
                    continue
                if len(row) != width:
                    raise ConfigurationError(f"{path}:{i}: expected {width} columns, got {len(row)}")
                if with_y:
                    records.append((i, row[:-1], row[-1]))
                else:
                    records.append((i, row, None))
    except UnicodeDecodeError:
        raise ConfigurationError(f"{path}: not a text file") from None
    xs, ys = [], []
    for i, xv, yv in records:
        where = f"{path}:{i}"
        if kind == "categorical":
            v = _parse_number(xv[0], where)
            if v != int(v):
                raise ConfigurationError(f"{where}: categorical values must be integers")
            xs.append(int(v))
        elif kind == "real":
            xs.append(_parse_number(xv[0], where))
        else:
            xs.append(tuple(_parse_number(s, where) for s in xv))
        if with_y:
            y = _parse_number(yv, where)
            if y not in (0.0, 1.0):
                raise ConfigurationError(f"{where}: y must be 0 or 1")
            ys.append(int(y))
    return xs, (ys if with_y else None)
