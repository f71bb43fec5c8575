"""JSON and CSV emission of results.

JSON floats use Python's shortest round-trip repr, CSV floats 17 significant
digits; both read back bit-exactly.  Non-finite floats are written as the
strings ``"inf"``, ``"-inf"`` and ``"nan"`` so the JSON stays standard.
"""

from __future__ import annotations

import csv
import enum
import io
import json
import math
import sys
from fractions import Fraction
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np

from .params import DerivedParams, ProblemParams, derive

SCHEMA_VERSION = 1


class OutputError(OSError):
    pass


def jsonable(obj):
    """Recursively convert results into plain JSON types."""
    if hasattr(obj, "to_dict"):
        return jsonable(obj.to_dict())
    if isinstance(obj, dict):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [jsonable(v) for v in obj.tolist()]
    if isinstance(obj, enum.Enum):
        return obj.value
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating, Fraction)):
        x = float(obj)
        return x if math.isfinite(x) else repr(x)
    if obj is None or isinstance(obj, str):
        return obj
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def document(command: str, params: Optional[ProblemParams], result: dict,
             derived: Optional[DerivedParams] = None) -> dict:
    """Result document: schema version, inputs, the derived-parameter block and the result fields."""
    doc = {"schema_version": SCHEMA_VERSION, "command": command}
    if params is not None:
        doc["params"] = params.to_dict()
        doc["derived"] = (derived or derive(params)).to_dict()
    doc.update(result)
    return jsonable(doc)


def dumps_json(doc: dict) -> str:
    return json.dumps(jsonable(doc), indent=2, sort_keys=True, allow_nan=False) + "\n"


def fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating, Fraction)):
        return format(float(x), ".17g")
    if x is None:
        return ""
    if isinstance(x, enum.Enum):
        return str(x.value)
    return str(x)


def dumps_csv(columns: Sequence[str], rows: Iterable[Sequence]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([fmt(x) for x in row])
    return buf.getvalue()


def profile_csv(grid, values, derivs) -> str:
    return dumps_csv(["r", "value", "deriv"], zip(grid, values, derivs))


def read_csv(source) -> tuple[list[str], list[list[str]]]:
    """Header and rows of a CSV file or text stream."""
    if isinstance(source, (str, Path)):
        with open(source, newline="") as fh:
            rows = list(csv.reader(fh))
    else:
        rows = list(csv.reader(source))
    return rows[0], rows[1:]


def read_profile_csv(source) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    header, rows = read_csv(source)
    if header != ["r", "value", "deriv"]:
        raise ValueError(f"not a profile CSV, header {header}")
    data = np.array([[float(x) for x in row] for row in rows], dtype=float).reshape(-1, 3)
    return data[:, 0].copy(), data[:, 1].copy(), data[:, 2].copy()


def write_text(text: str, path: Optional[str]) -> None:
    """Write to ``path``, or standard output when ``path`` is None or ``-``."""
    if path in (None, "-"):
        sys.stdout.write(text)
        return
    try:
        with open(path, "w", newline="") as fh:
            fh.write(text)
    except OSError as exc:
        raise OutputError(f"cannot write {path}: {exc.strerror or exc}") from exc
